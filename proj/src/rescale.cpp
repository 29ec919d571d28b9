#include "pathnorm/rescale.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pathnorm/error.hpp"
#include "pathnorm/pathnorms.hpp"

namespace pathnorm {

void validate_op(const NetworkGraph& g, const RescalingOp& op) {
  if (op.node >= g.num_nodes()) throw ConfigError("rescaling node " + std::to_string(op.node) + " out of range");
  if (!g.is_hidden(op.node))
    throw ConfigError("rescaling node " + std::to_string(op.node) + " is an input or output unit");
  if (!(op.c > 0.0) || !std::isfinite(op.c))
    throw ConfigError("rescaling factor must be positive and finite, got " + std::to_string(op.c));
}

void apply_rescaling_inplace(const NetworkGraph& g, std::span<double> w, const RescalingOp& op) {
  validate_op(g, op);
  for (EdgeId e : g.in_edges(op.node)) w[e] *= op.c;
  for (EdgeId e : g.out_edges(op.node)) w[e] /= op.c;
}

WeightVector apply_rescaling(const NetworkGraph& g, std::span<const double> w, const RescalingOp& op) {
  check_weights(g, w);
  WeightVector out(w.begin(), w.end());
  apply_rescaling_inplace(g, out, op);
  return out;
}

WeightVector apply_plan(const NetworkGraph& g, std::span<const double> w, const RescalingPlan& plan) {
  check_weights(g, w);
  WeightVector out(w.begin(), w.end());
  for (const RescalingOp& op : plan) apply_rescaling_inplace(g, out, op);
  return out;
}

RescalingPlan inverse_plan(const RescalingPlan& plan) {
  RescalingPlan inv;
  inv.reserve(plan.size());
  for (auto it = plan.rbegin(); it != plan.rend(); ++it) inv.push_back({it->node, 1.0 / it->c});
  return inv;
}

RescalingPlan random_plan(const NetworkGraph& g, std::size_t n_ops, double c_min, double c_max,
                          std::uint64_t seed) {
  if (!(c_min > 0.0) || !(c_max >= c_min)) throw ConfigError("random_plan needs 0 < c_min <= c_max");
  RescalingPlan plan;
  const auto hidden = g.hidden();
  if (hidden.empty()) return plan;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, hidden.size() - 1);
  std::uniform_real_distribution<double> log_c(std::log(c_min), std::log(c_max));
  for (std::size_t i = 0; i < n_ops; ++i) {
    const NodeId v = hidden[pick(rng)];
    plan.push_back({v, std::exp(log_c(rng))});
  }
  return plan;
}

namespace {

double normalized_deviation(std::span<const double> a, std::span<const double> b) {
  double max_a = 0.0, max_diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    max_a = std::max(max_a, std::abs(a[i]));
    max_diff = std::max(max_diff, std::abs(a[i] - b[i]));
  }
  return max_diff / (1.0 + max_a);
}

// Per edge: sum over paths through the edge of the path product, and of its
// square. Both are functions of the path vector alone.
std::pair<std::vector<double>, std::vector<double>> edge_aggregates(const NetworkGraph& g,
                                                                    std::span<const double> w) {
  const std::size_t n = g.num_nodes();
  std::vector<double> in1(n, 0.0), in2(n, 0.0), out1(n, 0.0), out2(n, 0.0);
  for (NodeId v : g.inputs()) in1[v] = in2[v] = 1.0;
  for (NodeId v : g.outputs()) out1[v] = out2[v] = 1.0;
  const auto topo = g.topological_order();
  for (NodeId v : topo) {
    for (EdgeId e : g.in_edges(v)) {
      const NodeId u = g.edge(e).source;
      in1[v] += in1[u] * w[e];
      in2[v] += in2[u] * w[e] * w[e];
    }
  }
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const NodeId v = *it;
    for (EdgeId e : g.out_edges(v)) {
      const NodeId t = g.edge(e).target;
      out1[v] += w[e] * out1[t];
      out2[v] += w[e] * w[e] * out2[t];
    }
  }
  std::vector<double> s1(g.num_edges()), s2(g.num_edges());
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edge(e);
    s1[e] = in1[ed.source] * w[e] * out1[ed.target];
    s2[e] = in2[ed.source] * w[e] * w[e] * out2[ed.target];
  }
  return {std::move(s1), std::move(s2)};
}

}  // namespace

EquivalenceReport check_rescaling_equivalent(const NetworkGraph& g, std::span<const double> w1,
                                             std::span<const double> w2, double tol,
                                             std::uint64_t bruteforce_limit) {
  check_weights(g, w1);
  check_weights(g, w2);
  EquivalenceReport report;
  if (count_paths(g) <= bruteforce_limit) {
    report.method = EquivalenceReport::Method::kPathVector;
    report.max_deviation = normalized_deviation(path_vector_bruteforce(g, w1, bruteforce_limit),
                                                path_vector_bruteforce(g, w2, bruteforce_limit));
  } else {
    report.method = EquivalenceReport::Method::kEdgeAggregates;
    const auto [a1, a2] = edge_aggregates(g, w1);
    const auto [b1, b2] = edge_aggregates(g, w2);
    report.max_deviation = std::max(normalized_deviation(a1, b1), normalized_deviation(a2, b2));
  }
  report.equivalent = report.max_deviation <= tol;
  return report;
}

RescalingPlan unbalance_plan(const NetworkGraph& g, std::size_t k, std::uint64_t seed,
                             const UnbalanceParams& params) {
  RescalingPlan plan;
  if (k == 0) return plan;
  const auto hidden = g.hidden();
  if (hidden.empty()) throw ConfigError("cannot unbalance a network without hidden units");
  if (!(params.lognormal_sigma >= 0.0) || !(params.multiplier > 0.0))
    throw ConfigError("unbalance needs sigma >= 0 and a positive multiplier");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, hidden.size() - 1);
  std::lognormal_distribution<double> scale(params.lognormal_mu, params.lognormal_sigma);
  plan.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const NodeId v = hidden[pick(rng)];
    const double c = scale(rng);
    plan.push_back({v, params.multiplier * c});
  }
  return plan;
}

WeightVector unbalance(const NetworkGraph& g, std::span<const double> w, std::size_t k, std::uint64_t seed,
                       const UnbalanceParams& params) {
  return apply_plan(g, w, unbalance_plan(g, k, seed, params));
}

namespace {

// log of the l_p norm of the incoming weights of `v` under log-scales `t`,
// where edge u->v carries w * exp(t[v] - t[u]).
double log_unit_norm(const NetworkGraph& g, std::span<const double> log_abs_w, std::span<const double> t,
                     NodeId v, double p) {
  double peak = -kInfinity;
  for (EdgeId e : g.in_edges(v)) peak = std::max(peak, log_abs_w[e] - t[g.edge(e).source]);
  double s = 0.0;
  for (EdgeId e : g.in_edges(v)) s += std::exp(p * (log_abs_w[e] - t[g.edge(e).source] - peak));
  return t[v] + peak + std::log(s) / p;
}

}  // namespace

BalanceResult balance_oracle(const NetworkGraph& g, std::span<const double> w, double p,
                             std::size_t max_sweeps, double tol) {
  if (!(p >= 1.0)) throw ConfigError("p must be >= 1");
  check_weights(g, w);
  if (g.outputs().size() != 1) throw ConfigError("balance_oracle needs a single output unit");
  const LevelSets levels = compute_levels(g);
  if (!is_graded(g, levels)) throw ConfigError("balance_oracle needs all input-output paths to have equal length");
  std::vector<double> log_abs_w(w.size());
  for (EdgeId e = 0; e < w.size(); ++e) {
    if (w[e] == 0.0) throw InputError("balance_oracle needs nonzero weights; edge " + std::to_string(e) + " is 0");
    log_abs_w[e] = std::log(std::abs(w[e]));
  }

  std::vector<double> t(g.num_nodes(), 0.0);
  BalanceResult result;

  // f(t_v) = log|in(v)| - max over successors x of log|in(x)|; strictly increasing in t_v.
  auto imbalance = [&](NodeId v, double tv) {
    t[v] = tv;
    double succ = -kInfinity;
    for (EdgeId e : g.out_edges(v)) succ = std::max(succ, log_unit_norm(g, log_abs_w, t, g.edge(e).target, p));
    return log_unit_norm(g, log_abs_w, t, v, p) - succ;
  };

  const auto hidden = g.hidden();
  while (!hidden.empty()) {
    if (result.sweeps == max_sweeps) {
      throw ConvergenceError("balance_oracle did not converge in " + std::to_string(max_sweeps) + " sweeps",
                             result.residual);
    }
    ++result.sweeps;
    double max_change = 0.0;
    for (NodeId v : hidden) {
      const double start = t[v];
      double lo = start - 1.0, hi = start + 1.0;
      while (imbalance(v, lo) > 0.0) lo -= 2.0 * (hi - lo);
      while (imbalance(v, hi) < 0.0) hi += 2.0 * (hi - lo);
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (imbalance(v, mid) < 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      t[v] = 0.5 * (lo + hi);
      max_change = std::max(max_change, std::abs(t[v] - start));
    }
    result.residual = max_change;
    if (max_change < tol) break;
  }

  result.weights.assign(w.begin(), w.end());
  for (EdgeId e = 0; e < w.size(); ++e) {
    const Edge& ed = g.edge(e);
    result.weights[e] *= std::exp(t[ed.target] - t[ed.source]);
  }
  result.value = std::pow(max_norm(g, result.weights, p), static_cast<double>(g.depth()));
  return result;
}

}  // namespace pathnorm
