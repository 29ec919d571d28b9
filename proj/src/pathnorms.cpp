#include "pathnorm/pathnorms.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pathnorm/error.hpp"
#include "pathnorm/rescale.hpp"

namespace pathnorm {

namespace {

void check_p(double p, const char* name) {
  if (!(p >= 1.0)) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(p));
}

double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

double group_norm(const NetworkGraph& g, std::span<const double> w, const GroupNormParams& params) {
  check_p(params.p, "p");
  check_p(params.q, "q");
  check_weights(g, w);

  const bool sup = std::isinf(params.q);
  double acc = 0.0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (g.fan_in(v) == 0) continue;
    double unit = 0.0;
    if (std::isinf(params.p)) {
      for (EdgeId e : g.in_edges(v)) unit = std::max(unit, std::abs(w[e]));
    } else {
      for (EdgeId e : g.in_edges(v)) unit += abs_pow(w[e], params.p);
      unit = std::pow(unit, 1.0 / params.p);
    }
    if (sup) {
      acc = std::max(acc, unit);
    } else {
      acc += std::pow(unit, params.q);
    }
  }
  return sup ? acc : std::pow(acc, 1.0 / params.q);
}

double max_norm(const NetworkGraph& g, std::span<const double> w, double p) {
  return group_norm(g, w, {p, kInfinity});
}

PathVector path_vector_bruteforce(const NetworkGraph& g, std::span<const double> w, std::uint64_t max_paths) {
  check_weights(g, w);
  const std::uint64_t n_paths = count_paths(g);
  if (n_paths > max_paths) {
    throw ConfigError("graph has " + std::to_string(n_paths) + " paths, brute-force limit is " +
                      std::to_string(max_paths));
  }
  PathVector out;
  out.reserve(n_paths);

  // Iterative DFS; each frame holds the node, the product so far and the
  // next out-edge to try.
  struct Frame {
    NodeId node;
    double product;
    std::size_t next;
  };
  std::vector<Frame> stack;
  for (NodeId in : g.inputs()) {
    stack.push_back({in, 1.0, 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (g.is_output(f.node)) {
        out.push_back(f.product);
        stack.pop_back();
        continue;
      }
      const auto outs = g.out_edges(f.node);
      if (f.next == outs.size()) {
        stack.pop_back();
        continue;
      }
      const EdgeId e = outs[f.next++];
      const double product = f.product * w[e];
      stack.push_back({g.edge(e).target, product, 0});
    }
  }
  return out;
}

double lp_norm(std::span<const double> v, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  double s = 0.0;
  for (double x : v) s += abs_pow(x, p);
  return std::pow(s, 1.0 / p);
}

double path_norm_dp(const NetworkGraph& g, std::span<const double> w, double p) {
  check_p(p, "p");
  check_weights(g, w);
  std::vector<double> s(g.num_nodes(), 0.0);
  for (NodeId v : g.inputs()) s[v] = 1.0;
  double total = 0.0;
  for (NodeId v : g.topological_order()) {
    if (g.is_input(v)) continue;
    double acc = 0.0;
    for (EdgeId e : g.in_edges(v)) acc += s[g.edge(e).source] * abs_pow(w[e], p);
    if (!std::isfinite(acc)) throw NumericError("path-norm accumulator is not finite at node " + std::to_string(v));
    s[v] = acc;
    if (g.is_output(v)) total += acc;
  }
  return std::pow(total, 1.0 / p);
}

Lemma1Report lemma1_check(const NetworkGraph& g, std::span<const double> w, double p, std::size_t n_samples,
                          std::uint64_t seed, bool run_oracle, const Lemma1Tolerances& tol) {
  Lemma1Report report;
  report.phi = path_norm_dp(g, w, p);
  report.samples = n_samples;

  const LevelSets levels = compute_levels(g);
  const bool max_norm_applies = g.outputs().size() == 1 && is_graded(g, levels);
  const double depth = static_cast<double>(g.depth());

  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const RescalingPlan plan = random_plan(g, 5, 1e-3, 1e3, rng());
    const WeightVector rescaled = apply_plan(g, w, plan);
    const double dev = rel_diff(path_norm_dp(g, rescaled, p), report.phi);
    report.max_invariance_deviation = std::max(report.max_invariance_deviation, dev);
    if (max_norm_applies) {
      const double slack = std::pow(max_norm(g, rescaled, p), depth) - report.phi;
      report.min_bound_slack = std::min(report.min_bound_slack, slack);
    }
  }
  if (report.max_invariance_deviation > tol.invariance_rel)
    report.failures.push_back({"invariance", report.max_invariance_deviation});

  if (max_norm_applies) {
    report.bound_checked = n_samples > 0;
    if (report.bound_checked && report.min_bound_slack < -tol.bound_abs)
      report.failures.push_back({"upper-bound", -report.min_bound_slack});

    const bool nonzero = std::none_of(w.begin(), w.end(), [](double x) { return x == 0.0; });
    if (run_oracle && nonzero) {
      const BalanceResult balanced = balance_oracle(g, w, p);
      report.oracle_checked = true;
      report.oracle_value = balanced.value;
      report.oracle_deviation = rel_diff(balanced.value, report.phi);
      if (report.oracle_deviation > tol.oracle_rel) report.failures.push_back({"oracle", report.oracle_deviation});
    }
  }
  return report;
}

}  // namespace pathnorm
