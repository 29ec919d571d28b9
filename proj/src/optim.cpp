#include "pathnorm/optim.hpp"

#include <cmath>

#include "pathnorm/error.hpp"
#include "pathnorm/pathnorms.hpp"

namespace pathnorm {

namespace {

void check_grad(std::span<const double> w, std::span<const double> grad) {
  if (w.size() != grad.size()) {
    throw InputError("gradient has " + std::to_string(grad.size()) + " entries, weights have " +
                     std::to_string(w.size()));
  }
}

double root_power(double x, double exponent) { return exponent == 1.0 ? x : std::pow(x, exponent); }

}  // namespace

PathScalars compute_gamma(const NetworkGraph& g, const LevelSets& levels, std::span<const double> w, double p) {
  if (!(p >= 1.0)) throw ConfigError("p must be >= 1");
  if (w.size() != g.num_edges()) throw InputError("weight vector does not match graph");
  const std::size_t n = g.num_nodes();
  PathScalars s;
  s.gamma_in.assign(n, 0.0);
  s.gamma_out.assign(n, 0.0);
  for (NodeId v : levels.in_levels.at(0)) s.gamma_in[v] = 1.0;
  for (NodeId v : levels.out_levels.at(0)) s.gamma_out[v] = 1.0;

  for (std::size_t i = 1; i < levels.in_levels.size(); ++i) {
    for (NodeId v : levels.in_levels[i]) {
      double acc = 0.0;
      for (EdgeId e : g.in_edges(v)) acc += s.gamma_in[g.edge(e).source] * abs_pow(w[e], p);
      if (!std::isfinite(acc)) throw NumericError("gamma_in is not finite at node " + std::to_string(v));
      s.gamma_in[v] = acc;
    }
  }
  for (std::size_t i = 1; i < levels.out_levels.size(); ++i) {
    for (NodeId v : levels.out_levels[i]) {
      double acc = 0.0;
      for (EdgeId e : g.out_edges(v)) acc += abs_pow(w[e], p) * s.gamma_out[g.edge(e).target];
      if (!std::isfinite(acc)) throw NumericError("gamma_out is not finite at node " + std::to_string(v));
      s.gamma_out[v] = acc;
    }
  }

  const double exponent = 2.0 / p;
  s.gamma_edge.resize(g.num_edges());
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edge(e);
    const double gamma = root_power(s.gamma_in[ed.source], exponent) * root_power(s.gamma_out[ed.target], exponent);
    if (!std::isfinite(gamma)) throw NumericError("gamma is not finite on edge " + std::to_string(e));
    s.gamma_edge[e] = gamma;
  }
  return s;
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kAdaGrad:
      return "adagrad";
    case OptimizerKind::kPathSgd:
      return "pathsgd";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adagrad") return OptimizerKind::kAdaGrad;
  if (name == "pathsgd") return OptimizerKind::kPathSgd;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd, adagrad or pathsgd)");
}

OptimizerState make_optimizer(OptimizerKind kind, double step_size, std::size_t num_edges, double p,
                              double epsilon) {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("step size must be positive and finite");
  if (!(p >= 1.0)) throw ConfigError("p must be >= 1");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  OptimizerState state;
  state.kind = kind;
  state.step_size = step_size;
  state.p = p;
  state.epsilon = epsilon;
  if (kind == OptimizerKind::kAdaGrad) state.adagrad_accum.assign(num_edges, 0.0);
  return state;
}

WeightVector sgd_step(const OptimizerState& state, std::span<const double> w, std::span<const double> grad) {
  check_grad(w, grad);
  WeightVector out(w.size());
  const double eta = state.step_size;
  for (std::size_t e = 0; e < w.size(); ++e) out[e] = w[e] - eta * grad[e];
  return out;
}

WeightVector adagrad_step(OptimizerState& state, std::span<const double> w, std::span<const double> grad) {
  check_grad(w, grad);
  if (state.adagrad_accum.size() != w.size()) state.adagrad_accum.assign(w.size(), 0.0);
  WeightVector out(w.size());
  const double eta = state.step_size;
  for (std::size_t e = 0; e < w.size(); ++e) {
    state.adagrad_accum[e] += grad[e] * grad[e];
    const double denom = std::sqrt(state.adagrad_accum[e] + state.epsilon);
    out[e] = denom > 0.0 ? w[e] - eta * grad[e] / denom : w[e];
  }
  ++state.steps;
  return out;
}

WeightVector pathsgd_step(const NetworkGraph& g, const LevelSets& levels, OptimizerState& state,
                          std::span<const double> w, std::span<const double> grad) {
  check_grad(w, grad);
  const PathScalars scalars = compute_gamma(g, levels, w, state.p);
  WeightVector out(w.size());
  const double eta = state.step_size;
  std::size_t clamped = 0;
  for (std::size_t e = 0; e < w.size(); ++e) {
    double gamma = scalars.gamma_edge[e];
    // only an exactly-zero gamma is replaced; any positive floor would
    // break rescaling invariance for legitimately tiny gammas
    if (gamma == 0.0) {
      gamma = state.epsilon;
      ++clamped;
    }
    out[e] = w[e] - eta * grad[e] / gamma;
  }
  state.last_clamped_edges = clamped;
  state.clamped_edges += clamped;
  ++state.steps;
  return out;
}

void apply_step(const NetworkGraph& g, const LevelSets& levels, OptimizerState& state, WeightVector& w,
                std::span<const double> grad) {
  switch (state.kind) {
    case OptimizerKind::kSgd:
      w = sgd_step(state, w, grad);
      ++state.steps;
      break;
    case OptimizerKind::kAdaGrad:
      w = adagrad_step(state, w, grad);
      break;
    case OptimizerKind::kPathSgd:
      w = pathsgd_step(g, levels, state, w, grad);
      break;
  }
}

}  // namespace pathnorm
