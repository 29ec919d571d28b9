#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pathnorm/graph.hpp"

namespace pathnorm {

/// Multiply every incoming edge of a hidden `node` by `c` and divide every
/// outgoing edge by `c`. For RELU networks and c > 0 this leaves the
/// computed function unchanged.
struct RescalingOp {
  NodeId node = 0;
  double c = 1.0;
};

using RescalingPlan = std::vector<RescalingOp>;

/// Throws ConfigError for c <= 0 (or non-finite) and for input/output nodes.
void validate_op(const NetworkGraph& g, const RescalingOp& op);

void apply_rescaling_inplace(const NetworkGraph& g, std::span<double> w, const RescalingOp& op);
WeightVector apply_rescaling(const NetworkGraph& g, std::span<const double> w, const RescalingOp& op);
WeightVector apply_plan(const NetworkGraph& g, std::span<const double> w, const RescalingPlan& plan);

/// Ops with reciprocal scales in reverse order.
RescalingPlan inverse_plan(const RescalingPlan& plan);

/// `n_ops` ops on hidden nodes drawn uniformly, scales log-uniform in
/// [c_min, c_max]. Empty when the graph has no hidden units.
RescalingPlan random_plan(const NetworkGraph& g, std::size_t n_ops, double c_min, double c_max,
                          std::uint64_t seed);

struct EquivalenceReport {
  enum class Method { kPathVector, kEdgeAggregates };

  bool equivalent = false;
  double max_deviation = 0.0;
  Method method = Method::kPathVector;
};

/// Compares path vectors: deviation = max|pi(w1) - pi(w2)| / (1 + max|pi(w1)|).
///
/// Graphs with more than `bruteforce_limit` paths are compared through
/// per-edge DP aggregates instead: for each edge the signed sum and the sum
/// of squares of the path products through that edge, normalized the same
/// way. Both are necessary conditions only: equivalent weights always pass,
/// but weights with zeros or sign flips can pass without being reachable by
/// rescalings.
EquivalenceReport check_rescaling_equivalent(const NetworkGraph& g, std::span<const double> w1,
                                             std::span<const double> w2, double tol,
                                             std::uint64_t bruteforce_limit = 100'000);

struct UnbalanceParams {
  double lognormal_mu = 0.0;     // mean of the underlying normal
  double lognormal_sigma = 1.0;  // std of the underlying normal
  double multiplier = 10.0;      // each op scales by multiplier * c
};

/// Draws `k` hidden units uniformly with replacement; for each, applies the
/// rescaling by multiplier * c with c ~ LogNormal(mu, sigma).
WeightVector unbalance(const NetworkGraph& g, std::span<const double> w, std::size_t k,
                       std::uint64_t seed, const UnbalanceParams& params = {});

/// The plan `unbalance` would apply; exposed for tests and diagnostics.
RescalingPlan unbalance_plan(const NetworkGraph& g, std::size_t k, std::uint64_t seed,
                             const UnbalanceParams& params = {});

struct BalanceResult {
  WeightVector weights;   // rescaling-equivalent to the input
  double value = 0.0;     // mu_{p,inf}(weights)^depth
  std::size_t sweeps = 0;
  double residual = 0.0;  // largest log-scale change in the final sweep
};

/// Minimizes mu_{p,inf}(w~)^d over rescalings w~ of `w` by coordinate
/// descent on one log-scale per hidden unit. Each coordinate step moves the
/// unit's scale to where its incoming norm equals the largest incoming norm
/// among its successors; at the fixed point every unit carries the same norm.
///
/// Requires a graded graph with a single output unit and nonzero weights
/// (ConfigError / InputError otherwise). Throws ConvergenceError after
/// `max_sweeps` sweeps without the change dropping below `tol`.
BalanceResult balance_oracle(const NetworkGraph& g, std::span<const double> w, double p,
                             std::size_t max_sweeps = 100'000, double tol = 1e-12);

}  // namespace pathnorm
