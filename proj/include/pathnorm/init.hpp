#pragma once

#include <cstdint>
#include <vector>

#include "pathnorm/graph.hpp"
#include "pathnorm/network.hpp"
#include "pathnorm/rescale.hpp"

namespace pathnorm {

/// Gaussian weights, each edge u->v with standard deviation 1/sqrt(fan-in(v)),
/// drawn in edge-id order from a generator seeded with `seed`.
WeightVector init_balanced(const NetworkGraph& g, std::uint64_t seed);

/// init_balanced(seed) followed by unbalance(k, unbalance_seed); the result
/// computes the same function as the balanced weights.
WeightVector init_unbalanced(const NetworkGraph& g, std::uint64_t seed, std::size_t k,
                             std::uint64_t unbalance_seed, const UnbalanceParams& params = {});

/// Unit-level dropout mask. `retained` is indexed by node id; inputs and
/// outputs are always retained.
struct DropoutMask {
  std::vector<std::uint8_t> retained;
  double retain_prob = 1.0;
};

/// Uniform [0,1) value that depends only on (seed, step, unit).
double counter_uniform(std::uint64_t seed, std::uint64_t step, std::uint64_t unit);

/// Each hidden unit is kept with probability `retain_prob`, decided by
/// counter_uniform(seed, step, unit). Throws ConfigError unless 0 < retain_prob <= 1.
DropoutMask draw_dropout_mask(const NetworkGraph& g, double retain_prob, std::uint64_t seed, std::uint64_t step);

/// Forward options for a training step under `mask`.
ForwardOptions training_options(const DropoutMask& mask);

/// Forward options for evaluation: no mask, hidden activations scaled by retain_prob.
ForwardOptions inference_options(double retain_prob);

/// loss_and_grad with the mask applied: dropped units output 0 and pass no gradient.
LossAndGradient apply_dropout(const DropoutMask& mask, const NetworkGraph& g, std::span<const double> w,
                              const BatchView& batch);

}  // namespace pathnorm
