#include "pathnorm/init.hpp"

#include <cmath>
#include <random>

#include "pathnorm/error.hpp"

namespace pathnorm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_retain_prob(double retain_prob) {
  if (!(retain_prob > 0.0 && retain_prob <= 1.0))
    throw ConfigError("dropout retain probability must be in (0, 1], got " + std::to_string(retain_prob));
}

}  // namespace

WeightVector init_balanced(const NetworkGraph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  WeightVector w(g.num_edges());
  for (EdgeId e = 0; e < w.size(); ++e) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(g.fan_in(g.edge(e).target)));
    w[e] = stddev * unit(rng);
  }
  return w;
}

WeightVector init_unbalanced(const NetworkGraph& g, std::uint64_t seed, std::size_t k, std::uint64_t unbalance_seed,
                             const UnbalanceParams& params) {
  return unbalance(g, init_balanced(g, seed), k, unbalance_seed, params);
}

double counter_uniform(std::uint64_t seed, std::uint64_t step, std::uint64_t unit) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ step) ^ unit);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

DropoutMask draw_dropout_mask(const NetworkGraph& g, double retain_prob, std::uint64_t seed, std::uint64_t step) {
  check_retain_prob(retain_prob);
  DropoutMask mask{std::vector<std::uint8_t>(g.num_nodes(), 1), retain_prob};
  if (retain_prob == 1.0) return mask;
  for (NodeId v : g.hidden()) mask.retained[v] = counter_uniform(seed, step, v) < retain_prob ? 1 : 0;
  return mask;
}

ForwardOptions training_options(const DropoutMask& mask) {
  check_retain_prob(mask.retain_prob);
  return {mask.retained, 1.0};
}

ForwardOptions inference_options(double retain_prob) {
  check_retain_prob(retain_prob);
  return {{}, retain_prob};
}

LossAndGradient apply_dropout(const DropoutMask& mask, const NetworkGraph& g, std::span<const double> w,
                              const BatchView& batch) {
  return loss_and_grad(g, w, batch, training_options(mask));
}

}  // namespace pathnorm
