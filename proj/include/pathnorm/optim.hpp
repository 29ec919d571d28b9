#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathnorm/graph.hpp"

namespace pathnorm {

/// Per-node path sums and the per-edge Path-SGD scaling.
///
/// gamma_in(v)  = sum over input->v paths of prod |w|^p (1 on inputs)
/// gamma_out(v) = sum over v->output paths of prod |w|^p (1 on outputs)
/// gamma_edge(u->v) = gamma_in(u)^(2/p) * gamma_out(v)^(2/p)
struct PathScalars {
  std::vector<double> gamma_in;
  std::vector<double> gamma_out;
  std::vector<double> gamma_edge;
};

/// One forward sweep over the in-levels and one backward sweep over the
/// out-levels; cost is O(|E|) and independent of any batch size.
PathScalars compute_gamma(const NetworkGraph& g, const LevelSets& levels, std::span<const double> w, double p);

enum class OptimizerKind { kSgd, kAdaGrad, kPathSgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kSgd;
  double step_size = 0.01;
  double p = 2.0;          // Path-SGD only
  double epsilon = 1e-8;   // AdaGrad denominator guard; Path-SGD divisor when gamma is exactly 0
  std::vector<double> adagrad_accum;
  std::size_t steps = 0;
  std::size_t clamped_edges = 0;       // Path-SGD: edges with gamma == 0, summed over steps
  std::size_t last_clamped_edges = 0;  // same, for the most recent step
};

/// Validates hyper-parameters and sizes the AdaGrad accumulator.
OptimizerState make_optimizer(OptimizerKind kind, double step_size, std::size_t num_edges, double p = 2.0,
                              double epsilon = 1e-8);

/// w - step_size * grad
WeightVector sgd_step(const OptimizerState& state, std::span<const double> w, std::span<const double> grad);

/// accum += grad^2; w - step_size * grad / sqrt(accum + epsilon).
/// A coordinate with accum + epsilon == 0 is left unchanged.
WeightVector adagrad_step(OptimizerState& state, std::span<const double> w, std::span<const double> grad);

/// Every coordinate moves by -step_size * grad_e / gamma_e, with all gammas
/// taken from the same snapshot of `w`. An edge whose gamma is exactly 0 uses
/// epsilon instead and is counted in clamped_edges.
WeightVector pathsgd_step(const NetworkGraph& g, const LevelSets& levels, OptimizerState& state,
                          std::span<const double> w, std::span<const double> grad);

/// Dispatches on state.kind and overwrites `w`.
void apply_step(const NetworkGraph& g, const LevelSets& levels, OptimizerState& state, WeightVector& w,
                std::span<const double> grad);

}  // namespace pathnorm
