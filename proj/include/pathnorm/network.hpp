#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pathnorm/graph.hpp"

namespace pathnorm {

/// Rectifier used on every hidden unit. Output units are left linear.
inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

/// Non-owning view of B examples. `inputs` is row-major B x D.
struct BatchView {
  std::span<const double> inputs;
  std::span<const std::size_t> labels;
  std::size_t dim = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return inputs.subspan(i * dim, dim); }
  BatchView slice(std::size_t first, std::size_t count) const {
    return {inputs.subspan(first * dim, count * dim), labels.subspan(first, count), dim};
  }
};

struct LossReport {
  double loss = 0.0;            // mean softmax cross-entropy
  double zero_one_error = 0.0;  // fraction of examples whose argmax is wrong
};

/// Per-call knobs for hidden units. `retained` is indexed by node id and may
/// be empty (no dropout); a zero entry silences that hidden unit in both the
/// forward and the backward pass. `hidden_scale` multiplies every hidden
/// activation (inference-time dropout compensation).
struct ForwardOptions {
  std::span<const std::uint8_t> retained = {};
  double hidden_scale = 1.0;
};

/// Output scores (pre-softmax) for a single input row of D values.
std::vector<double> forward(const NetworkGraph& g, std::span<const double> w,
                            std::span<const double> x, const ForwardOptions& opts = {});

/// Output scores for every row of `inputs` (row-major B x D); result is B x C.
std::vector<double> forward_batch(const NetworkGraph& g, std::span<const double> w,
                                  std::span<const double> inputs, std::size_t batch_size,
                                  const ForwardOptions& opts = {});

struct LossAndGradient {
  LossReport report;
  std::vector<double> gradient;  // d(mean loss)/dw, one entry per edge
};

/// Mean cross-entropy of softmax(outputs) over the batch and its gradient by
/// reverse accumulation. The RELU derivative at exactly zero is taken as 0.
LossAndGradient loss_and_grad(const NetworkGraph& g, std::span<const double> w,
                              const BatchView& batch, const ForwardOptions& opts = {});

/// Loss only, no gradient.
LossReport batch_loss(const NetworkGraph& g, std::span<const double> w, const BatchView& batch,
                      const ForwardOptions& opts = {});

/// Streams `data` through the network in chunks and averages loss and 0/1 error.
LossReport evaluate(const NetworkGraph& g, std::span<const double> w, const BatchView& data,
                    const ForwardOptions& opts = {}, std::size_t chunk = 500);

}  // namespace pathnorm
