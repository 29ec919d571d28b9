#include "pathnorm/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pathnorm/error.hpp"

namespace pathnorm {

namespace {

// Node-major activations: act[v * B + b].
struct Activations {
  std::size_t batch = 0;
  std::vector<double> act;

  double* node(NodeId v) { return act.data() + v * batch; }
  const double* node(NodeId v) const { return act.data() + v * batch; }
};

void check_shapes(const NetworkGraph& g, std::span<const double> w, std::span<const double> inputs,
                  std::size_t batch_size) {
  if (w.size() != g.num_edges()) {
    throw InputError("weight vector has " + std::to_string(w.size()) + " entries, graph has " +
                     std::to_string(g.num_edges()) + " edges");
  }
  const std::size_t dim = g.inputs().size();
  if (inputs.size() != batch_size * dim) {
    throw InputError("expected " + std::to_string(batch_size) + " rows of " + std::to_string(dim) +
                     " inputs, got " + std::to_string(inputs.size()) + " values");
  }
}

void check_options(const NetworkGraph& g, const ForwardOptions& opts) {
  if (!opts.retained.empty() && opts.retained.size() != g.num_nodes())
    throw InputError("dropout mask must have one entry per node");
  if (!(opts.hidden_scale >= 0.0) || !std::isfinite(opts.hidden_scale))
    throw InputError("hidden_scale must be finite and non-negative");
}

Activations run_forward(const NetworkGraph& g, std::span<const double> w, std::span<const double> inputs,
                        std::size_t batch_size, const ForwardOptions& opts) {
  const std::size_t dim = g.inputs().size();
  Activations a{batch_size, std::vector<double>(g.num_nodes() * batch_size, 0.0)};

  for (std::size_t j = 0; j < dim; ++j) {
    double* dst = a.node(g.inputs()[j]);
    for (std::size_t b = 0; b < batch_size; ++b) dst[b] = inputs[b * dim + j];
  }

  for (NodeId v : g.topological_order()) {
    if (g.is_input(v)) continue;
    double* acc = a.node(v);
    for (EdgeId e : g.in_edges(v)) {
      const double we = w[e];
      if (we == 0.0) continue;
      const double* src = a.node(g.edge(e).source);
      for (std::size_t b = 0; b < batch_size; ++b) acc[b] += we * src[b];
    }
    if (g.is_hidden(v)) {
      if (!opts.retained.empty() && !opts.retained[v]) {
        std::fill(acc, acc + batch_size, 0.0);
        continue;
      }
      const double scale = opts.hidden_scale;
      for (std::size_t b = 0; b < batch_size; ++b) acc[b] = scale * relu(acc[b]);
    }
  }
  return a;
}

// Fills softmax probabilities into `probs` (B x C) and returns the loss report.
LossReport softmax_loss(const NetworkGraph& g, const Activations& a, const BatchView& batch,
                        std::vector<double>* probs) {
  const std::size_t classes = g.outputs().size();
  const std::size_t bsz = batch.size();
  if (probs) probs->assign(bsz * classes, 0.0);

  std::vector<double> scores(classes);
  double loss_sum = 0.0;
  std::size_t wrong = 0;
  for (std::size_t b = 0; b < bsz; ++b) {
    for (std::size_t c = 0; c < classes; ++c) {
      scores[c] = a.node(g.outputs()[c])[b];
      if (!std::isfinite(scores[c])) {
        throw NumericError("non-finite score at output node " + std::to_string(g.outputs()[c]) +
                           " for batch row " + std::to_string(b));
      }
    }
    const std::size_t label = batch.labels[b];
    const auto top = std::max_element(scores.begin(), scores.end());
    const double max_score = *top;
    // First maximal index wins ties, so an all-equal row counts as class 0.
    if (static_cast<std::size_t>(top - scores.begin()) != label) ++wrong;

    double denom = 0.0;
    for (double s : scores) denom += std::exp(s - max_score);
    const double log_denom = std::log(denom);
    loss_sum += log_denom - (scores[label] - max_score);
    if (probs) {
      for (std::size_t c = 0; c < classes; ++c)
        (*probs)[b * classes + c] = std::exp(scores[c] - max_score - log_denom);
    }
  }
  return {loss_sum / static_cast<double>(bsz), static_cast<double>(wrong) / static_cast<double>(bsz)};
}

void check_batch(const NetworkGraph& g, std::span<const double> w, const BatchView& batch) {
  if (batch.size() == 0) throw InputError("batch is empty");
  if (batch.dim != g.inputs().size()) {
    throw InputError("batch has dimension " + std::to_string(batch.dim) + ", network expects " +
                     std::to_string(g.inputs().size()));
  }
  const std::size_t classes = g.outputs().size();
  if (classes < 2) throw InputError("classification needs at least 2 output units");
  check_shapes(g, w, batch.inputs, batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch.labels[b] >= classes)
      throw InputError("label " + std::to_string(batch.labels[b]) + " out of range for " +
                       std::to_string(classes) + " classes");
  }
  for (std::size_t i = 0; i < batch.inputs.size(); ++i)
    if (!std::isfinite(batch.inputs[i])) throw InputError("non-finite input in batch row " + std::to_string(i / batch.dim));
}

}  // namespace

std::vector<double> forward_batch(const NetworkGraph& g, std::span<const double> w,
                                  std::span<const double> inputs, std::size_t batch_size,
                                  const ForwardOptions& opts) {
  check_shapes(g, w, inputs, batch_size);
  check_options(g, opts);
  const Activations a = run_forward(g, w, inputs, batch_size, opts);
  const std::size_t classes = g.outputs().size();
  std::vector<double> out(batch_size * classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double* src = a.node(g.outputs()[c]);
    for (std::size_t b = 0; b < batch_size; ++b) out[b * classes + c] = src[b];
  }
  return out;
}

std::vector<double> forward(const NetworkGraph& g, std::span<const double> w, std::span<const double> x,
                            const ForwardOptions& opts) {
  if (x.size() != g.inputs().size()) {
    throw InputError("input row has " + std::to_string(x.size()) + " entries, network expects " +
                     std::to_string(g.inputs().size()));
  }
  return forward_batch(g, w, x, 1, opts);
}

LossReport batch_loss(const NetworkGraph& g, std::span<const double> w, const BatchView& batch,
                      const ForwardOptions& opts) {
  check_batch(g, w, batch);
  check_options(g, opts);
  const Activations a = run_forward(g, w, batch.inputs, batch.size(), opts);
  return softmax_loss(g, a, batch, nullptr);
}

LossAndGradient loss_and_grad(const NetworkGraph& g, std::span<const double> w, const BatchView& batch,
                              const ForwardOptions& opts) {
  check_batch(g, w, batch);
  check_options(g, opts);
  const std::size_t bsz = batch.size();
  const Activations a = run_forward(g, w, batch.inputs, bsz, opts);

  std::vector<double> probs;
  LossAndGradient result;
  result.report = softmax_loss(g, a, batch, &probs);
  result.gradient.assign(g.num_edges(), 0.0);

  // delta[v * B + b] = d(mean loss) / d(pre-activation of v on row b)
  std::vector<double> delta(g.num_nodes() * bsz, 0.0);
  const std::size_t classes = g.outputs().size();
  const double inv_b = 1.0 / static_cast<double>(bsz);
  for (std::size_t c = 0; c < classes; ++c) {
    double* d = delta.data() + g.outputs()[c] * bsz;
    for (std::size_t b = 0; b < bsz; ++b)
      d[b] = (probs[b * classes + c] - (batch.labels[b] == c ? 1.0 : 0.0)) * inv_b;
  }

  const auto topo = g.topological_order();
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const NodeId v = *it;
    if (g.is_input(v)) continue;
    double* dv = delta.data() + v * bsz;
    if (g.is_hidden(v)) {
      for (EdgeId e : g.out_edges(v)) {
        const double we = w[e];
        if (we == 0.0) continue;
        const double* dt = delta.data() + g.edge(e).target * bsz;
        for (std::size_t b = 0; b < bsz; ++b) dv[b] += we * dt[b];
      }
      // act > 0 iff the unit was retained and its pre-activation was positive.
      const double* av = a.node(v);
      const double scale = opts.hidden_scale;
      for (std::size_t b = 0; b < bsz; ++b) dv[b] = av[b] > 0.0 ? dv[b] * scale : 0.0;
    }
    for (EdgeId e : g.in_edges(v)) {
      const double* src = a.node(g.edge(e).source);
      double s = 0.0;
      for (std::size_t b = 0; b < bsz; ++b) s += dv[b] * src[b];
      if (!std::isfinite(s)) throw NumericError("non-finite gradient on edge " + std::to_string(e));
      result.gradient[e] = s;
    }
  }
  return result;
}

LossReport evaluate(const NetworkGraph& g, std::span<const double> w, const BatchView& data,
                    const ForwardOptions& opts, std::size_t chunk) {
  if (data.size() == 0) throw InputError("cannot evaluate on an empty dataset");
  if (chunk == 0) throw ConfigError("evaluation chunk size must be positive");
  double loss_sum = 0.0, err_sum = 0.0;
  for (std::size_t first = 0; first < data.size(); first += chunk) {
    const std::size_t count = std::min(chunk, data.size() - first);
    const LossReport r = batch_loss(g, w, data.slice(first, count), opts);
    loss_sum += r.loss * static_cast<double>(count);
    err_sum += std::round(r.zero_one_error * static_cast<double>(count));
  }
  const double n = static_cast<double>(data.size());
  return {loss_sum / n, err_sum / n};
}

}  // namespace pathnorm
