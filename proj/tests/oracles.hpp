#pragma once

// Test-only reference implementations. Nothing here calls the library's
// DP, gamma or backprop code paths; they enumerate or perturb directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "pathnorm/graph.hpp"
#include "pathnorm/network.hpp"

namespace oracle {

using pathnorm::EdgeId;
using pathnorm::NetworkGraph;
using pathnorm::NodeId;

/// All input-to-output paths as edge-id lists, by plain recursion.
inline void extend_paths(const NetworkGraph& g, NodeId v, std::vector<EdgeId>& prefix,
                         std::vector<std::vector<EdgeId>>& out) {
  if (g.is_output(v)) {
    out.push_back(prefix);
    return;
  }
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    if (g.edge(e).source != v) continue;
    prefix.push_back(e);
    extend_paths(g, g.edge(e).target, prefix, out);
    prefix.pop_back();
  }
}

inline std::vector<std::vector<EdgeId>> enumerate_paths(const NetworkGraph& g) {
  std::vector<std::vector<EdgeId>> out;
  std::vector<EdgeId> prefix;
  for (NodeId in : g.inputs()) extend_paths(g, in, prefix, out);
  return out;
}

inline double path_norm(const NetworkGraph& g, const std::vector<double>& w, double p) {
  double s = 0.0;
  for (const auto& path : enumerate_paths(g)) {
    double prod = 1.0;
    for (EdgeId e : path) prod *= w[e];
    s += std::pow(std::abs(prod), p);
  }
  return std::pow(s, 1.0 / p);
}

/// gamma_p(w, e): over paths through e, the product of |w|^p on the other
/// edges, summed, raised to 2/p.
inline double gamma(const NetworkGraph& g, const std::vector<double>& w, double p, EdgeId e) {
  double s = 0.0;
  for (const auto& path : enumerate_paths(g)) {
    if (std::find(path.begin(), path.end(), e) == path.end()) continue;
    double prod = 1.0;
    for (EdgeId k : path)
      if (k != e) prod *= std::pow(std::abs(w[k]), p);
    s += prod;
  }
  return std::pow(s, 2.0 / p);
}

/// Node values by repeated relaxation in node-id-independent order: every
/// pass recomputes every node from its predecessors until nothing changes.
inline std::vector<double> pre_activations(const NetworkGraph& g, const std::vector<double>& w,
                                           const std::vector<double>& x) {
  const std::size_t n = g.num_nodes();
  std::vector<double> pre(n, 0.0), val(n, 0.0);
  for (std::size_t j = 0; j < g.inputs().size(); ++j) val[g.inputs()[j]] = pre[g.inputs()[j]] = x[j];
  for (std::size_t pass = 0; pass <= g.depth(); ++pass) {
    for (NodeId v = 0; v < n; ++v) {
      if (g.is_input(v)) continue;
      double s = 0.0;
      for (EdgeId e = 0; e < g.num_edges(); ++e)
        if (g.edge(e).target == v) s += w[e] * val[g.edge(e).source];
      pre[v] = s;
      val[v] = g.is_output(v) ? s : std::max(0.0, s);
    }
  }
  return pre;
}

inline double mean_cross_entropy(const NetworkGraph& g, const std::vector<double>& w,
                                 const std::vector<std::vector<double>>& xs, const std::vector<std::size_t>& ys) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto pre = pre_activations(g, w, xs[i]);
    double m = -INFINITY;
    for (NodeId o : g.outputs()) m = std::max(m, pre[o]);
    double z = 0.0;
    for (NodeId o : g.outputs()) z += std::exp(pre[o] - m);
    total += std::log(z) + m - pre[g.outputs()[ys[i]]];
  }
  return total / static_cast<double>(xs.size());
}

inline std::vector<double> central_differences(const NetworkGraph& g, std::vector<double> w,
                                               const std::vector<std::vector<double>>& xs,
                                               const std::vector<std::size_t>& ys, double h) {
  std::vector<double> grad(w.size());
  for (std::size_t e = 0; e < w.size(); ++e) {
    const double orig = w[e];
    w[e] = orig + h;
    const double up = mean_cross_entropy(g, w, xs, ys);
    w[e] = orig - h;
    const double down = mean_cross_entropy(g, w, xs, ys);
    w[e] = orig;
    grad[e] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// Smallest |pre-activation| over hidden units for the given inputs.
inline double min_hidden_margin(const NetworkGraph& g, const std::vector<double>& w,
                                const std::vector<std::vector<double>>& xs) {
  double m = INFINITY;
  for (const auto& x : xs) {
    const auto pre = pre_activations(g, w, x);
    for (NodeId v : g.hidden()) m = std::min(m, std::abs(pre[v]));
  }
  return m;
}

/// Random valid DAG with at most `max_edges` edges: nodes 0..n-1 with the
/// first `n_in` as inputs and the last `n_out` as outputs; edges only go from
/// lower to higher ids.
inline NetworkGraph random_dag(std::mt19937_64& rng, std::size_t max_edges = 12) {
  for (;;) {
    const std::size_t n_in = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
    const std::size_t n_out = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
    const std::size_t n_hidden = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
    const std::size_t n = n_in + n_hidden + n_out;
    auto is_out = [&](NodeId v) { return v >= n - n_out; };
    std::set<std::pair<NodeId, NodeId>> edges;
    for (NodeId v = n_in; v < n; ++v) {
      std::vector<NodeId> cand;
      for (NodeId u = 0; u < v; ++u)
        if (!is_out(u)) cand.push_back(u);
      edges.emplace(cand[std::uniform_int_distribution<std::size_t>(0, cand.size() - 1)(rng)], v);
    }
    for (NodeId u = 0; u < n - n_out; ++u) {
      bool has_out = false;
      for (const auto& [s, t] : edges) has_out = has_out || s == u;
      if (has_out) continue;
      const NodeId lo = std::max<NodeId>(u + 1, n_in);
      edges.emplace(u, std::uniform_int_distribution<NodeId>(lo, n - 1)(rng));
    }
    const std::size_t extra = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
    for (std::size_t i = 0; i < extra && edges.size() < max_edges; ++i) {
      const NodeId u = std::uniform_int_distribution<NodeId>(0, n - n_out - 1)(rng);
      const NodeId lo = std::max<NodeId>(u + 1, n_in);
      edges.emplace(u, std::uniform_int_distribution<NodeId>(lo, n - 1)(rng));
    }
    if (edges.size() > max_edges) continue;
    std::vector<NodeId> inputs, outputs;
    for (NodeId v = 0; v < n_in; ++v) inputs.push_back(v);
    for (NodeId v = n - n_out; v < n; ++v) outputs.push_back(v);
    std::vector<std::pair<NodeId, NodeId>> list(edges.begin(), edges.end());
    std::shuffle(list.begin(), list.end(), rng);
    return NetworkGraph::from_edges(n, inputs, outputs, list);
  }
}

inline std::vector<double> uniform_weights(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> w(n);
  for (double& x : w) x = d(rng);
  return w;
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace oracle
