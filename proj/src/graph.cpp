#include "pathnorm/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

#include "pathnorm/error.hpp"

namespace pathnorm {

namespace {

std::string node_str(NodeId v) { return "node " + std::to_string(v); }

void fill_csr(std::size_t num_nodes, std::span<const Edge> edges, bool by_target,
              std::vector<std::size_t>& offsets, std::vector<EdgeId>& ids) {
  offsets.assign(num_nodes + 1, 0);
  for (const Edge& e : edges) ++offsets[(by_target ? e.target : e.source) + 1];
  for (std::size_t v = 0; v < num_nodes; ++v) offsets[v + 1] += offsets[v];
  ids.resize(edges.size());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (EdgeId e = 0; e < edges.size(); ++e) {
    const NodeId key = by_target ? edges[e].target : edges[e].source;
    ids[cursor[key]++] = e;
  }
}

}  // namespace

NetworkGraph NetworkGraph::from_edges(std::size_t num_nodes, std::vector<NodeId> inputs,
                                      std::vector<NodeId> outputs,
                                      std::span<const std::pair<NodeId, NodeId>> edges) {
  if (num_nodes == 0) throw ConfigError("graph must have at least one node");
  if (inputs.empty()) throw ConfigError("graph must have at least one input node");
  if (outputs.empty()) throw ConfigError("graph must have at least one output node");

  NetworkGraph g;
  g.num_nodes_ = num_nodes;
  g.role_.assign(num_nodes, Role::kHidden);
  std::vector<bool> seen(num_nodes, false);
  for (NodeId v : inputs) {
    if (v >= num_nodes) throw ConfigError("input id out of range: " + std::to_string(v));
    if (seen[v]) throw ConfigError("duplicate input/output id: " + std::to_string(v));
    seen[v] = true;
    g.role_[v] = Role::kInput;
  }
  for (NodeId v : outputs) {
    if (v >= num_nodes) throw ConfigError("output id out of range: " + std::to_string(v));
    if (seen[v]) throw ConfigError("duplicate input/output id: " + std::to_string(v));
    seen[v] = true;
    g.role_[v] = Role::kOutput;
  }

  std::vector<std::pair<NodeId, NodeId>> sorted(edges.begin(), edges.end());
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
    throw StructuralError("duplicate edge " + std::to_string(dup->first) + " -> " +
                          std::to_string(dup->second));
  }

  std::vector<std::vector<NodeId>> succ(num_nodes), pred(num_nodes);
  for (auto [s, t] : sorted) {
    if (s >= num_nodes || t >= num_nodes) {
      throw ConfigError("edge endpoint out of range: " + std::to_string(s) + " -> " +
                        std::to_string(t));
    }
    if (g.role_[t] == Role::kInput) throw StructuralError("input " + node_str(t) + " has an incoming edge");
    if (g.role_[s] == Role::kOutput) throw StructuralError("output " + node_str(s) + " has an outgoing edge");
    succ[s].push_back(t);
    pred[t].push_back(s);
  }

  // Kahn's algorithm, smallest ready id first.
  std::vector<std::size_t> indeg(num_nodes);
  for (NodeId v = 0; v < num_nodes; ++v) indeg[v] = pred[v].size();
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId v = 0; v < num_nodes; ++v)
    if (indeg[v] == 0) ready.push(v);
  while (!ready.empty()) {
    const NodeId v = ready.top();
    ready.pop();
    g.topo_.push_back(v);
    for (NodeId t : succ[v])
      if (--indeg[t] == 0) ready.push(t);
  }
  if (g.topo_.size() != num_nodes) throw StructuralError("graph contains a directed cycle");

  // Every node must be reachable from an input and reach an output.
  std::vector<bool> from_input(num_nodes, false), to_output(num_nodes, false);
  for (NodeId v : g.topo_) {
    if (g.role_[v] == Role::kInput) from_input[v] = true;
    for (NodeId u : pred[v]) from_input[v] = from_input[v] || from_input[u];
  }
  for (auto it = g.topo_.rbegin(); it != g.topo_.rend(); ++it) {
    const NodeId v = *it;
    if (g.role_[v] == Role::kOutput) to_output[v] = true;
    for (NodeId t : succ[v]) to_output[v] = to_output[v] || to_output[t];
  }
  for (NodeId v = 0; v < num_nodes; ++v) {
    if (!from_input[v] || !to_output[v]) {
      throw StructuralError(node_str(v) + " does not lie on any input-to-output path");
    }
  }

  std::vector<std::size_t> pos(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) pos[g.topo_[i]] = i;
  g.edges_.reserve(sorted.size());
  for (auto [s, t] : sorted) g.edges_.push_back({s, t});
  std::sort(g.edges_.begin(), g.edges_.end(), [&](const Edge& a, const Edge& b) {
    return std::pair(pos[a.source], pos[a.target]) < std::pair(pos[b.source], pos[b.target]);
  });
  fill_csr(num_nodes, g.edges_, true, g.in_offsets_, g.in_edge_ids_);
  fill_csr(num_nodes, g.edges_, false, g.out_offsets_, g.out_edge_ids_);

  std::vector<std::size_t> longest(num_nodes, 0);
  for (NodeId v : g.topo_) {
    for (EdgeId e : g.in_edges(v)) longest[v] = std::max(longest[v], longest[g.edges_[e].source] + 1);
    g.depth_ = std::max(g.depth_, longest[v]);
  }

  g.inputs_ = std::move(inputs);
  g.outputs_ = std::move(outputs);
  for (NodeId v : g.topo_)
    if (g.role_[v] == Role::kHidden) g.hidden_.push_back(v);
  return g;
}

NetworkGraph build_layered(std::span<const std::size_t> layer_sizes) {
  if (layer_sizes.size() < 2) throw ConfigError("a layered network needs at least two layers");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw ConfigError("layer sizes must be positive");

  std::vector<std::size_t> first(layer_sizes.size() + 1, 0);
  for (std::size_t l = 0; l < layer_sizes.size(); ++l) first[l + 1] = first[l] + layer_sizes[l];

  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    for (NodeId u = first[l]; u < first[l + 1]; ++u)
      for (NodeId v = first[l + 1]; v < first[l + 2]; ++v) edges.emplace_back(u, v);

  std::vector<NodeId> inputs, outputs;
  for (NodeId v = first[0]; v < first[1]; ++v) inputs.push_back(v);
  const std::size_t last = layer_sizes.size() - 1;
  for (NodeId v = first[last]; v < first[last + 1]; ++v) outputs.push_back(v);
  return NetworkGraph::from_edges(first.back(), std::move(inputs), std::move(outputs), edges);
}

LevelSets compute_levels(const NetworkGraph& g) {
  const std::size_t n = g.num_nodes();
  LevelSets levels;
  levels.in_level_of.assign(n, 0);
  levels.out_level_of.assign(n, 0);

  std::vector<bool> visited(n, false);
  for (NodeId v : g.topological_order()) {
    for (EdgeId e : g.in_edges(v)) {
      const NodeId u = g.edge(e).source;
      if (!visited[u]) throw StructuralError("cycle detected: predecessor of " + node_str(v) + " not yet visited");
      levels.in_level_of[v] = std::max(levels.in_level_of[v], levels.in_level_of[u] + 1);
    }
    visited[v] = true;
  }
  std::fill(visited.begin(), visited.end(), false);
  const auto topo = g.topological_order();
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const NodeId v = *it;
    for (EdgeId e : g.out_edges(v)) {
      const NodeId t = g.edge(e).target;
      if (!visited[t]) throw StructuralError("cycle detected: successor of " + node_str(v) + " not yet visited");
      levels.out_level_of[v] = std::max(levels.out_level_of[v], levels.out_level_of[t] + 1);
    }
    visited[v] = true;
  }

  levels.in_levels.assign(g.depth() + 1, {});
  levels.out_levels.assign(g.depth() + 1, {});
  for (NodeId v : topo) {
    levels.in_levels[levels.in_level_of[v]].push_back(v);
    levels.out_levels[levels.out_level_of[v]].push_back(v);
  }
  return levels;
}

std::uint64_t count_paths(const NetworkGraph& g) {
  std::vector<std::uint64_t> paths(g.num_nodes(), 0);
  for (NodeId v : g.inputs()) paths[v] = 1;
  std::uint64_t total = 0;
  for (NodeId v : g.topological_order()) {
    for (EdgeId e : g.in_edges(v)) {
      if (__builtin_add_overflow(paths[v], paths[g.edge(e).source], &paths[v]))
        throw NumericError("path count overflows 64 bits at " + node_str(v));
    }
    if (g.is_output(v) && __builtin_add_overflow(total, paths[v], &total))
      throw NumericError("path count overflows 64 bits");
  }
  return total;
}

bool is_graded(const NetworkGraph& g, const LevelSets& levels) {
  for (const Edge& e : g.edges())
    if (levels.in_level_of[e.target] != levels.in_level_of[e.source] + 1) return false;
  for (NodeId v : g.outputs())
    if (levels.in_level_of[v] != g.depth()) return false;
  return true;
}

std::vector<std::size_t> parse_arch(std::string_view text) {
  std::vector<std::size_t> sizes;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('x', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view tok = text.substr(start, end - start);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
      throw ConfigError("bad architecture string '" + std::string(text) + "'");
    sizes.push_back(value);
    start = end + 1;
  }
  if (sizes.size() < 2) throw ConfigError("architecture needs at least two layers: '" + std::string(text) + "'");
  for (std::size_t s : sizes)
    if (s == 0) throw ConfigError("layer sizes must be positive: '" + std::string(text) + "'");
  return sizes;
}

std::string format_arch(std::span<const std::size_t> layer_sizes) {
  std::string out;
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(layer_sizes[i]);
  }
  return out;
}

NetworkGraph read_graph(std::istream& in) {
  std::string line;
  std::size_t offset = 0;
  bool have_header = false;
  std::size_t num_nodes = 0;
  std::vector<NodeId> inputs, outputs;
  std::vector<std::pair<NodeId, NodeId>> edges;

  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word) || word[0] == '#') continue;

    if (!have_header) {
      if (word != "nodes" || !(ss >> num_nodes)) throw ParseError("expected 'nodes N' header", line_offset);
      if (!(ss >> word) || word != "inputs") throw ParseError("expected 'inputs' in header", line_offset);
      std::vector<NodeId>* target = &inputs;
      while (ss >> word) {
        if (word == "outputs") {
          if (target == &outputs) throw ParseError("repeated 'outputs' keyword", line_offset);
          target = &outputs;
          continue;
        }
        NodeId id = 0;
        auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), id);
        if (ec != std::errc() || ptr != word.data() + word.size())
          throw ParseError("bad node id '" + word + "'", line_offset);
        target->push_back(id);
      }
      if (target != &outputs) throw ParseError("expected 'outputs' in header", line_offset);
      have_header = true;
      continue;
    }

    NodeId s = 0, t = 0;
    std::string rest;
    if (word != "edge" || !(ss >> s >> t) || (ss >> rest))
      throw ParseError("expected 'edge <src> <dst>'", line_offset);
    edges.emplace_back(s, t);
  }
  if (!have_header) throw ParseError("missing 'nodes' header", offset);
  return NetworkGraph::from_edges(num_nodes, std::move(inputs), std::move(outputs), edges);
}

NetworkGraph read_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open graph file " + path.string());
  return read_graph(in);
}

void write_graph(std::ostream& out, const NetworkGraph& g) {
  out << "nodes " << g.num_nodes() << " inputs";
  for (NodeId v : g.inputs()) out << ' ' << v;
  out << " outputs";
  for (NodeId v : g.outputs()) out << ' ' << v;
  out << '\n';
  for (const Edge& e : g.edges()) out << "edge " << e.source << ' ' << e.target << '\n';
}

WeightVector read_weights(std::istream& in, const NetworkGraph& g) {
  WeightVector w;
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::getline(in, tok);
      continue;
    }
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw InputError("bad weight value '" + tok + "'");
    w.push_back(value);
  }
  check_weights(g, w);
  return w;
}

WeightVector read_weights_file(const std::filesystem::path& path, const NetworkGraph& g) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weights file " + path.string());
  return read_weights(in, g);
}

void write_weights(std::ostream& out, std::span<const double> w) {
  char buf[32];
  for (double x : w) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out << buf << '\n';
  }
}

void check_weights(const NetworkGraph& g, std::span<const double> w) {
  if (w.size() != g.num_edges()) {
    throw InputError("weight vector has " + std::to_string(w.size()) + " entries, graph has " +
                     std::to_string(g.num_edges()) + " edges");
  }
  for (EdgeId e = 0; e < w.size(); ++e)
    if (!std::isfinite(w[e])) throw InputError("weight of edge " + std::to_string(e) + " is not finite");
}

}  // namespace pathnorm
