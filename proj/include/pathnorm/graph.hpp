#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pathnorm {

using NodeId = std::size_t;
using EdgeId = std::size_t;

/// The optimization variable: one real weight per edge, indexed by edge id.
using WeightVector = std::vector<double>;

struct Edge {
  NodeId source;
  NodeId target;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable DAG topology of a feedforward network.
///
/// Edge ids are dense and canonical: edges are sorted by the topological
/// position of their source, then of their target, where the topological
/// order is Kahn's algorithm breaking ties by smallest node id. The same
/// edge set therefore always yields the same edge numbering regardless of
/// the order it was supplied in.
class NetworkGraph {
 public:
  /// Validates and builds a graph. Throws StructuralError on cycles,
  /// duplicate edges, dead nodes, inputs with incoming edges or outputs
  /// with outgoing edges; ConfigError on out-of-range ids.
  static NetworkGraph from_edges(std::size_t num_nodes, std::vector<NodeId> inputs,
                                 std::vector<NodeId> outputs,
                                 std::span<const std::pair<NodeId, NodeId>> edges);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  std::span<const Edge> edges() const noexcept { return edges_; }

  std::span<const NodeId> inputs() const noexcept { return inputs_; }
  std::span<const NodeId> outputs() const noexcept { return outputs_; }
  /// Nodes that are neither inputs nor outputs, in topological order.
  std::span<const NodeId> hidden() const noexcept { return hidden_; }
  std::span<const NodeId> topological_order() const noexcept { return topo_; }

  std::span<const EdgeId> in_edges(NodeId v) const {
    return {in_edge_ids_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
  }
  std::span<const EdgeId> out_edges(NodeId v) const {
    return {out_edge_ids_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
  }
  std::size_t fan_in(NodeId v) const { return in_offsets_[v + 1] - in_offsets_[v]; }

  bool is_input(NodeId v) const { return role_[v] == Role::kInput; }
  bool is_output(NodeId v) const { return role_[v] == Role::kOutput; }
  bool is_hidden(NodeId v) const { return role_[v] == Role::kHidden; }

  /// Number of edges on the longest directed path.
  std::size_t depth() const noexcept { return depth_; }

  friend bool operator==(const NetworkGraph& a, const NetworkGraph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.inputs_ == b.inputs_ &&
           a.outputs_ == b.outputs_ && a.edges_ == b.edges_;
  }

 private:
  enum class Role : std::uint8_t { kInput, kHidden, kOutput };

  std::size_t num_nodes_ = 0;
  std::vector<NodeId> inputs_;
  std::vector<NodeId> outputs_;
  std::vector<NodeId> hidden_;
  std::vector<NodeId> topo_;
  std::vector<Role> role_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> in_offsets_, out_offsets_;
  std::vector<EdgeId> in_edge_ids_, out_edge_ids_;
  std::size_t depth_ = 0;
};

/// Longest-path level sets. `in_levels[i]` holds the nodes whose longest
/// path from an input has i edges; `out_levels[i]` the same toward outputs.
struct LevelSets {
  std::vector<std::vector<NodeId>> in_levels;
  std::vector<std::vector<NodeId>> out_levels;
  std::vector<std::size_t> in_level_of;
  std::vector<std::size_t> out_level_of;
};

/// Fully connected layered network. Node ids are assigned layer by layer.
NetworkGraph build_layered(std::span<const std::size_t> layer_sizes);

LevelSets compute_levels(const NetworkGraph& g);

/// Exact number of input-to-output paths. Throws NumericError on uint64 overflow.
std::uint64_t count_paths(const NetworkGraph& g);

/// True when every input-to-output path has exactly depth() edges, i.e. the
/// in-level and out-level of every node add up to the depth.
bool is_graded(const NetworkGraph& g, const LevelSets& levels);

/// Parses the `784x4000x4000x10` shorthand.
std::vector<std::size_t> parse_arch(std::string_view text);
std::string format_arch(std::span<const std::size_t> layer_sizes);

/// Line-oriented graph description:
///   nodes N inputs <ids...> outputs <ids...>
///   edge <src> <dst>
///   ...
/// Blank lines and lines starting with '#' are ignored.
NetworkGraph read_graph(std::istream& in);
NetworkGraph read_graph_file(const std::filesystem::path& path);
void write_graph(std::ostream& out, const NetworkGraph& g);

/// Weights file: one value per line in canonical edge-id order.
WeightVector read_weights(std::istream& in, const NetworkGraph& g);
WeightVector read_weights_file(const std::filesystem::path& path, const NetworkGraph& g);
void write_weights(std::ostream& out, std::span<const double> w);

/// Throws InputError unless `w` has one finite entry per edge.
void check_weights(const NetworkGraph& g, std::span<const double> w);

}  // namespace pathnorm
