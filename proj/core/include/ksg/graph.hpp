#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace ksg {

using VertexIndex = std::size_t;
using EdgeIndex = std::size_t;

struct EdgeSpec {
  std::string id;
  std::string from;
  std::string to;
  double length = 0.0;
};

struct Edge {
  std::string id;
  VertexIndex from = 0;  // i(e)
  VertexIndex to = 0;    // t(e)
  double length = 0.0;
};

/// One end of an edge as seen from a vertex. `at_start` is true for the
/// end at coordinate 0, i.e. the end sitting on i(e).
struct EdgeEnd {
  EdgeIndex edge = 0;
  bool at_start = true;
};

/// A point (e, xi) with 0 <= xi <= |e|.
struct EdgePoint {
  EdgeIndex edge = 0;
  double xi = 0.0;
};

/// Edge of the doubled graph: +e keeps the orientation of e, -e reverses it.
struct DirectedEdge {
  EdgeIndex edge = 0;
  bool forward = true;

  DirectedEdge reversed() const noexcept { return {edge, !forward}; }

  /// Dense id in [0, 2|E|): 2e for +e and 2e+1 for -e.
  std::size_t index() const noexcept { return 2 * edge + (forward ? 0 : 1); }
  static DirectedEdge from_index(std::size_t i) noexcept { return {i / 2, i % 2 == 0}; }

  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

/// Compact, connected, oriented metric graph. Immutable after construction.
///
/// Vertex and edge ids are opaque strings; internally everything is indexed
/// densely in declaration order. Self-loops and multi-edges are allowed, and
/// the degree of a vertex counts incident edge ends, so a loop contributes 2.
class MetricGraph {
 public:
  /// Validates and builds. Throws NonpositiveLength, UnknownVertex, Parse
  /// (duplicate ids, empty graph) or DisconnectedGraph.
  MetricGraph(std::vector<std::string> vertex_ids, const std::vector<EdgeSpec>& edges);

  std::size_t vertex_count() const noexcept { return vertex_ids_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t directed_edge_count() const noexcept { return 2 * edges_.size(); }

  const Edge& edge(EdgeIndex e) const;
  std::span<const Edge> edges() const noexcept { return edges_; }
  const std::string& vertex_id(VertexIndex v) const;
  std::span<const std::string> vertex_ids() const noexcept { return vertex_ids_; }

  VertexIndex vertex_index(std::string_view id) const;
  EdgeIndex edge_index(std::string_view id) const;

  std::size_t degree(VertexIndex v) const;
  std::span<const EdgeEnd> incidence(VertexIndex v) const;

  double length(EdgeIndex e) const { return edge(e).length; }
  double length(DirectedEdge d) const { return edge(d.edge).length; }
  double total_length() const noexcept { return total_length_; }
  double shortest_edge() const noexcept { return shortest_; }
  double longest_edge() const noexcept { return longest_; }
  std::size_t max_degree() const noexcept { return max_degree_; }

  /// i(d) and t(d) on the doubled graph; t(+-e) = i(-+e).
  VertexIndex initial(DirectedEdge d) const;
  VertexIndex terminal(DirectedEdge d) const;

  /// Metric diameter (longest shortest path between two points on the graph).
  double diameter() const;

  bool has_self_loop() const noexcept;

 private:
  std::vector<std::string> vertex_ids_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeEnd>> incidence_;
  std::unordered_map<std::string, VertexIndex> vertex_lookup_;
  std::unordered_map<std::string, EdgeIndex> edge_lookup_;
  double total_length_ = 0.0;
  double shortest_ = 0.0;
  double longest_ = 0.0;
  std::size_t max_degree_ = 0;
};

struct GraphParseOptions {
  // Unknown keys are rejected unless lenient, in which case they are
  // reported through `warnings`.
  bool lenient = false;
};

/// Parses the GraphSpec JSON format:
///   { "vertices": [ids...], "edges": [ {"id","from","to","length"}... ] }
MetricGraph parse_graph_json(std::string_view text, const GraphParseOptions& options = {},
                             std::vector<std::string>* warnings = nullptr);
MetricGraph load_graph_file(const std::string& path, const GraphParseOptions& options = {},
                            std::vector<std::string>* warnings = nullptr);

/// Scattering coefficient S_{e,e'}: 2/deg(t(e)) for transmission,
/// 2/deg(t(e)) - 1 for back-scattering onto -e, and 0 unless t(e) = i(e').
double scattering_coefficient(const MetricGraph& g, DirectedEdge from, DirectedEdge to);

/// Full 2|E| x 2|E| scattering matrix indexed by DirectedEdge::index().
Eigen::MatrixXd scattering_matrix(const MetricGraph& g);

struct Path {
  std::vector<DirectedEdge> edges;  // e_0 .. e_m
  double length = 0.0;              // sum of |e_k|, k < m
  double weight = 1.0;              // product of S_{e_k, e_{k+1}}

  std::size_t steps() const noexcept { return edges.empty() ? 0 : edges.size() - 1; }
};

inline constexpr std::uint64_t kDefaultPathBudget = 10'000'000;

/// Every chained path from `from` to `to` with |P| <= max_length, zero-weight
/// paths pruned, plus the m = 0 path when from == to. Output is sorted by
/// (|P|, directed-edge id sequence). Throws PathBudgetExceeded when the
/// depth-first search visits more than `budget` path prefixes.
std::vector<Path> enumerate_paths(const MetricGraph& g, DirectedEdge from, DirectedEdge to,
                                  double max_length,
                                  std::uint64_t budget = kDefaultPathBudget);

/// True if consecutive edges chain (t(e_k) = i(e_{k+1})) and the stored length
/// and weight match a recomputation.
bool is_valid_path(const MetricGraph& g, const Path& p, double tol = 1e-12);

}  // namespace ksg
