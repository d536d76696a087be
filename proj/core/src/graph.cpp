#include "ksg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "ksg/error.hpp"

namespace ksg {

MetricGraph::MetricGraph(std::vector<std::string> vertex_ids, const std::vector<EdgeSpec>& edges)
    : vertex_ids_(std::move(vertex_ids)) {
  if (vertex_ids_.empty()) fail(ErrorKind::Parse, "graph has no vertices");
  if (edges.empty()) fail(ErrorKind::Parse, "graph has no edges");

  for (VertexIndex v = 0; v < vertex_ids_.size(); ++v) {
    if (!vertex_lookup_.emplace(vertex_ids_[v], v).second)
      fail(ErrorKind::Parse, "duplicate vertex id '" + vertex_ids_[v] + "'");
  }

  incidence_.resize(vertex_ids_.size());
  edges_.reserve(edges.size());
  shortest_ = std::numeric_limits<double>::infinity();
  for (const EdgeSpec& spec : edges) {
    if (!(spec.length > 0.0) || !std::isfinite(spec.length))
      fail(ErrorKind::NonpositiveLength,
           "edge '" + spec.id + "' has length " + std::to_string(spec.length));
    auto from = vertex_lookup_.find(spec.from);
    auto to = vertex_lookup_.find(spec.to);
    if (from == vertex_lookup_.end())
      fail(ErrorKind::UnknownVertex, "edge '" + spec.id + "' references '" + spec.from + "'");
    if (to == vertex_lookup_.end())
      fail(ErrorKind::UnknownVertex, "edge '" + spec.id + "' references '" + spec.to + "'");
    const EdgeIndex e = edges_.size();
    if (!edge_lookup_.emplace(spec.id, e).second)
      fail(ErrorKind::Parse, "duplicate edge id '" + spec.id + "'");
    edges_.push_back({spec.id, from->second, to->second, spec.length});
    incidence_[from->second].push_back({e, true});
    incidence_[to->second].push_back({e, false});
    total_length_ += spec.length;
    shortest_ = std::min(shortest_, spec.length);
    longest_ = std::max(longest_, spec.length);
  }

  for (VertexIndex v = 0; v < incidence_.size(); ++v) {
    if (incidence_[v].empty())
      fail(ErrorKind::DisconnectedGraph, "vertex '" + vertex_ids_[v] + "' is isolated");
    max_degree_ = std::max(max_degree_, incidence_[v].size());
  }

  std::vector<bool> seen(vertex_ids_.size(), false);
  std::vector<VertexIndex> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const VertexIndex v = stack.back();
    stack.pop_back();
    for (const EdgeEnd& end : incidence_[v]) {
      const Edge& e = edges_[end.edge];
      const VertexIndex w = end.at_start ? e.to : e.from;
      if (!seen[w]) {
        seen[w] = true;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  if (reached != vertex_ids_.size())
    fail(ErrorKind::DisconnectedGraph, "graph has " + std::to_string(vertex_ids_.size() - reached) +
                                           " vertices unreachable from '" + vertex_ids_[0] + "'");
}

const Edge& MetricGraph::edge(EdgeIndex e) const {
  if (e >= edges_.size()) fail(ErrorKind::UnknownEdge, "edge index " + std::to_string(e));
  return edges_[e];
}

const std::string& MetricGraph::vertex_id(VertexIndex v) const {
  if (v >= vertex_ids_.size()) fail(ErrorKind::UnknownVertex, "vertex index " + std::to_string(v));
  return vertex_ids_[v];
}

VertexIndex MetricGraph::vertex_index(std::string_view id) const {
  auto it = vertex_lookup_.find(std::string(id));
  if (it == vertex_lookup_.end()) fail(ErrorKind::UnknownVertex, std::string(id));
  return it->second;
}

EdgeIndex MetricGraph::edge_index(std::string_view id) const {
  auto it = edge_lookup_.find(std::string(id));
  if (it == edge_lookup_.end()) fail(ErrorKind::UnknownEdge, std::string(id));
  return it->second;
}

std::size_t MetricGraph::degree(VertexIndex v) const { return incidence(v).size(); }

std::span<const EdgeEnd> MetricGraph::incidence(VertexIndex v) const {
  if (v >= incidence_.size()) fail(ErrorKind::UnknownVertex, "vertex index " + std::to_string(v));
  return incidence_[v];
}

VertexIndex MetricGraph::initial(DirectedEdge d) const {
  const Edge& e = edge(d.edge);
  return d.forward ? e.from : e.to;
}

VertexIndex MetricGraph::terminal(DirectedEdge d) const {
  const Edge& e = edge(d.edge);
  return d.forward ? e.to : e.from;
}

bool MetricGraph::has_self_loop() const noexcept {
  return std::any_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.from == e.to; });
}

double MetricGraph::diameter() const {
  // Vertex-to-vertex distances by Dijkstra, then the farthest pair of points.
  // Two points on edges e, f are at distance min over endpoint choices; the
  // supremum over points is attained either at vertices or at interior points
  // where both routes around an edge balance.
  const std::size_t n = vertex_count();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, inf));
  for (VertexIndex s = 0; s < n; ++s) {
    auto& d = dist[s];
    using Item = std::pair<double, VertexIndex>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    d[s] = 0.0;
    pq.push({0.0, s});
    while (!pq.empty()) {
      auto [dv, v] = pq.top();
      pq.pop();
      if (dv > d[v]) continue;
      for (const EdgeEnd& end : incidence_[v]) {
        const Edge& e = edges_[end.edge];
        const VertexIndex w = end.at_start ? e.to : e.from;
        if (dv + e.length < d[w]) {
          d[w] = dv + e.length;
          pq.push({d[w], w});
        }
      }
    }
  }
  // Distance from a point (e, x) to vertex w is min(x + d[i(e)][w], |e|-x + d[t(e)][w]).
  // Maximise over pairs of edges by sampling; exact enough for a diameter bound.
  double diam = 0.0;
  constexpr int kSamples = 64;
  for (const Edge& e : edges_) {
    for (const Edge& f : edges_) {
      for (int a = 0; a <= kSamples; ++a) {
        const double x = e.length * a / kSamples;
        for (int b = 0; b <= kSamples; ++b) {
          const double y = f.length * b / kSamples;
          double best = inf;
          const VertexIndex ev[2] = {e.from, e.to};
          const double ex[2] = {x, e.length - x};
          const VertexIndex fv[2] = {f.from, f.to};
          const double fy[2] = {y, f.length - y};
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) best = std::min(best, ex[i] + dist[ev[i]][fv[j]] + fy[j]);
          if (&e == &f) best = std::min(best, std::abs(x - y));
          diam = std::max(diam, best);
        }
      }
    }
  }
  return diam;
}

double scattering_coefficient(const MetricGraph& g, DirectedEdge from, DirectedEdge to) {
  const VertexIndex v = g.terminal(from);
  if (v != g.initial(to)) return 0.0;
  const double transmission = 2.0 / static_cast<double>(g.degree(v));
  if (to == from.reversed()) return transmission - 1.0;
  return transmission;
}

Eigen::MatrixXd scattering_matrix(const MetricGraph& g) {
  const std::size_t n = g.directed_edge_count();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          scattering_coefficient(g, DirectedEdge::from_index(i), DirectedEdge::from_index(j));
  return s;
}

namespace {

struct Successor {
  DirectedEdge edge;
  double weight;
};

std::vector<std::vector<Successor>> successor_table(const MetricGraph& g) {
  const std::size_t n = g.directed_edge_count();
  std::vector<std::vector<Successor>> table(n);
  for (std::size_t i = 0; i < n; ++i) {
    const DirectedEdge d = DirectedEdge::from_index(i);
    const VertexIndex v = g.terminal(d);
    for (const EdgeEnd& end : g.incidence(v)) {
      // Leaving v along this end: forward if the end is the start of the edge.
      const DirectedEdge next{end.edge, end.at_start};
      const double w = scattering_coefficient(g, d, next);
      if (w != 0.0) table[i].push_back({next, w});
    }
    std::sort(table[i].begin(), table[i].end(),
              [](const Successor& a, const Successor& b) { return a.edge.index() < b.edge.index(); });
    // A self-loop shows up twice in the incidence list with distinct ends,
    // each giving a distinct directed edge; duplicates cannot occur otherwise.
    table[i].erase(std::unique(table[i].begin(), table[i].end(),
                               [](const Successor& a, const Successor& b) { return a.edge == b.edge; }),
                   table[i].end());
  }
  return table;
}

}  // namespace

std::vector<Path> enumerate_paths(const MetricGraph& g, DirectedEdge from, DirectedEdge to,
                                  double max_length, std::uint64_t budget) {
  if (!(max_length >= 0.0)) fail(ErrorKind::InvalidArgument, "max_length must be >= 0");
  g.edge(from.edge);
  g.edge(to.edge);

  const auto successors = successor_table(g);
  std::vector<Path> out;
  if (from == to) out.push_back({{from}, 0.0, 1.0});

  std::uint64_t visited = 0;
  std::vector<DirectedEdge> trail{from};
  // Iterative DFS: frame = (position in trail, next successor index, length, weight).
  struct Frame {
    std::size_t next = 0;
    double length = 0.0;  // |P| of the trail so far (excludes its last edge)
    double weight = 1.0;
  };
  std::vector<Frame> stack{{0, 0.0, 1.0}};
  while (!stack.empty()) {
    Frame& top = stack.back();
    const DirectedEdge cur = trail.back();
    const auto& succ = successors[cur.index()];
    if (top.next >= succ.size()) {
      stack.pop_back();
      trail.pop_back();
      continue;
    }
    const Successor s = succ[top.next++];
    const double len = top.length + g.length(cur);
    if (len > max_length) continue;
    if (++visited > budget)
      fail(ErrorKind::PathBudgetExceeded,
           "more than " + std::to_string(budget) + " path prefixes below length " +
               std::to_string(max_length));
    const double w = top.weight * s.weight;
    trail.push_back(s.edge);
    if (s.edge == to) out.push_back({trail, len, w});
    stack.push_back({0, len, w});
  }

  std::sort(out.begin(), out.end(), [](const Path& a, const Path& b) {
    if (a.length != b.length) return a.length < b.length;
    return std::lexicographical_compare(
        a.edges.begin(), a.edges.end(), b.edges.begin(), b.edges.end(),
        [](DirectedEdge x, DirectedEdge y) { return x.index() < y.index(); });
  });
#ifndef NDEBUG
  for (const Path& p : out)
    if (!is_valid_path(g, p)) fail(ErrorKind::InvalidArgument, "enumerated an unchained path");
#endif
  return out;
}

bool is_valid_path(const MetricGraph& g, const Path& p, double tol) {
  if (p.edges.empty()) return false;
  double len = 0.0;
  double w = 1.0;
  for (std::size_t k = 0; k + 1 < p.edges.size(); ++k) {
    if (g.terminal(p.edges[k]) != g.initial(p.edges[k + 1])) return false;
    len += g.length(p.edges[k]);
    w *= scattering_coefficient(g, p.edges[k], p.edges[k + 1]);
  }
  return std::abs(len - p.length) <= tol * std::max(1.0, len) && std::abs(w - p.weight) <= tol;
}

}  // namespace ksg
