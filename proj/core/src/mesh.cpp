#include "ksg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ksg/error.hpp"

namespace ksg {

Mesh::Mesh(std::shared_ptr<const MetricGraph> graph, double nodes_per_unit_length)
    : graph_(std::move(graph)), density_(nodes_per_unit_length) {
  if (!graph_) fail(ErrorKind::InvalidArgument, "mesh needs a graph");
  if (!(nodes_per_unit_length > 0.0)) fail(ErrorKind::MeshTooCoarse, "nodes_per_unit_length must be positive");

  const MetricGraph& g = *graph_;
  const std::size_t ne = g.edge_count();
  intervals_.resize(ne);
  spacing_.resize(ne);
  offsets_.resize(ne);
  shared_offsets_.resize(ne);
  min_spacing_ = std::numeric_limits<double>::infinity();
  std::size_t shared = g.vertex_count();
  for (EdgeIndex e = 0; e < ne; ++e) {
    const double len = g.length(e);
    const auto n = static_cast<std::size_t>(std::max(2.0, std::round(len * nodes_per_unit_length)));
    intervals_[e] = n;
    spacing_[e] = len / static_cast<double>(n);
    offsets_[e] = size_;
    shared_offsets_[e] = shared;
    size_ += n + 1;
    shared += n - 1;
    min_spacing_ = std::min(min_spacing_, spacing_[e]);
    max_spacing_ = std::max(max_spacing_, spacing_[e]);
  }
  shared_size_ = shared;

  node_edge_.resize(size_);
  simpson_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size_));
  trapezoid_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size_));
  shared_weights_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shared_size_));
  for (EdgeIndex e = 0; e < ne; ++e) {
    const std::size_t n = intervals_[e];
    const double h = spacing_[e];
    const std::size_t off = offsets_[e];
    for (std::size_t j = 0; j <= n; ++j) node_edge_[off + j] = e;

    auto T = [&](std::size_t j) -> double& { return trapezoid_[static_cast<Eigen::Index>(off + j)]; };
    auto S = [&](std::size_t j) -> double& { return simpson_[static_cast<Eigen::Index>(off + j)]; };
    for (std::size_t j = 0; j <= n; ++j) T(j) = (j == 0 || j == n) ? h / 2 : h;

    std::size_t simpson_end = n;
    if (n % 2 == 1) simpson_end = n - 3;
    for (std::size_t j = 0; j + 2 <= simpson_end; j += 2) {
      S(j) += h / 3;
      S(j + 1) += 4 * h / 3;
      S(j + 2) += h / 3;
    }
    if (n % 2 == 1) {
      const std::size_t j = simpson_end;
      S(j) += 3 * h / 8;
      S(j + 1) += 9 * h / 8;
      S(j + 2) += 9 * h / 8;
      S(j + 3) += 3 * h / 8;
    }

    for (std::size_t j = 0; j <= n; ++j)
      shared_weights_[static_cast<Eigen::Index>(shared_index(e, j))] += T(j);
  }
}

std::optional<double> Mesh::uniform_spacing() const noexcept {
  if (max_spacing_ - min_spacing_ <= 1e-12 * max_spacing_) return 0.5 * (max_spacing_ + min_spacing_);
  return std::nullopt;
}

std::size_t Mesh::shared_index(EdgeIndex e, std::size_t j) const {
  const std::size_t n = intervals_.at(e);
  const Edge& edge = graph_->edge(e);
  if (j == 0) return edge.from;
  if (j == n) return edge.to;
  if (j > n) fail(ErrorKind::InvalidArgument, "node index past edge end");
  return shared_offsets_[e] + j - 1;
}

bool Mesh::same_as(const Mesh& other) const noexcept {
  if (this == &other) return true;
  return graph_ == other.graph_ && intervals_ == other.intervals_;
}

void require_same_mesh(const Mesh& a, const Mesh& b) {
  if (!a.same_as(b)) fail(ErrorKind::MeshMismatch, "grid functions live on different meshes");
}

GridFunction::GridFunction(std::shared_ptr<const Mesh> mesh)
    : mesh_(std::move(mesh)), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh_->size()))),
      vertex_continuous_(true) {}

GridFunction::GridFunction(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values, bool vertex_continuous)
    : mesh_(std::move(mesh)), values_(std::move(values)), vertex_continuous_(vertex_continuous) {
  if (static_cast<std::size_t>(values_.size()) != mesh_->size())
    fail(ErrorKind::MeshMismatch, "value count does not match the mesh");
}

GridFunction GridFunction::constant(std::shared_ptr<const Mesh> mesh, double c) {
  const auto n = static_cast<Eigen::Index>(mesh->size());
  return GridFunction(std::move(mesh), Eigen::VectorXd::Constant(n, c), true);
}

GridFunction GridFunction::sample(std::shared_ptr<const Mesh> mesh,
                                  const std::function<double(EdgeIndex, double)>& f) {
  GridFunction u(mesh);
  for (EdgeIndex e = 0; e < mesh->graph().edge_count(); ++e)
    for (std::size_t j = 0; j <= mesh->intervals(e); ++j) u.at(e, j) = f(e, mesh->position(e, j));
  u.vertex_continuous_ = u.vertex_mismatch() <= 1e-12;
  return u;
}

GridFunction GridFunction::from_shared(std::shared_ptr<const Mesh> mesh, const Eigen::VectorXd& shared) {
  if (static_cast<std::size_t>(shared.size()) != mesh->shared_size())
    fail(ErrorKind::MeshMismatch, "shared vector size does not match the mesh");
  GridFunction u(mesh);
  for (EdgeIndex e = 0; e < mesh->graph().edge_count(); ++e)
    for (std::size_t j = 0; j <= mesh->intervals(e); ++j)
      u.at(e, j) = shared[static_cast<Eigen::Index>(mesh->shared_index(e, j))];
  u.vertex_continuous_ = true;
  return u;
}

std::span<double> GridFunction::edge_values(EdgeIndex e) {
  return {values_.data() + mesh_->offset(e), mesh_->intervals(e) + 1};
}

std::span<const double> GridFunction::edge_values(EdgeIndex e) const {
  return {values_.data() + mesh_->offset(e), mesh_->intervals(e) + 1};
}

void GridFunction::make_vertex_continuous() {
  const MetricGraph& g = graph();
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    double sum = 0.0;
    const auto ends = g.incidence(v);
    for (const EdgeEnd& end : ends) sum += at(end.edge, end.at_start ? 0 : mesh_->intervals(end.edge));
    const double mean = sum / static_cast<double>(ends.size());
    for (const EdgeEnd& end : ends) at(end.edge, end.at_start ? 0 : mesh_->intervals(end.edge)) = mean;
  }
  vertex_continuous_ = true;
}

double GridFunction::vertex_mismatch() const {
  const MetricGraph& g = graph();
  double worst = 0.0;
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const EdgeEnd& end : g.incidence(v)) {
      const double x = at(end.edge, end.at_start ? 0 : mesh_->intervals(end.edge));
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    worst = std::max(worst, (hi - lo) / scale);
  }
  return worst;
}

Eigen::VectorXd GridFunction::to_shared() const {
  const Mesh& m = *mesh_;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.shared_size()));
  const MetricGraph& g = graph();
  for (EdgeIndex e = 0; e < g.edge_count(); ++e)
    for (std::size_t j = 1; j < m.intervals(e); ++j)
      out[static_cast<Eigen::Index>(m.shared_index(e, j))] = at(e, j);
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    double sum = 0.0;
    const auto ends = g.incidence(v);
    for (const EdgeEnd& end : ends) sum += at(end.edge, end.at_start ? 0 : m.intervals(end.edge));
    out[static_cast<Eigen::Index>(v)] = sum / static_cast<double>(ends.size());
  }
  return out;
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
  require_same_mesh(*mesh_, *other.mesh_);
  values_ += other.values_;
  vertex_continuous_ = vertex_continuous_ && other.vertex_continuous_;
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
  require_same_mesh(*mesh_, *other.mesh_);
  values_ -= other.values_;
  vertex_continuous_ = vertex_continuous_ && other.vertex_continuous_;
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  values_ *= s;
  return *this;
}

GridFunction edge_derivative(const GridFunction& u) {
  const Mesh& m = u.mesh();
  GridFunction du(u.mesh_ptr());
  for (EdgeIndex e = 0; e < m.graph().edge_count(); ++e) {
    const std::size_t n = m.intervals(e);
    const double h = m.spacing(e);
    auto x = u.edge_values(e);
    auto d = du.edge_values(e);
    for (std::size_t j = 1; j < n; ++j) d[j] = (x[j + 1] - x[j - 1]) / (2 * h);
    d[0] = (-3 * x[0] + 4 * x[1] - x[2]) / (2 * h);
    d[n] = (3 * x[n] - 4 * x[n - 1] + x[n - 2]) / (2 * h);
  }
  du.set_vertex_continuous(false);
  return du;
}

GridFunction edge_second_derivative(const GridFunction& u) {
  const Mesh& m = u.mesh();
  GridFunction d2(u.mesh_ptr());
  for (EdgeIndex e = 0; e < m.graph().edge_count(); ++e) {
    const std::size_t n = m.intervals(e);
    const double h2 = m.spacing(e) * m.spacing(e);
    auto x = u.edge_values(e);
    auto d = d2.edge_values(e);
    for (std::size_t j = 1; j < n; ++j) d[j] = (x[j - 1] - 2 * x[j] + x[j + 1]) / h2;
    if (n >= 3) {
      d[0] = (2 * x[0] - 5 * x[1] + 4 * x[2] - x[3]) / h2;
      d[n] = (2 * x[n] - 5 * x[n - 1] + 4 * x[n - 2] - x[n - 3]) / h2;
    } else {
      d[0] = d[1];
      d[n] = d[1];
    }
  }
  d2.set_vertex_continuous(false);
  return d2;
}

GridFunction map_values(const GridFunction& u, const std::function<double(double)>& f) {
  GridFunction out(u.mesh_ptr(), u.values().unaryExpr(f), u.vertex_continuous());
  return out;
}

}  // namespace ksg
