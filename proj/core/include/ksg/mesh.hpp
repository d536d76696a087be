#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ksg/graph.hpp"

namespace ksg {

/// Uniform nodes 0 = x_0 < ... < x_{n_e} = |e| on every edge.
///
/// Two layouts are used. The *edge layout* stores n_e + 1 samples per edge
/// back to back, so vertex values appear once per incident edge end; kernel
/// quadrature and edge-oriented fields (fluxes) live here. The *shared layout*
/// keeps one unknown per vertex plus the interior nodes, which is what the
/// discrete Laplacian acts on.
class Mesh {
 public:
  /// n_e = max(2, round(|e| * nodes_per_unit_length)).
  Mesh(std::shared_ptr<const MetricGraph> graph, double nodes_per_unit_length);

  const MetricGraph& graph() const noexcept { return *graph_; }
  const std::shared_ptr<const MetricGraph>& graph_ptr() const noexcept { return graph_; }
  double nodes_per_unit_length() const noexcept { return density_; }

  std::size_t intervals(EdgeIndex e) const { return intervals_.at(e); }
  double spacing(EdgeIndex e) const { return spacing_.at(e); }
  double min_spacing() const noexcept { return min_spacing_; }
  double max_spacing() const noexcept { return max_spacing_; }
  /// Common mesh width when every edge has the same h (to 1e-12 relative).
  std::optional<double> uniform_spacing() const noexcept;

  /// Edge layout.
  std::size_t size() const noexcept { return size_; }
  std::size_t offset(EdgeIndex e) const { return offsets_.at(e); }
  std::size_t flat_index(EdgeIndex e, std::size_t j) const { return offsets_.at(e) + j; }
  double position(EdgeIndex e, std::size_t j) const { return spacing_.at(e) * static_cast<double>(j); }
  /// Edge owning each flat index, and the node number along that edge.
  EdgeIndex edge_of(std::size_t flat) const { return node_edge_.at(flat); }
  std::size_t node_of(std::size_t flat) const { return flat - offsets_[node_edge_.at(flat)]; }

  /// Shared layout: vertices first, then interior nodes edge by edge.
  std::size_t shared_size() const noexcept { return shared_size_; }
  std::size_t shared_index(EdgeIndex e, std::size_t j) const;

  /// Composite Simpson weights in the edge layout (3/8 rule on the last
  /// three intervals when n_e is odd).
  const Eigen::VectorXd& simpson_weights() const noexcept { return simpson_; }
  /// Trapezoid weights in the edge layout.
  const Eigen::VectorXd& trapezoid_weights() const noexcept { return trapezoid_; }
  /// Trapezoid weights in the shared layout (vertex weights summed over ends).
  const Eigen::VectorXd& shared_weights() const noexcept { return shared_weights_; }

  bool same_as(const Mesh& other) const noexcept;

 private:
  std::shared_ptr<const MetricGraph> graph_;
  double density_;
  std::vector<std::size_t> intervals_;
  std::vector<double> spacing_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> shared_offsets_;
  std::vector<EdgeIndex> node_edge_;
  std::size_t size_ = 0;
  std::size_t shared_size_ = 0;
  double min_spacing_ = 0.0;
  double max_spacing_ = 0.0;
  Eigen::VectorXd simpson_;
  Eigen::VectorXd trapezoid_;
  Eigen::VectorXd shared_weights_;
};

/// Edge-wise samples of a scalar field on a mesh (edge layout).
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(std::shared_ptr<const Mesh> mesh);
  GridFunction(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values, bool vertex_continuous);

  static GridFunction constant(std::shared_ptr<const Mesh> mesh, double c);
  static GridFunction sample(std::shared_ptr<const Mesh> mesh,
                             const std::function<double(EdgeIndex, double)>& f);
  static GridFunction from_shared(std::shared_ptr<const Mesh> mesh, const Eigen::VectorXd& shared);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const noexcept { return mesh_; }
  const MetricGraph& graph() const { return mesh_->graph(); }

  Eigen::VectorXd& values() noexcept { return values_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  std::span<double> edge_values(EdgeIndex e);
  std::span<const double> edge_values(EdgeIndex e) const;
  double& at(EdgeIndex e, std::size_t j) { return values_[static_cast<Eigen::Index>(mesh_->flat_index(e, j))]; }
  double at(EdgeIndex e, std::size_t j) const {
    return values_[static_cast<Eigen::Index>(mesh_->flat_index(e, j))];
  }

  bool vertex_continuous() const noexcept { return vertex_continuous_; }
  void set_vertex_continuous(bool flag) noexcept { vertex_continuous_ = flag; }
  /// Replace all edge-end values at each vertex by their mean.
  void make_vertex_continuous();
  /// Largest relative spread of edge-end values at a vertex.
  double vertex_mismatch() const;

  /// Shared layout; vertex values are averaged over incident ends.
  Eigen::VectorXd to_shared() const;

  GridFunction& operator+=(const GridFunction& other);
  GridFunction& operator-=(const GridFunction& other);
  GridFunction& operator*=(double s);
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

 private:
  std::shared_ptr<const Mesh> mesh_;
  Eigen::VectorXd values_;
  bool vertex_continuous_ = false;
};

/// Throws MeshMismatch unless both functions live on the same mesh.
void require_same_mesh(const Mesh& a, const Mesh& b);

/// d/dx along each edge's orientation: central differences inside,
/// second-order one-sided at edge ends. Result is edge-oriented, not
/// vertex-continuous.
GridFunction edge_derivative(const GridFunction& u);
/// Second derivative along edges (one-sided second order at ends).
GridFunction edge_second_derivative(const GridFunction& u);

/// Pointwise map u -> f(u) on the edge layout.
GridFunction map_values(const GridFunction& u, const std::function<double(double)>& f);

}  // namespace ksg
