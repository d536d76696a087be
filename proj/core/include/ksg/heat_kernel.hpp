#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "ksg/graph.hpp"
#include "ksg/mesh.hpp"

namespace ksg {

/// f_t(x) = (4 pi t)^{-1/2} exp(-x^2 / 4t). Throws NonpositiveTime for t <= 0.
double gaussian_kernel(double t, double x);
/// d/dx f_t(x) = -x/(2t) f_t(x).
double gaussian_kernel_dx(double t, double x);

/// Sum of S_P over all paths with the same metric length |P| between an
/// ordered pair of directed edges (m >= 1 only; the m = 0 term is the
/// separate direct Gaussian).
struct KernelRecord {
  double length = 0.0;
  double weight = 0.0;
};

/// What a kernel matrix integrates against the samples of u.
enum class KernelKind {
  Heat,    // K_t(x, y)                      -> e^{t Delta} u
  HeatDx,  // -d/dy K_t(x, y)                -> e^{t Delta} d/dx u
  DxHeat,  // d/dx K_t(x, y)                 -> d/dx e^{t Delta} u
};

/// Path data needed to evaluate the heat kernel for 0 < t <= horizon.
///
/// All four itinerary classes are folded into records keyed by a pair of
/// directed edges: a path from (+-)e to (+-)e' contributes S_P f_t(s' + |P| - s)
/// where s, s' are the coordinates of x, y measured along the chosen
/// orientations. Paths are grouped by length, so the plan stays small even
/// when the number of individual paths is astronomically large.
///
/// The plan is immutable apart from an internal cache of dense kernel
/// matrices, which is guarded by a mutex and safe to share across threads.
class HeatKernelPlan {
 public:
  HeatKernelPlan(std::shared_ptr<const MetricGraph> graph, double horizon, double eps_tail,
                 std::uint64_t budget = kDefaultPathBudget);
  ~HeatKernelPlan();
  HeatKernelPlan(const HeatKernelPlan&) = delete;
  HeatKernelPlan& operator=(const HeatKernelPlan&) = delete;

  /// Metric truncation radius
  ///   max( (2 l+^2 + 8 T log(deg) + 1) / l-,  l+ + sqrt(8 T log(1/eps)),  2 l+ ).
  static double truncation_radius(const MetricGraph& g, double horizon, double eps_tail);

  const MetricGraph& graph() const noexcept { return *graph_; }
  const std::shared_ptr<const MetricGraph>& graph_ptr() const noexcept { return graph_; }
  double horizon() const noexcept { return horizon_; }
  double eps_tail() const noexcept { return eps_tail_; }
  double radius() const noexcept { return radius_; }

  std::span<const KernelRecord> records(DirectedEdge from, DirectedEdge to) const;
  std::size_t record_count() const noexcept;

  /// One Gaussian term of K_t(x, y) for x on edge e, y on edge e':
  /// weight * f_t(s'(y) + length - s(x)), where s(x) = xi if sx > 0 else |e| - xi
  /// and s'(y) likewise with sy. The direct term is the ++ entry with length 0.
  struct Term {
    double length = 0.0;
    double weight = 0.0;
    int sx = 1;
    int sy = 1;
  };
  std::span<const Term> terms(EdgeIndex x_edge, EdgeIndex y_edge) const;

  /// Dense matrix M with (M u)_i = integral of kernel(x_i, .) u over the
  /// graph, quadrature weights included, rows and columns in the mesh's edge
  /// layout. No cache involved.
  Eigen::MatrixXd build_matrix(const Mesh& mesh, double t, KernelKind kind) const;
  /// M u, evaluated row by row on the first request for (mesh, t, kind) and
  /// from a cached dense M from the second request on.
  Eigen::VectorXd apply(const std::shared_ptr<const Mesh>& mesh, double t, KernelKind kind,
                        const Eigen::VectorXd& values) const;

  /// Cache policy. Capacity is in bytes; oldest entries are evicted first.
  void set_cache_capacity(std::size_t bytes) const;
  std::size_t cached_matrices() const;
  void clear_cache() const;

  /// Below this t (relative to the source edge's h) the Gaussian is
  /// under-resolved and quadrature switches to exact Gaussian moments
  /// against the piecewise-linear interpolant.
  static double small_time_threshold(double h) noexcept { return 2.0 * h * h; }

 private:
  void check_time(double t) const;
  void check_mesh(const Mesh& mesh) const;
  void build_row(const Mesh& mesh, double t, KernelKind kind, std::size_t row, double* out) const;
  std::shared_ptr<const Eigen::MatrixXd> lookup(const std::shared_ptr<const Mesh>& mesh, double t,
                                                KernelKind kind) const;

  std::shared_ptr<const MetricGraph> graph_;
  double horizon_;
  double eps_tail_;
  double radius_;
  std::vector<std::vector<KernelRecord>> records_;  // [from.index() * 2E + to.index()]
  std::vector<std::vector<Term>> terms_;            // [x_edge * E + y_edge]

  struct CacheEntry {
    std::shared_ptr<const Mesh> mesh;
    std::shared_ptr<const Eigen::MatrixXd> matrix;
    std::uint64_t stamp = 0;
    int requests = 0;
  };
  using CacheKey = std::tuple<const Mesh*, double, int>;
  mutable std::mutex cache_mutex_;
  mutable std::map<CacheKey, CacheEntry> cache_;
  mutable std::size_t cache_bytes_ = 0;
  mutable std::size_t cache_capacity_ = std::size_t{512} << 20;
  mutable std::uint64_t cache_clock_ = 0;

  friend double eval_kernel(const HeatKernelPlan&, double, EdgePoint, EdgePoint);
  friend double eval_kernel_dy(const HeatKernelPlan&, double, EdgePoint, EdgePoint, bool*);
  friend double eval_kernel_dx(const HeatKernelPlan&, double, EdgePoint, EdgePoint);
};

/// K_t(x, y). Throws TimeOutOfRange unless 0 < t <= plan.horizon().
double eval_kernel(const HeatKernelPlan& plan, double t, EdgePoint x, EdgePoint y);
/// d/dy K_t(x, y) along the orientation of y's edge, differentiating each
/// Gaussian term analytically. At an edge end the one-sided derivative is
/// returned and `one_sided` (if given) is set.
double eval_kernel_dy(const HeatKernelPlan& plan, double t, EdgePoint x, EdgePoint y,
                      bool* one_sided = nullptr);
/// d/dx K_t(x, y) along the orientation of x's edge.
double eval_kernel_dx(const HeatKernelPlan& plan, double t, EdgePoint x, EdgePoint y);

/// e^{-sigma t} (K_t * u) on u's grid; output is vertex-continuous.
GridFunction apply_heat(const HeatKernelPlan& plan, double t, double sigma, const GridFunction& u);
/// e^{-sigma t} integral of (-d/dy K_t(x, y)) u(y) dy, i.e. e^{(Delta - sigma)t} d/dx u.
GridFunction apply_heat_dx(const HeatKernelPlan& plan, double t, double sigma, const GridFunction& u);
/// d/dx e^{(Delta - sigma)t} u (edge-oriented output).
GridFunction apply_dx_heat(const HeatKernelPlan& plan, double t, double sigma, const GridFunction& u);

}  // namespace ksg
