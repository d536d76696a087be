#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ksg/heat_kernel.hpp"
#include "ksg/laplacian.hpp"
#include "ksg/mesh.hpp"
#include "ksg/nonlinearity.hpp"

namespace ksg {

struct SolverConfig {
  double dt = 0.01;
  double t_end = 1.0;
  double picard_tol = 1e-10;  // relative to max(1, |u|_p + |v|_{W^{1,p}})
  int picard_max_iters = 50;  // 1 means a single Duhamel sweep per window, accepted as is
  double nodes_per_unit_length = 50.0;
  double blowup_threshold = 1e6;
  double norm_p = 2.0;       // p of the blow-up norm and of the Picard distance
  double sigma_shift = 1.0;  // sigma of e^{(Delta - sigma) t}
  int window_steps = 4;      // initial steps per Picard window
  int max_window_steps = 8;  // cap when windows grow again
  double record_interval = 0.0;  // 0 records every step

  /// Throws InvalidArgument on nonpositive or inconsistent values.
  void validate() const;
};

/// A field sampled at times[j]; the mild maps expect times 0, dt, ..., t.
struct TimePath {
  std::vector<double> times;
  std::vector<GridFunction> values;

  std::size_t size() const noexcept { return times.size(); }
  /// Piecewise-linear interpolation in time, clamped at the ends.
  GridFunction at(double t) const;
};

struct DiagnosticRecord {
  double t = 0.0;
  double mass_u = 0.0;
  double lp_u = 0.0;    // L^p with p = cfg.norm_p
  double linf_u = 0.0;
  double min_u = 0.0;
  double min_v = 0.0;
  int picard_iters = 0;
  double contraction_factor = 0.0;
  double window_length = 0.0;
};

enum class SolveStatus { Completed, BlowUpDetected, PicardDiverged };

struct SolveResult {
  std::vector<double> times;
  std::vector<GridFunction> u_series;
  std::vector<GridFunction> v_series;
  std::vector<DiagnosticRecord> diagnostics;  // one per recorded time
  SolveStatus status = SolveStatus::Completed;
  double blowup_time_estimate = 0.0;  // BlowUpDetected
  double failure_time = 0.0;          // PicardDiverged: window start
  int failure_iteration = 0;          // PicardDiverged: iterations in the last attempt
  std::size_t windows = 0;
  std::size_t window_halvings = 0;
  std::size_t floored_nodes = 0;
};

/// Integrates e^{(Delta - sigma)(t - s)} against piecewise-linear-in-time
/// data by product quadrature: on each step the data are interpolated
/// linearly and the kernel is integrated at Gauss points, with the step next
/// to s = t mapped through t - s = dt y^2 so the (t - s)^{-1/2} singularity
/// of the derivative kernel disappears. All operators are dense matrices in
/// the mesh's edge layout, built lazily per (step, lag) and kept.
///
/// Thread-safe; the cache is shared by all solves that use the object.
class DuhamelQuadrature {
 public:
  DuhamelQuadrature(const HeatKernelPlan& plan, std::shared_ptr<const Mesh> mesh, double sigma);
  ~DuhamelQuadrature();
  DuhamelQuadrature(const DuhamelQuadrature&) = delete;
  DuhamelQuadrature& operator=(const DuhamelQuadrature&) = delete;

  const HeatKernelPlan& plan() const noexcept { return plan_; }
  const std::shared_ptr<const Mesh>& mesh() const noexcept { return mesh_; }
  double sigma() const noexcept { return sigma_; }

  /// e^{(Delta - sigma) lag dt} (kind Heat) or its derivative variants.
  const Eigen::MatrixXd& free(KernelKind kind, double dt, int lag) const;
  /// sum over steps of int e^{(Delta - sigma)(t_i - s)} F(s) ds with F given at
  /// s_k = k dt, k = 0..i (kind HeatDx puts d/dx on F through the kernel).
  Eigen::VectorXd integral(KernelKind kind, double dt, const std::vector<Eigen::VectorXd>& samples,
                           std::size_t i) const;

  std::size_t cached_bytes() const;

 private:
  struct Set;
  Set& set(KernelKind kind, double dt) const;
  const Eigen::MatrixXd& weight(KernelKind kind, double dt, char which, int lag) const;

  const HeatKernelPlan& plan_;
  std::shared_ptr<const Mesh> mesh_;
  double sigma_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, double>, std::unique_ptr<Set>> sets_;
};

/// Phi(u, v; u0)(t) = e^{(Delta - sigma)t} u0 - int e^{(Delta - sigma)(t - s)} d/dx(f1 v_x) ds
///                   + int e^{(Delta - sigma)(t - s)} (f2 + sigma u) ds,
/// evaluated at t = u_path.times.back(). Paths must be sampled on
/// 0, dt, ..., t (at least two samples when t > 0, else
/// QuadratureUnderResolved).
GridFunction duhamel_phi(const HeatKernelPlan& plan, const Nonlinearity& nl, double sigma, const GridFunction& u0,
                         const TimePath& u_path, const TimePath& v_path);
/// Psi(u, v; v0)(t) = e^{(Delta - sigma)t/tau} v0 + (1/tau) int e^{(Delta - sigma)(t - s)/tau} (f3 + sigma v) ds.
GridFunction duhamel_psi(const HeatKernelPlan& plan, const Nonlinearity& nl, double sigma, const GridFunction& v0,
                         const TimePath& u_path, const TimePath& v_path);
/// Theta(u; u0)(t) = Phi(u, (sigma_nl - Delta)^{-1} f(u); u0)(t), elliptic regime only.
GridFunction duhamel_theta(const HeatKernelPlan& plan, const Nonlinearity& nl, double sigma,
                           const DiscreteLaplacian& lap, const GridFunction& u0, const TimePath& u_path);

/// Mild solution by Picard iteration on windows of `window_steps` steps.
/// Each window starts from the constant-in-time extension of its initial
/// data; a window whose iteration stops contracting is retried at half the
/// length (at most 6 times), and windows grow again after 3 consecutive
/// quick convergences. The plan horizon must cover max_window_steps * dt / tau.
SolveResult solve_mild(const HeatKernelPlan& plan, const Nonlinearity& nl, const GridFunction& u0,
                       const GridFunction& v0, const SolverConfig& cfg);

/// Method-of-lines reference: backward Euler diffusion on the discrete
/// Laplacian, explicit upwind chemotaxis flux and explicit reactions.
/// Throws StepUnstable when the explicit flux violates its CFL bound.
SolveResult solve_reference(const DiscreteLaplacian& lap, const Nonlinearity& nl, const GridFunction& u0,
                            const GridFunction& v0, const SolverConfig& cfg);

/// Fixed point of
///   Psi(t) = e^{(Delta - sigma)(t - kappa)} psi0
///          + int_kappa^t e^{(Delta - sigma)(t - s)} (a d/dx Psi + b Psi) ds
/// on [kappa, cfg.t_end]; a and b are interpolated linearly in time.
/// Returned times are absolute; u_series holds Psi.
SolveResult solve_linear_nonautonomous(const HeatKernelPlan& plan, const TimePath& a_path, const TimePath& b_path,
                                       const GridFunction& psi0, double kappa, double sigma,
                                       const SolverConfig& cfg);

/// Coefficients that turn the u-equation into the linear form above along a
/// known trajectory:
///   a = -(d f1/du) v_x,  b = g2 + sigma - g1 v_xx - g3 v_x^2.
struct FrozenCoefficients {
  GridFunction a;
  GridFunction b;
  std::size_t floored = 0;  // nodes where a quotient divided by |u| < 1e-12
};
FrozenCoefficients frozen_coefficients(const Nonlinearity& nl, const GridFunction& u, const GridFunction& v,
                                       double sigma);

struct BlowupCheck {
  bool fired = false;
  double t_est = 0.0;  // where the linear fit of 1/|u| over the last 5 samples hits 0
};
/// Needs at least 3 samples; fires when the last norm reaches `threshold`.
BlowupCheck detect_blowup(const std::vector<double>& times, const std::vector<double>& norms, double threshold);

}  // namespace ksg
