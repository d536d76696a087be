#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "ksg/mesh.hpp"
#include "ksg/solver.hpp"

namespace ksg::detail {

/// Appends frames and diagnostics to a SolveResult, honouring
/// cfg.record_interval, and keeps the full L^p history for blow-up checks.
class Recorder {
 public:
  Recorder(SolveResult& out, std::shared_ptr<const Mesh> mesh, const SolverConfig& cfg, bool has_v);

  /// Returns true if the L^p norm reached the blow-up threshold (the frame is
  /// then always recorded).
  bool push(double t, const Eigen::VectorXd& u, const Eigen::VectorXd* v, int iters, double factor,
            double window, bool force);
  double blowup_estimate() const;

 private:
  SolveResult& out_;
  std::shared_ptr<const Mesh> mesh_;
  const SolverConfig& cfg_;
  bool has_v_;
  double next_record_ = 0.0;
  std::vector<double> hist_t_, hist_norm_;
};

struct WindowFields {
  std::vector<Eigen::VectorXd> u, v;  // index 0 is the window start
};

struct WindowProblem {
  std::shared_ptr<const Mesh> mesh;
  bool has_v = true;
  bool v_in_distance = true;  // false when v is a function of u (elliptic regime)
  /// One Picard sweep: fills out.u[1..n] (and out.v[0..n] when has_v) from `in`.
  std::function<void(double t0, double h, const WindowFields& in, WindowFields& out)> sweep;
  /// Optional: v at the window start from u (elliptic regime).
  std::function<Eigen::VectorXd(const Eigen::VectorXd& u)> signal;
};

/// Window-by-window Picard driver shared by solve_mild and
/// solve_linear_nonautonomous.
SolveResult run_windows(const WindowProblem& problem, Eigen::VectorXd u0, Eigen::VectorXd v0, double t_start,
                        const SolverConfig& cfg);

Eigen::VectorXd edge_dx(const std::shared_ptr<const Mesh>& mesh, const Eigen::VectorXd& values);

}  // namespace ksg::detail
