#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ksg/heat_kernel.hpp"
#include "ksg/mesh.hpp"
#include "ksg/nonlinearity.hpp"
#include "ksg/solver.hpp"

namespace ksg {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// (sum_e int |u_e|^p)^{1/p} by the trapezoid rule; p = infinity gives
/// max |u|. Throws InvalidArgument for p < 1.
double lp_norm(const GridFunction& u, double p);
/// (|u|_p^p + |u_x|_p^p)^{1/p} with the edge_derivative of u;
/// max(|u|_inf, |u_x|_inf) for p = infinity.
double w1p_norm(const GridFunction& u, double p);
/// Trapezoid integral of u over the graph.
double mass(const GridFunction& u);

enum class OdeBoundType { Stationary, Exponential, Linear };

/// Upper bound for int u(t) along a logistic run, from comparison with the
/// scalar mass ODE.
///   m > 0:         max(M0, r), r the positive zero of k|G| + l x - m |G|^{-eps} x^{1+eps}
///   m = 0, l > 0:  e^{lt} M0 + (k |G| / l)(e^{lt} - 1)
///   m = l = 0:     M0 + k |G| t
double l1_ode_bound(double u0_mass, double k, double l, double m, double eps, double graph_length, double t);
OdeBoundType l1_ode_bound_type(double l, double m) noexcept;
/// Positive zero r(k, l, m) used by the stationary branch (bisection to 1e-10).
double logistic_mass_root(double k, double l, double m, double eps, double graph_length);

struct LogisticReport {
  double worst_margin = 0.0;  // max over t of int u - bound * (1 + 1e-3); <= 0 passes
  double worst_time = 0.0;
  double sup_linf = 0.0;
  bool bounded = true;             // sup |u|_inf finite
  bool envelope_nonincreasing = true;  // m > 0 only
  double envelope_max_rise = 0.0;      // largest relative rise between consecutive blocks
  double settle_time = 10.0;
  std::vector<std::pair<double, double>> sup_lq;  // (q, sup_t |u|_q) for q = 1, 2, 4, 8
};
/// Checks a logistic run against l1_ode_bound. For m > 0 also checks that
/// sup |u|_inf is finite and that the maxima of |u|_inf over consecutive unit
/// time blocks after `settle_time` do not increase (relative slack 1e-3).
/// Throws BoundViolated (with the worst time and margin) on failure.
LogisticReport check_logistic_bounds(const SolveResult& result, const LogisticPreset& preset,
                                     double settle_time = 10.0);

enum class OperatorKind { Heat, HeatDx, DxHeat };
std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);

struct NormFitResult {
  OperatorKind kind = OperatorKind::Heat;
  double p = 1.0, q = 1.0;
  std::vector<double> log_t, log_norm;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the fit residuals
  double target = 0.0;
  double tolerance = 0.05;
  bool pass = false;
};

struct NormFitOptions {
  std::vector<double> t_grid;  // empty: 12 log-spaced points in [1e-3, 1e-1]
  double nodes_per_unit_length = 200.0;
  std::size_t n_probes = 64;
  std::uint64_t seed = 1;
  double tolerance = 0.05;
  double residual_limit = 0.1;
  double sigma = 0.0;  // evaluate e^{(Delta - sigma) t} variants
};

/// Target exponent of the L^p -> L^q norm: -(1/p - 1/q)/2, minus another 1/2
/// for the derivative kinds.
double norm_exponent(OperatorKind kind, double p, double q);

/// Lower bound for |op(t)|_{p->q} by maximising over probes: n_probes random
/// members of a family of edge bumps at 5 widths, Haar-like sign patterns and
/// spikes next to vertices, plus every vertex spike. Probes are normalised to
/// unit L^p. The set is a deterministic function of the seed, and a larger
/// n_probes extends the same sequence.
double empirical_operator_norm(const HeatKernelPlan& plan, const std::shared_ptr<const Mesh>& mesh,
                               OperatorKind kind, double p, double q, double t, std::size_t n_probes,
                               std::uint64_t seed, double sigma = 0.0);
/// Slope of log norm against log t over the grid, compared with norm_exponent.
NormFitResult fit_operator_norm(const HeatKernelPlan& plan, OperatorKind kind, double p, double q,
                                const NormFitOptions& options = {});

/// Empirical decay rate delta in |e^{(Delta - sigma)t} d/dx|_{p->q} ~ C t^{target} e^{-delta t}
/// over the given (large) times. Reported only; no acceptance threshold.
double fit_decay_rate(const HeatKernelPlan& plan, double p, double q, double sigma, const std::vector<double>& t_grid,
                      double nodes_per_unit_length = 50.0, std::size_t n_probes = 64, std::uint64_t seed = 1);

}  // namespace ksg
