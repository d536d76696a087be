#include "ksg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ksg/error.hpp"
#include "ksg/parallel.hpp"

namespace ksg {

namespace {

double weighted_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& w, double p) {
  if (std::isinf(p)) return x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  if (p == 1.0) return x.cwiseAbs().dot(w);
  if (p == 2.0) return std::sqrt(x.cwiseAbs2().dot(w));
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += w[i] * std::pow(std::abs(x[i]), p);
  return std::pow(s, 1.0 / p);
}

void check_p(double p) {
  if (!(p >= 1.0)) fail(ErrorKind::InvalidArgument, "norm exponent must be >= 1, got " + std::to_string(p));
}

}  // namespace

double lp_norm(const GridFunction& u, double p) {
  check_p(p);
  return weighted_norm(u.values(), u.mesh().trapezoid_weights(), p);
}

double w1p_norm(const GridFunction& u, double p) {
  check_p(p);
  const double a = lp_norm(u, p);
  const double b = lp_norm(edge_derivative(u), p);
  if (std::isinf(p)) return std::max(a, b);
  return std::pow(std::pow(a, p) + std::pow(b, p), 1.0 / p);
}

double mass(const GridFunction& u) { return u.values().dot(u.mesh().trapezoid_weights()); }

OdeBoundType l1_ode_bound_type(double l, double m) noexcept {
  if (m > 0.0) return OdeBoundType::Stationary;
  if (l > 0.0) return OdeBoundType::Exponential;
  return OdeBoundType::Linear;
}

double logistic_mass_root(double k, double l, double m, double eps, double graph_length) {
  if (!(m > 0.0)) fail(ErrorKind::InvalidArgument, "mass root needs m > 0");
  const double scale = m * std::pow(graph_length, -eps);
  auto f = [&](double x) { return k * graph_length + l * x - scale * std::pow(x, 1.0 + eps); };
  if (k == 0.0 && l == 0.0) return 0.0;
  // f(0+) >= 0 and f -> -inf; bracket the sign change.
  double lo = 0.0, hi = 1.0;
  while (f(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-10 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double l1_ode_bound(double u0_mass, double k, double l, double m, double eps, double graph_length, double t) {
  if (!(k >= 0 && l >= 0 && m >= 0 && eps > 0 && graph_length > 0 && u0_mass >= 0 && t >= 0))
    fail(ErrorKind::InvalidArgument, "l1_ode_bound needs nonnegative parameters, eps > 0 and |G| > 0");
  switch (l1_ode_bound_type(l, m)) {
    case OdeBoundType::Stationary:
      return std::max(u0_mass, logistic_mass_root(k, l, m, eps, graph_length));
    case OdeBoundType::Exponential: {
      const double e = std::exp(l * t);
      return e * u0_mass + k * graph_length / l * (e - 1.0);
    }
    case OdeBoundType::Linear:
      return u0_mass + k * graph_length * t;
  }
  return 0.0;
}

LogisticReport check_logistic_bounds(const SolveResult& result, const LogisticPreset& preset, double settle_time) {
  if (result.u_series.empty()) fail(ErrorKind::InvalidArgument, "empty solve result");
  const double len = result.u_series.front().graph().total_length();
  const double m0 = mass(result.u_series.front());
  LogisticReport rep;
  rep.settle_time = settle_time;
  rep.worst_margin = -kInfinity;
  const double qs[4] = {1, 2, 4, 8};
  for (double q : qs) rep.sup_lq.push_back({q, 0.0});
  for (std::size_t i = 0; i < result.times.size(); ++i) {
    const GridFunction& u = result.u_series[i];
    const double t = result.times[i];
    const double bound = l1_ode_bound(m0, preset.k, preset.l, preset.m, preset.eps, len, t);
    const double margin = mass(u) - bound * (1.0 + 1e-3);
    if (margin > rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_time = t;
    }
    for (auto& [q, sup] : rep.sup_lq) sup = std::max(sup, lp_norm(u, q));
    const double linf = lp_norm(u, kInfinity);
    if (!std::isfinite(linf)) rep.bounded = false;
    rep.sup_linf = std::max(rep.sup_linf, linf);
  }
  if (rep.worst_margin > 0.0)
    fail(ErrorKind::BoundViolated, "mass exceeds the comparison bound by " + std::to_string(rep.worst_margin) +
                                       " at t = " + std::to_string(rep.worst_time));
  if (preset.m > 0.0) {
    if (!rep.bounded) fail(ErrorKind::BoundViolated, "sup |u|_inf is not finite");
    // Block maxima of |u|_inf over unit time blocks after settling.
    std::vector<double> blocks;
    double block_start = settle_time;
    double cur = -1.0;
    for (std::size_t i = 0; i < result.times.size(); ++i) {
      const double t = result.times[i];
      if (t < settle_time) continue;
      while (t >= block_start + 1.0) {
        if (cur >= 0.0) blocks.push_back(cur);
        cur = -1.0;
        block_start += 1.0;
      }
      cur = std::max(cur, lp_norm(result.u_series[i], kInfinity));
    }
    if (cur >= 0.0) blocks.push_back(cur);
    for (std::size_t b = 1; b < blocks.size(); ++b)
      rep.envelope_max_rise = std::max(rep.envelope_max_rise, blocks[b] / blocks[b - 1] - 1.0);
    // Same relative slack as the mass bound: a monotone approach to the
    // constant steady state from below is convergence, not growth.
    for (std::size_t b = 1; b < blocks.size(); ++b) {
      if (blocks[b] > blocks[b - 1] * (1.0 + 1e-3) + 1e-12) {
        rep.envelope_nonincreasing = false;
        fail(ErrorKind::BoundViolated, "|u|_inf envelope increases after t = " + std::to_string(settle_time) +
                                           " (block " + std::to_string(b) + ": " + std::to_string(blocks[b - 1]) +
                                           " -> " + std::to_string(blocks[b]) + ")");
      }
    }
  }
  return rep;
}

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Heat: return "heat";
    case OperatorKind::HeatDx: return "heat_dx";
    case OperatorKind::DxHeat: return "dx_heat";
  }
  return "heat";
}

OperatorKind operator_kind_from_string(const std::string& name) {
  if (name == "heat") return OperatorKind::Heat;
  if (name == "heat_dx") return OperatorKind::HeatDx;
  if (name == "dx_heat") return OperatorKind::DxHeat;
  fail(ErrorKind::InvalidArgument, "unknown operator kind '" + name + "' (heat, heat_dx, dx_heat)");
}

double norm_exponent(OperatorKind kind, double p, double q) {
  const double base = -0.5 * (1.0 / p - (std::isinf(q) ? 0.0 : 1.0 / q));
  return kind == OperatorKind::Heat ? base : base - 0.5;
}

namespace {

KernelKind kernel_kind(OperatorKind k) {
  switch (k) {
    case OperatorKind::Heat: return KernelKind::Heat;
    case OperatorKind::HeatDx: return KernelKind::HeatDx;
    case OperatorKind::DxHeat: return KernelKind::DxHeat;
  }
  return KernelKind::Heat;
}

// Columns are probes in the edge layout, not yet normalised.
Eigen::MatrixXd make_probes(const Mesh& mesh, std::size_t n_random, std::uint64_t seed) {
  const MetricGraph& g = mesh.graph();
  const auto n = static_cast<Eigen::Index>(mesh.size());
  std::vector<Eigen::VectorXd> cols;

  // Deterministic part: the constant and a spike at every vertex, both as a
  // single edge-end and shared by all ends.
  cols.push_back(Eigen::VectorXd::Ones(n));
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    Eigen::VectorXd all = Eigen::VectorXd::Zero(n);
    for (const EdgeEnd& end : g.incidence(v)) {
      const std::size_t j = end.at_start ? 0 : mesh.intervals(end.edge);
      Eigen::VectorXd one = Eigen::VectorXd::Zero(n);
      one[static_cast<Eigen::Index>(mesh.flat_index(end.edge, j))] = 1.0;
      all[static_cast<Eigen::Index>(mesh.flat_index(end.edge, j))] = 1.0;
      cols.push_back(one);
    }
    cols.push_back(all);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_edge(0, g.edge_count() - 1);
  const double widths[5] = {2.0, 5.0, 12.0, 30.0, 80.0};  // in units of h
  for (std::size_t k = 0; k < n_random; ++k) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    const int family = static_cast<int>(k % 3);
    const EdgeIndex e = pick_edge(rng);
    const double len = g.length(e);
    const double h = mesh.spacing(e);
    const std::size_t ne = mesh.intervals(e);
    if (family == 0) {
      // Gaussian bump on one edge.
      const double w = std::min(len, widths[static_cast<std::size_t>(unit(rng) * 5.0) % 5] * h);
      const double centre = unit(rng) * len;
      for (std::size_t j = 0; j <= ne; ++j) {
        const double z = (mesh.position(e, j) - centre) / w;
        c[static_cast<Eigen::Index>(mesh.flat_index(e, j))] = std::exp(-z * z);
      }
    } else if (family == 1) {
      // Haar-like: sign pattern of a dyadic level on every edge, random signs per edge.
      const int level = static_cast<int>(unit(rng) * 6.0);
      for (EdgeIndex f = 0; f < g.edge_count(); ++f) {
        const double sgn = unit(rng) < 0.5 ? -1.0 : 1.0;
        const double lf = g.length(f);
        for (std::size_t j = 0; j <= mesh.intervals(f); ++j) {
          const double x = mesh.position(f, j) / lf;
          const auto cell = static_cast<long>(std::floor(x * std::ldexp(1.0, level)));
          c[static_cast<Eigen::Index>(mesh.flat_index(f, j))] = sgn * ((cell % 2 == 0) ? 1.0 : -1.0);
        }
      }
    } else {
      // Narrow spike a few nodes from an edge end.
      const std::size_t off = static_cast<std::size_t>(unit(rng) * 4.0);
      const std::size_t width = 1 + static_cast<std::size_t>(unit(rng) * 3.0);
      const bool start = unit(rng) < 0.5;
      for (std::size_t d = 0; d < width && off + d <= ne; ++d) {
        const std::size_t j = start ? off + d : ne - off - d;
        c[static_cast<Eigen::Index>(mesh.flat_index(e, j))] = 1.0;
      }
    }
    cols.push_back(c);
  }
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = cols[k];
  return out;
}

// Boyd's power method for |A|_{p->q}, 1 < p, q < inf, with input weights
// wi and output weights wo.
double boyd_refine(const Eigen::MatrixXd& a, const Eigen::VectorXd& wi, const Eigen::VectorXd& wo, double p,
                   double q, Eigen::VectorXd x) {
  const double pd = p / (p - 1.0);
  double best = 0.0;
  for (int it = 0; it < 60; ++it) {
    x /= weighted_norm(x, wi, p);
    const Eigen::VectorXd y = a * x;
    const double val = weighted_norm(y, wo, q);
    if (!(val > best * (1.0 + 1e-12))) {
      best = std::max(best, val);
      break;
    }
    best = val;
    Eigen::VectorXd phi(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
      phi[i] = wo[i] * std::pow(std::abs(y[i]), q - 1.0) * (y[i] < 0 ? -1.0 : 1.0);
    const Eigen::VectorXd z = a.transpose() * phi;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double s = z[j] / wi[j];
      x[j] = std::pow(std::abs(s), pd - 1.0) * (s < 0 ? -1.0 : 1.0);
    }
  }
  return best;
}

// Quadrature weights the kernel matrix applies to its input at time t:
// Simpson where the Gaussian is resolved, hat-function (trapezoid) weights
// where the small-time branch integrates the piecewise-linear interpolant.
Eigen::VectorXd input_weights(const Mesh& mesh, double t) {
  Eigen::VectorXd w = mesh.simpson_weights();
  const Eigen::VectorXd& trap = mesh.trapezoid_weights();
  for (EdgeIndex e = 0; e < mesh.graph().edge_count(); ++e) {
    if (t >= HeatKernelPlan::small_time_threshold(mesh.spacing(e))) continue;
    for (std::size_t j = 0; j <= mesh.intervals(e); ++j) {
      const auto k = static_cast<Eigen::Index>(mesh.flat_index(e, j));
      w[k] = trap[k];
    }
  }
  return w;
}

}  // namespace

double empirical_operator_norm(const HeatKernelPlan& plan, const std::shared_ptr<const Mesh>& mesh, OperatorKind kind,
                               double p, double q, double t, std::size_t n_probes, std::uint64_t seed, double sigma) {
  check_p(p);
  check_p(q);
  const Eigen::MatrixXd a = std::exp(-sigma * t) * plan.build_matrix(*mesh, t, kernel_kind(kind));
  // Inputs are measured with the weights the matrix integrates them with,
  // outputs with the trapezoid rule used by lp_norm.
  const Eigen::VectorXd wi = input_weights(*mesh, t);
  const Eigen::VectorXd& wo = mesh->trapezoid_weights();

  // The unit L^1 ball is the hull of node spikes, and |.|_inf is attained
  // row by row, so both cases are exact maxima over finite sets.
  if (p == 1.0) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) best = std::max(best, weighted_norm(a.col(j), wo, q) / wi[j]);
    return best;
  }
  if (std::isinf(q)) {
    const double pd = std::isinf(p) ? 1.0 : p / (p - 1.0);
    double best = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      best = std::max(best, weighted_norm(a.row(i).transpose().cwiseQuotient(wi), wi, pd));
    return best;
  }

  Eigen::MatrixXd probes = make_probes(*mesh, n_probes, seed);
  const Eigen::MatrixXd images = a * probes;
  // Polish every probe that beats all probes before it. Record setters of a
  // prefix stay record setters when probes are appended, so enlarging the
  // probe set never lowers the estimate.
  double best = 0.0;
  std::vector<Eigen::Index> records;
  for (Eigen::Index k = 0; k < probes.cols(); ++k) {
    const double np = weighted_norm(probes.col(k), wi, p);
    if (np == 0.0) continue;
    const double ratio = weighted_norm(images.col(k), wo, q) / np;
    if (ratio > best) {
      best = ratio;
      records.push_back(k);
    }
  }
  if (std::isinf(p)) return best;
  for (Eigen::Index k : records) best = std::max(best, boyd_refine(a, wi, wo, p, q, probes.col(k)));
  return best;
}

namespace {

void linear_fit(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept,
                double& rms) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  slope = sxx > 0 ? sxy / sxx : 0.0;
  intercept = my - slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (intercept + slope * x[i]);
    ss += r * r;
  }
  rms = std::sqrt(ss / n);
}

std::vector<double> default_grid() {
  std::vector<double> t;
  for (int i = 0; i < 12; ++i) t.push_back(1e-3 * std::pow(100.0, i / 11.0));
  return t;
}

}  // namespace

NormFitResult fit_operator_norm(const HeatKernelPlan& plan, OperatorKind kind, double p, double q,
                                const NormFitOptions& options) {
  const std::vector<double> grid = options.t_grid.empty() ? default_grid() : options.t_grid;
  if (grid.size() < 2) fail(ErrorKind::InvalidArgument, "norm fit needs at least two times");
  if (options.n_probes < 32) fail(ErrorKind::InvalidArgument, "norm fit needs at least 32 probes");
  auto mesh = std::make_shared<const Mesh>(plan.graph_ptr(), options.nodes_per_unit_length);
  NormFitResult r;
  r.kind = kind;
  r.p = p;
  r.q = q;
  r.target = norm_exponent(kind, p, q);
  r.tolerance = options.tolerance;
  for (double t : grid) {
    if (!(t > 0.0 && t <= plan.horizon() * (1.0 + 1e-12)))
      fail(ErrorKind::InvalidArgument, "norm fit time " + std::to_string(t) + " outside (0, horizon]");
    const double norm = empirical_operator_norm(plan, mesh, kind, p, q, t, options.n_probes, options.seed, options.sigma);
    r.log_t.push_back(std::log(t));
    r.log_norm.push_back(std::log(norm));
  }
  linear_fit(r.log_t, r.log_norm, r.slope, r.intercept, r.residual);
  r.pass = std::abs(r.slope - r.target) <= r.tolerance && r.residual <= options.residual_limit;
  return r;
}

double fit_decay_rate(const HeatKernelPlan& plan, double p, double q, double sigma, const std::vector<double>& t_grid,
                      double nodes_per_unit_length, std::size_t n_probes, std::uint64_t seed) {
  if (t_grid.size() < 2) fail(ErrorKind::InvalidArgument, "decay fit needs at least two times");
  auto mesh = std::make_shared<const Mesh>(plan.graph_ptr(), nodes_per_unit_length);
  const double target = norm_exponent(OperatorKind::HeatDx, p, q);
  std::vector<double> x, y;
  for (double t : t_grid) {
    const double norm = empirical_operator_norm(plan, mesh, OperatorKind::HeatDx, p, q, t, n_probes, seed, sigma);
    x.push_back(t);
    y.push_back(std::log(norm) - target * std::log(t));
  }
  double slope = 0, intercept = 0, rms = 0;
  linear_fit(x, y, slope, intercept, rms);
  return -slope;
}

}  // namespace ksg
