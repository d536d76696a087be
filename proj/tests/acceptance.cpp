// Acceptance run: one line per criterion with the measured quantities,
// the threshold and the wall time. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ksg/diagnostics.hpp"
#include "ksg/error.hpp"
#include "ksg/heat_kernel.hpp"
#include "ksg/laplacian.hpp"
#include "ksg/solver.hpp"
#include "secular.hpp"
#include "support.hpp"

using namespace ksg;
using namespace ksg::testing;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1. path-sum kernel vs images on [0, 1]
Outcome kernel_vs_images() {
  auto g = interval();
  HeatKernelPlan plan(g, 0.1, 1e-12);
  double worst = 0.0;
  for (double t : {0.01, 0.05, 0.1})
    for (int i = 0; i <= 50; ++i)
      for (int j = 0; j <= 50; ++j) {
        const double x = i / 50.0, y = j / 50.0;
        worst = std::max(worst, std::abs(eval_kernel(plan, t, {0, x}, {0, y}) - images_kernel(t, x, y)));
      }
  return {worst <= 1e-10, "max |K - K_images| = " + fmt("%.2e", worst) + " (<= 1e-10)"};
}

// 2. apply_heat vs full spectral synthesis on the 3-star
Outcome kernel_vs_spectral() {
  auto g = star3();
  auto lap = assemble(g, 200.0);
  auto mesh = lap.mesh_ptr();
  const auto dec = eigendecompose(lap, lap.size());
  HeatKernelPlan plan(g, 1.0, 1e-12);
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int probe = 0; probe < 3; ++probe) {
    const auto u = random_smooth(mesh, rng);
    for (double t : {0.05, 0.2, 1.0})
      worst = std::max(worst, max_abs_diff(apply_heat(plan, t, 0.0, u),
                                           spectral_heat(dec, t, 0.0, u, SpectrumScale::Continuum)));
  }
  return {worst <= 1e-6, "max |heat - spectral| = " + fmt("%.2e", worst) + " (<= 1e-6)"};
}

// 3. stochasticity, symmetry, semigroup
Outcome kernel_properties() {
  auto g = star3();
  HeatKernelPlan plan(g, 0.3, 1e-12);
  auto mesh = std::make_shared<const Mesh>(g, 200.0);
  double row = 0.0;
  for (double t : {0.01, 0.05, 0.2}) {
    const Eigen::MatrixXd m = plan.build_matrix(*mesh, t, KernelKind::Heat);
    row = std::max(row, (m.rowwise().sum().array() - 1.0).abs().maxCoeff());
  }
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> pick(0, g->edge_count() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double sym = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const EdgePoint x{pick(rng), unit(rng)}, y{pick(rng), unit(rng)};
    const double t = 0.005 + 0.295 * unit(rng);
    sym = std::max(sym, std::abs(eval_kernel(plan, t, x, y) - eval_kernel(plan, t, y, x)));
  }
  double semi = 0.0;
  for (int probe = 0; probe < 64; ++probe) {
    const auto u = random_smooth(mesh, rng);
    const auto a = apply_heat(plan, 0.1, 0.0, apply_heat(plan, 0.05, 0.0, u));
    semi = std::max(semi, max_abs_diff(a, apply_heat(plan, 0.15, 0.0, u)));
  }
  const bool ok = row <= 1e-8 && sym <= 1e-10 && semi <= 1e-6;
  return {ok, "row sum " + fmt("%.1e", row) + " (<= 1e-8), symmetry " + fmt("%.1e", sym) + " (<= 1e-10), semigroup " +
                  fmt("%.1e", semi) + " (<= 1e-6, 64 probes)"};
}

// 4. log-log slopes of empirical operator norms
Outcome norm_exponents() {
  struct Pair {
    OperatorKind kind;
    double p, q;
  };
  const std::vector<Pair> pairs{{OperatorKind::HeatDx, 1, 1},
                                {OperatorKind::HeatDx, 2, 2},
                                {OperatorKind::HeatDx, 1, 2},
                                {OperatorKind::Heat, 1, 2},
                                {OperatorKind::Heat, 2, kInfinity}};
  bool ok = true;
  std::ostringstream os;
  for (auto [name, g] : {std::pair{"interval", interval()}, std::pair{"star", star3()}}) {
    HeatKernelPlan plan(g, 0.1, 1e-14);
    os << name << ":";
    for (const auto& p : pairs) {
      const auto r = fit_operator_norm(plan, p.kind, p.p, p.q);
      ok = ok && r.pass;
      os << ' ' << to_string(p.kind) << '(' << p.p << ',' << (std::isinf(p.q) ? std::string("inf") : fmt("%g", p.q))
         << ")=" << fmt("%.3f", r.slope) << '/' << fmt("%.2f", r.target) << (r.pass ? "" : "!");
    }
    os << ' ';
  }
  return {ok, os.str() + "(tol 0.05)"};
}

// 5. Neumann interval O(h^2) and star secular equation
Outcome spectrum() {
  std::vector<double> errs;
  for (double density : {100.0, 200.0, 400.0}) {
    const auto dec = eigendecompose(assemble(interval(pi), density), 6);
    double err = 0.0;
    for (int n = 1; n < 6; ++n) err = std::max(err, std::abs(dec.eigenvalues[n] + n * n));
    errs.push_back(err);
  }
  const double slope = std::log(errs[0] / errs[2]) / std::log(4.0);
  const auto dec = eigendecompose(assemble(star3(), 400.0), 12);
  const Eigen::VectorXd cont = dec.continuum_eigenvalues();
  const auto oracle = star_eigenvalues({1.0, 1.0, 1.0}, 12);
  double sec = 0.0;
  for (std::size_t j = 0; j < 12; ++j) sec = std::max(sec, std::abs(cont[static_cast<Eigen::Index>(j)] - oracle[j]));
  const bool ok = std::abs(slope - 2.0) <= 0.2 && sec <= 1e-6;
  return {ok, "interval slope " + fmt("%.3f", slope) + " (2 +- 0.2), star vs secular " + fmt("%.1e", sec) + " (<= 1e-6)"};
}

GridFunction star_u0(std::shared_ptr<const Mesh> m) { return bump(m, 0, 0.5, 0.06, 3.0) + bump(m, 2, 0.45, 0.06, 1.0); }
GridFunction star_v0(std::shared_ptr<const Mesh> m) { return bump(m, 1, 0.5, 0.06, 1.0); }

// 6. mass and positivity, minimal model, both solvers, t_end = 5
Outcome conservation() {
  auto g = star3();
  auto nl = make_minimal(1.0);
  SolverConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 5.0;
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto lap = assemble(g, 80.0);
  auto mesh = lap.mesh_ptr();
  const auto u0 = star_u0(mesh), v0 = star_v0(mesh);
  const double m0 = mass(u0);
  auto measure = [&](const SolveResult& r, double& rate, double& low) {
    rate = 0.0;
    low = 0.0;
    if (r.status != SolveStatus::Completed) rate = kInfinity;
    for (const auto& d : r.diagnostics) {
      if (d.t > 0) rate = std::max(rate, std::abs(d.mass_u - m0) / d.t);
      low = std::min(low, d.min_u);
    }
  };
  double rm, lm, rr, lr;
  measure(solve_mild(plan, nl, u0, v0, cfg), rm, lm);
  cfg.dt = 2e-4;
  cfg.record_interval = 0.01;
  measure(solve_reference(lap, nl, u0, v0, cfg), rr, lr);
  const bool ok = rm <= 1e-7 && rr <= 1e-7 && lm >= -1e-8 && lr >= -1e-8;
  return {ok, "drift/time mild " + fmt("%.1e", rm) + " ref " + fmt("%.1e", rr) + " (<= 1e-7), min u mild " +
                  fmt("%.2e", lm) + " ref " + fmt("%.2e", lr) + " (>= -1e-8)"};
}

// 7. spatially constant data reduce to the ODE
Outcome homogeneous() {
  auto g = star3();
  auto nl = make_logistic(LogisticPreset{});
  const double exact = 0.5 * std::exp(1.0) / (1.0 + 0.5 * (std::exp(1.0) - 1.0));
  SolverConfig cfg;
  cfg.dt = 2e-3;
  cfg.t_end = 1.0;
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto lap = assemble(g, 4.0);
  auto mesh = lap.mesh_ptr();
  const auto u0 = GridFunction::constant(mesh, 0.5), v0 = GridFunction::constant(mesh, 0.2);
  auto mild = solve_mild(plan, nl, u0, v0, cfg);
  const double em = (mild.u_series.back().values().array() - exact).abs().maxCoeff();
  cfg.dt = 1e-5;
  cfg.record_interval = 0.1;
  auto ref = solve_reference(lap, nl, u0, v0, cfg);
  const double er = (ref.u_series.back().values().array() - exact).abs().maxCoeff();

  SolverConfig bc;
  bc.t_end = 2.0;
  auto blow = solve_mild(plan, make_quadratic(0.0), GridFunction::constant(mesh, 1.0), GridFunction(mesh), bc);
  const bool fired = blow.status == SolveStatus::BlowUpDetected;
  const double te = blow.blowup_time_estimate;
  const bool ok = em <= 1e-6 && er <= 1e-6 && fired && te >= 0.9 && te <= 1.1;
  return {ok, "logistic ODE error mild " + fmt("%.1e", em) + " ref " + fmt("%.1e", er) + " (<= 1e-6), u^2 blow-up " +
                  (fired ? "fired" : "missed") + " t_est " + fmt("%.4f", te) + " ([0.9, 1.1])"};
}

GridFunction logistic_u0(std::shared_ptr<const Mesh> m) {
  const double width = 0.1;
  return bump(m, 0, 0.5, width, 5.0 / (width * std::sqrt(pi)));
}

// 8. logistic global bounds to t = 50
Outcome logistic_bounds() {
  auto g = star3();
  LogisticPreset lp;
  auto nl = make_logistic(lp);
  SolverConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 50.0;
  cfg.nodes_per_unit_length = 40.0;
  cfg.record_interval = 0.05;
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto mesh = std::make_shared<const Mesh>(g, cfg.nodes_per_unit_length);
  const auto u0 = logistic_u0(mesh);
  auto r = solve_mild(plan, nl, u0, GridFunction(mesh), cfg);
  if (r.status != SolveStatus::Completed) return {false, "run did not complete"};
  double peak_mass = 0.0;
  for (const auto& d : r.diagnostics) peak_mass = std::max(peak_mass, d.mass_u);
  const double bound = std::max(mass(u0), logistic_mass_root(lp.k, lp.l, lp.m, lp.eps, g->total_length()));
  try {
    const auto rep = check_logistic_bounds(r, lp, 10.0);
    return {true, "max mass " + fmt("%.4f", peak_mass) + " <= 1.001 * " + fmt("%.4f", bound) + ", sup |u|_inf " +
                      fmt("%.3f", rep.sup_linf) + ", envelope rise " + fmt("%.1e", rep.envelope_max_rise) +
                      " (slack 1e-3)"};
  } catch (const Error& e) {
    return {false, e.what()};
  }
}

// 9. mild vs reference under (dt, h) halving
Outcome cross_solver() {
  auto g = star3();
  auto nl = make_minimal(1.0);
  std::vector<double> diffs;
  for (auto [dt, npul] : std::vector<std::pair<double, double>>{{0.01, 20}, {0.005, 40}, {0.0025, 80}}) {
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 0.5;
    HeatKernelPlan plan(g, 8 * dt * 1.01, 1e-14);
    auto lap = assemble(g, npul);
    auto m = lap.mesh_ptr();
    const auto u0 = bump(m, 0, 0.5, 0.12, 2.0) + GridFunction::constant(m, 0.5);
    const auto v0 = bump(m, 1, 0.5, 0.12, 0.2);
    diffs.push_back(max_abs_diff(solve_mild(plan, nl, u0, v0, cfg).u_series.back(),
                                 solve_reference(lap, nl, u0, v0, cfg).u_series.back()));
  }
  const double o1 = std::log2(diffs[0] / diffs[1]), o2 = std::log2(diffs[1] / diffs[2]);
  return {std::min(o1, o2) >= 0.9, "diffs " + fmt("%.2e", diffs[0]) + ", " + fmt("%.2e", diffs[1]) + ", " +
                                       fmt("%.2e", diffs[2]) + ", orders " + fmt("%.2f", o1) + ", " + fmt("%.2f", o2) +
                                       " (>= 0.9)"};
}

// 10. Picard contraction factor vs window length
Outcome contraction() {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 40.0);
  auto nl = make_logistic(LogisticPreset{});
  const auto u0 = logistic_u0(mesh);
  std::vector<double> f;
  for (double tw : {0.05, 0.025, 0.0125}) {
    SolverConfig cfg;
    cfg.dt = tw / 4;
    cfg.window_steps = cfg.max_window_steps = 4;
    cfg.t_end = tw;
    HeatKernelPlan plan(g, tw * 1.01, 1e-14);
    auto r = solve_mild(plan, nl, u0, GridFunction(mesh), cfg);
    f.push_back(r.status == SolveStatus::Completed ? r.diagnostics.back().contraction_factor : kInfinity);
  }
  const bool ok = f[0] < 1.0 && f[1] < f[0] && f[2] < f[1];
  return {ok, "factors at T_win 0.05, 0.025, 0.0125: " + fmt("%.3f", f[0]) + ", " + fmt("%.3f", f[1]) + ", " +
                  fmt("%.3f", f[2]) + " (< 1, decreasing)"};
}

// 11. frozen-coefficient linear solve reproduces u
Outcome frozen() {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 160.0);
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto nl = make_minimal(1.0);
  SolverConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 0.05;
  const auto u0 = bump(mesh, 0, 0.5, 0.1, 1.0) + GridFunction::constant(mesh, 0.5);
  const auto v0 = bump(mesh, 1, 0.5, 0.1, 0.5) + bump(mesh, 0, 0.3, 0.1, 0.3);
  auto r = solve_mild(plan, nl, u0, v0, cfg);
  TimePath a, b;
  double min_u = kInfinity;
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    min_u = std::min(min_u, r.u_series[i].values().minCoeff());
    auto fc = frozen_coefficients(nl, r.u_series[i], r.v_series[i], cfg.sigma_shift);
    a.times.push_back(r.times[i]);
    a.values.push_back(fc.a);
    b.times.push_back(r.times[i]);
    b.values.push_back(fc.b);
  }
  auto lin = solve_linear_nonautonomous(plan, a, b, u0, 0.0, cfg.sigma_shift, cfg);
  double err = 0.0;
  for (std::size_t i = 0; i < r.times.size() && i < lin.times.size(); ++i)
    err = std::max(err, max_abs_diff(lin.u_series[i], r.u_series[i]));
  const bool ok = lin.times.size() == 6 && err <= 1e-4 && min_u >= 0.1;
  return {ok, "5 steps, max |u_lin - u| = " + fmt("%.1e", err) + " (<= 1e-4), min u " + fmt("%.3f", min_u) +
                  " (>= 0.1)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "kernel vs images", 5.0, kernel_vs_images},
      {2, "kernel vs spectral", 30.0, kernel_vs_spectral},
      {3, "stochastic, symmetric, semigroup", 0.0, kernel_properties},
      {4, "norm exponents", 180.0, norm_exponents},
      {5, "spectrum", 0.0, spectrum},
      {6, "conservation and positivity", 0.0, conservation},
      {7, "homogeneous reduction", 0.0, homogeneous},
      {8, "logistic global bounds", 300.0, logistic_bounds},
      {9, "cross-solver agreement", 0.0, cross_solver},
      {10, "Picard contraction", 0.0, contraction},
      {11, "frozen coefficients", 0.0, frozen},
  };
  int failures = 0;
  for (const auto& c : all) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string limit;
    if (c.budget_s > 0) {
      limit = ", limit " + fmt("%.0f", c.budget_s) + " s";
      if (secs > c.budget_s) o.pass = false;
    }
    if (!o.pass) ++failures;
    std::printf("%s  %2d  %-34s %7.2f s%s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, limit.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failures, all.size());
  return failures;
}
