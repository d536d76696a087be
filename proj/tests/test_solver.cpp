#include <cmath>
#include <functional>
#include <numbers>

#include "doctest.h"
#include "ksg/diagnostics.hpp"
#include "ksg/error.hpp"
#include "ksg/solver.hpp"
#include "support.hpp"

using namespace ksg;
using namespace ksg::testing;

namespace {

using std::numbers::pi;

// Classical RK4 for a scalar autonomous ODE; the step is small enough that
// its error (~1e-14) is far below the tolerances checked against it.
double rk4(const std::function<double(double)>& f, double y, double t_end, int steps = 20000) {
  const double h = t_end / steps;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(y), k2 = f(y + 0.5 * h * k1), k3 = f(y + 0.5 * h * k2), k4 = f(y + h * k3);
    y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

TimePath sampled(std::shared_ptr<const Mesh> mesh, double dt, int n,
                 const std::function<double(double t, EdgeIndex, double)>& f) {
  TimePath p;
  for (int k = 0; k <= n; ++k) {
    const double t = dt * k;
    p.times.push_back(t);
    p.values.push_back(GridFunction::sample(mesh, [&](EdgeIndex e, double xi) { return f(t, e, xi); }));
  }
  return p;
}

double max_dev(const GridFunction& u, double c) { return (u.values().array() - c).abs().maxCoeff(); }

// Smooth data on the 3-star whose values and derivatives vanish at the vertices.
GridFunction star_u0(std::shared_ptr<const Mesh> mesh) {
  return bump(mesh, 0, 0.5, 0.06, 3.0) + bump(mesh, 2, 0.45, 0.06, 1.0);
}
GridFunction star_v0(std::shared_ptr<const Mesh> mesh) { return bump(mesh, 1, 0.5, 0.06, 1.0); }

}  // namespace

TEST_CASE("psi with constant u is the scalar relaxation") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 10.0);
  HeatKernelPlan plan(g, 0.5, 1e-14);
  const double c = 2.0;
  for (double tau : {1.0, 2.0}) {
    auto nl = make_minimal(1.0, Regime::ParabolicParabolic, tau, 1.0);
    const double dt = 0.05;
    auto exact = [&](double t) { return c * (1.0 - std::exp(-t / tau)); };
    auto u = sampled(mesh, dt, 10, [&](double, EdgeIndex, double) { return c; });
    auto v = sampled(mesh, dt, 10, [&](double t, EdgeIndex, double) { return exact(t); });
    auto psi = duhamel_psi(plan, nl, 1.0, GridFunction(mesh), u, v);
    CAPTURE(tau);
    CHECK(max_dev(psi, exact(0.5)) <= 1e-8);
  }
}

TEST_CASE("psi at t = 0 returns v0") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 10.0);
  HeatKernelPlan plan(g, 0.5, 1e-14);
  auto v0 = star_v0(mesh);
  TimePath u{{0.0}, {GridFunction::constant(mesh, 1.0)}};
  TimePath v{{0.0}, {v0}};
  auto psi = duhamel_psi(plan, make_minimal(1.0), 1.0, v0, u, v);
  CHECK(max_abs_diff(psi, v0) <= 1e-14);
  TimePath single{{0.1}, {v0}};
  CHECK_THROWS_AS(duhamel_psi(plan, make_minimal(1.0), 1.0, v0, single, single), Error);
}

TEST_CASE("phi reduces to the heat semigroup") {
  // On [0, 1] with u(s) = 1 + e^{-pi^2 s} cos(pi x) the shifted Duhamel form
  // reproduces e^{t Delta} u0 exactly; only the time interpolation errs.
  auto g = interval();
  auto mesh = std::make_shared<const Mesh>(g, 40.0);
  HeatKernelPlan plan(g, 0.2, 1e-14);
  auto exact = [](double t, EdgeIndex, double x) { return 1.0 + std::exp(-pi * pi * t) * std::cos(pi * x); };
  const double dt = 0.001;
  auto u = sampled(mesh, dt, 100, exact);
  auto phi = duhamel_phi(plan, make_heat(), 1.0, u.values.front(), u, u);
  auto want = GridFunction::sample(mesh, [&](EdgeIndex e, double x) { return exact(0.1, e, x); });
  CHECK(max_abs_diff(phi, want) <= 1e-6);
}

TEST_CASE("chemotaxis of constants vanishes") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 10.0);
  HeatKernelPlan plan(g, 0.5, 1e-14);
  const double c = 1.5;
  auto u = sampled(mesh, 0.05, 6, [&](double, EdgeIndex, double) { return c; });
  auto v = sampled(mesh, 0.05, 6, [&](double, EdgeIndex, double) { return 0.7; });
  auto phi = duhamel_phi(plan, make_minimal(5.0), 1.0, u.values.front(), u, v);
  CHECK(max_dev(phi, c) <= 1e-10);

  auto nl = make_minimal(5.0, Regime::ParabolicElliptic, 1.0, 2.0);
  auto lap = assemble(g, 10.0);
  auto theta = duhamel_theta(plan, nl, 1.0, lap, u.values.front(), u);
  CHECK(max_dev(theta, c) <= 1e-10);
}

TEST_CASE("mild solver in the heat limit") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 40.0);
  HeatKernelPlan plan(g, 0.1, 1e-14);
  SolverConfig cfg;
  cfg.dt = 0.005;  // sigma_shift = 1 puts u in the Duhamel integral; its time error is O(dt^2)
  cfg.t_end = 0.3;
  auto u0 = star_u0(mesh);
  auto r = solve_mild(plan, make_heat(), u0, star_v0(mesh), cfg);
  REQUIRE(r.status == SolveStatus::Completed);
  CHECK(r.times.back() == doctest::Approx(0.3));
  CHECK(r.times.size() == r.u_series.size());
  CHECK(r.times.size() == r.diagnostics.size());
  HeatKernelPlan long_plan(g, 0.3, 1e-14);
  CHECK(max_abs_diff(r.u_series.back(), apply_heat(long_plan, 0.3, 0.0, u0)) <= 1e-6);
}

TEST_CASE("constant logistic data follow the scalar ODE") {
  auto g = star3();
  LogisticPreset lp;
  lp.chi = 3.0;
  lp.l = 1.0;
  lp.m = 1.0;
  lp.eps = 1.0;
  auto nl = make_logistic(lp);
  const double ode = rk4([&](double y) { return lp.eval_g(y); }, 0.5, 1.0);

  SolverConfig cfg;
  cfg.dt = 2e-3;
  cfg.t_end = 1.0;
  HeatKernelPlan plan(g, 8 * cfg.dt * 1.01, 1e-14);
  auto mesh = std::make_shared<const Mesh>(g, 4.0);
  auto mild = solve_mild(plan, nl, GridFunction::constant(mesh, 0.5), GridFunction::constant(mesh, 0.2), cfg);
  REQUIRE(mild.status == SolveStatus::Completed);
  CHECK(max_dev(mild.u_series.back(), ode) <= 1e-6);

  auto lap = assemble(g, 4.0);
  cfg.dt = 1e-5;
  cfg.record_interval = 0.1;
  auto ref = solve_reference(lap, nl, GridFunction::constant(lap.mesh_ptr(), 0.5),
                             GridFunction::constant(lap.mesh_ptr(), 0.2), cfg);
  CHECK(max_dev(ref.u_series.back(), ode) <= 1e-6);
}

TEST_CASE("mass and positivity in both solvers") {
  auto g = star3();
  auto nl = make_minimal(1.0);
  SolverConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 1.0;
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto mesh = std::make_shared<const Mesh>(g, 80.0);
  auto u0 = star_u0(mesh);
  const double m0 = mass(u0);
  auto check = [&](const SolveResult& r) {
    REQUIRE(r.status == SolveStatus::Completed);
    for (const auto& d : r.diagnostics) {
      CHECK(std::abs(d.mass_u - m0) <= 1e-7 * (1.0 + d.t) * m0);
      CHECK(d.min_u >= -1e-8);
    }
  };
  check(solve_mild(plan, nl, u0, star_v0(mesh), cfg));
  auto lap = assemble(g, 80.0);
  cfg.dt = 2e-4;
  check(solve_reference(lap, nl, u0, star_v0(mesh), cfg));
}

TEST_CASE("quadratic growth blows up near the ODE time") {
  auto g = star3();
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto mesh = std::make_shared<const Mesh>(g, 4.0);
  SolverConfig cfg;
  cfg.t_end = 2.0;
  auto r = solve_mild(plan, make_quadratic(0.0), GridFunction::constant(mesh, 1.0), GridFunction(mesh), cfg);
  REQUIRE(r.status == SolveStatus::BlowUpDetected);
  CHECK(r.blowup_time_estimate >= 0.9);
  CHECK(r.blowup_time_estimate <= 1.1);
  CHECK(r.diagnostics.back().lp_u >= cfg.blowup_threshold);
  CHECK(r.window_halvings > 0);
}

TEST_CASE("detect_blowup") {
  std::vector<double> t, n;
  for (int i = 0; i < 8; ++i) {
    t.push_back(0.1 * i);
    n.push_back(1.0 / (1.0 - 0.1 * i));
  }
  auto quiet = detect_blowup(t, n, 1e6);
  CHECK_FALSE(quiet.fired);
  auto fired = detect_blowup(t, n, 3.0);
  CHECK(fired.fired);
  CHECK(fired.t_est == doctest::Approx(1.0));
  CHECK_THROWS_AS(detect_blowup({0.0, 1.0}, {1.0, 2.0}, 1.0), Error);
}

TEST_CASE("picard divergence is reported") {
  auto g = star3();
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto mesh = std::make_shared<const Mesh>(g, 10.0);
  SolverConfig cfg;
  cfg.picard_max_iters = 2;  // never enough for tol 1e-10
  auto r = solve_mild(plan, make_minimal(1.0), star_u0(mesh), star_v0(mesh), cfg);
  CHECK(r.status == SolveStatus::PicardDiverged);
  CHECK(r.failure_time == 0.0);
  CHECK(r.failure_iteration == 2);
  CHECK(r.window_halvings == 6);
}

TEST_CASE("configuration errors") {
  auto g = star3();
  HeatKernelPlan plan(g, 0.05, 1e-14);
  auto mesh = std::make_shared<const Mesh>(g, 10.0);
  SolverConfig cfg;
  cfg.dt = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SolverConfig{};
  // windows of 8 steps of 0.01 need horizon 0.08
  CHECK_THROWS_AS(solve_mild(plan, make_minimal(1.0), star_u0(mesh), star_v0(mesh), cfg), Error);

  auto lap = assemble(g, 40.0);
  cfg.dt = 0.01;
  try {
    solve_reference(lap, make_minimal(50.0), star_u0(lap.mesh_ptr()), star_v0(lap.mesh_ptr()), cfg);
    FAIL("expected StepUnstable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StepUnstable);
  }
}

TEST_CASE("elliptic regime conserves mass") {
  auto g = star3();
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto mesh = std::make_shared<const Mesh>(g, 80.0);
  auto nl = make_minimal(1.0, Regime::ParabolicElliptic, 1.0, 1.0);
  SolverConfig cfg;
  cfg.t_end = 0.5;
  auto u0 = star_u0(mesh);
  auto r = solve_mild(plan, nl, u0, GridFunction(mesh), cfg);
  REQUIRE(r.status == SolveStatus::Completed);
  CHECK(std::abs(r.diagnostics.back().mass_u - mass(u0)) <= 1e-7 * mass(u0));
  CHECK(r.v_series.size() == r.times.size());
  CHECK(r.diagnostics.back().min_v >= 0.0);
}

TEST_CASE("linear solve with constant b is a shifted heat flow") {
  auto g = interval();
  auto mesh = std::make_shared<const Mesh>(g, 40.0);
  HeatKernelPlan plan(g, 0.1, 1e-14);
  const double beta = 0.7, sigma = 1.0, kappa = 0.3;
  SolverConfig cfg;
  cfg.dt = 0.005;
  cfg.t_end = 0.2;
  TimePath a{{0.0, 1.0}, {GridFunction(mesh), GridFunction(mesh)}};
  TimePath b{{0.0, 1.0}, {GridFunction::constant(mesh, beta), GridFunction::constant(mesh, beta)}};
  auto mode = [&](double s) {
    return GridFunction::sample(mesh, [&](EdgeIndex, double x) {
      return std::exp((-pi * pi - sigma + beta) * s) * std::cos(pi * x);
    });
  };
  auto r = solve_linear_nonautonomous(plan, a, b, mode(0.0), kappa, sigma, cfg);
  REQUIRE(r.status == SolveStatus::Completed);
  CHECK(r.times.front() == doctest::Approx(kappa));
  CHECK(r.times.back() == doctest::Approx(kappa + 0.2));
  // Linear-in-time data dominate the error: beta dt^2/8 |Psi_tt| t ~ 4e-6.
  CHECK(max_abs_diff(r.u_series.back(), mode(0.2)) <= 1e-5);
}

TEST_CASE("frozen coefficients reproduce the trajectory") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 160.0);
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto nl = make_minimal(1.0);
  SolverConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 0.05;
  auto u0 = bump(mesh, 0, 0.5, 0.1, 1.0) + GridFunction::constant(mesh, 0.5);
  auto v0 = bump(mesh, 1, 0.5, 0.1, 0.5) + bump(mesh, 0, 0.3, 0.1, 0.3);
  auto r = solve_mild(plan, nl, u0, v0, cfg);
  REQUIRE(r.times.size() == 6);
  TimePath a, b;
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    CHECK(r.u_series[i].values().minCoeff() >= 0.1);
    auto fc = frozen_coefficients(nl, r.u_series[i], r.v_series[i], cfg.sigma_shift);
    CHECK(fc.floored == 0);
    a.times.push_back(r.times[i]);
    a.values.push_back(fc.a);
    b.times.push_back(r.times[i]);
    b.values.push_back(fc.b);
  }
  auto lin = solve_linear_nonautonomous(plan, a, b, u0, 0.0, cfg.sigma_shift, cfg);
  REQUIRE(lin.times.size() == r.times.size());
  for (std::size_t i = 0; i < r.times.size(); ++i) CHECK(max_abs_diff(lin.u_series[i], r.u_series[i]) <= 1e-4);
}

TEST_CASE("contraction factor shrinks with the window") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 40.0);
  auto nl = make_logistic(LogisticPreset{});
  const double width = 0.1;
  auto u0 = bump(mesh, 0, 0.5, width, 5.0 / (width * std::sqrt(pi)));
  double prev = 1.0;
  for (double tw : {0.05, 0.025, 0.0125}) {
    SolverConfig cfg;
    cfg.dt = tw / 4;
    cfg.window_steps = cfg.max_window_steps = 4;
    cfg.t_end = tw;
    HeatKernelPlan plan(g, tw * 1.01, 1e-14);
    auto r = solve_mild(plan, nl, u0, GridFunction(mesh), cfg);
    REQUIRE(r.status == SolveStatus::Completed);
    const double factor = r.diagnostics.back().contraction_factor;
    CAPTURE(tw);
    CHECK(factor > 0.0);
    CHECK(factor < prev);
    prev = factor;
  }
}

TEST_CASE("mild and reference solutions converge together") {
  auto g = star3();
  auto nl = make_minimal(1.0);
  auto data = [](std::shared_ptr<const Mesh> m) {
    return std::pair{bump(m, 0, 0.5, 0.12, 2.0) + GridFunction::constant(m, 0.5), bump(m, 1, 0.5, 0.12, 0.2)};
  };
  std::vector<double> diffs;
  for (auto [dt, npul] : std::vector<std::pair<double, double>>{{0.01, 20}, {0.005, 40}, {0.0025, 80}}) {
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 0.5;
    HeatKernelPlan plan(g, 8 * dt * 1.01, 1e-14);
    auto lap = assemble(g, npul);
    auto [u0, v0] = data(lap.mesh_ptr());
    auto mild = solve_mild(plan, nl, u0, v0, cfg);
    auto ref = solve_reference(lap, nl, u0, v0, cfg);
    diffs.push_back(max_abs_diff(mild.u_series.back(), ref.u_series.back()));
  }
  for (std::size_t i = 1; i < diffs.size(); ++i) CHECK(std::log2(diffs[i - 1] / diffs[i]) >= 0.9);
}

TEST_CASE("record interval thins the output") {
  auto g = star3();
  HeatKernelPlan plan(g, 0.1, 1e-14);
  auto mesh = std::make_shared<const Mesh>(g, 10.0);
  SolverConfig cfg;
  cfg.t_end = 1.0;
  cfg.record_interval = 0.25;
  auto r = solve_mild(plan, make_minimal(1.0), star_u0(mesh), star_v0(mesh), cfg);
  REQUIRE(r.times.size() == 5);
  for (std::size_t i = 0; i < r.times.size(); ++i) CHECK(r.times[i] == doctest::Approx(0.25 * i));
}
