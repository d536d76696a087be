#include <map>
#include <random>

#include "doctest.h"
#include "ksg/error.hpp"
#include "ksg/heat_kernel.hpp"
#include "ksg/laplacian.hpp"
#include "ksg/parallel.hpp"
#include "support.hpp"

using namespace ksg;
using namespace ksg::testing;

TEST_CASE("gaussian kernel") {
  CHECK(gaussian_kernel(1.0 / (4.0 * std::numbers::pi), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  for (double x : {0.1, 0.7, 3.0}) CHECK(gaussian_kernel(0.3, x) == gaussian_kernel(0.3, -x));
  // Composite Simpson over [-12, 12] for t = 1.
  const int n = 4000;
  const double a = -12.0, h = 24.0 / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * gaussian_kernel(1.0, a + i * h);
  }
  CHECK(std::abs(s * h / 3.0 - 1.0) < 1e-10);
  CHECK_THROWS_AS(gaussian_kernel(0.0, 1.0), Error);
  CHECK(gaussian_kernel_dx(0.2, 0.3) == doctest::Approx(-0.3 / 0.4 * gaussian_kernel(0.2, 0.3)));
}

TEST_CASE("truncation radius") {
  auto g = star({1.0, 2.0, 0.5});
  CHECK(HeatKernelPlan::truncation_radius(*g, 0.1, 1e-12) >= 2 * 2.0);
  double last = 0.0;
  for (double eps : {0.5, 1e-2, 1e-6, 1e-12}) {
    const double r = HeatKernelPlan::truncation_radius(*g, 1.0, eps);
    CHECK(r >= last);
    last = r;
  }
  CHECK_THROWS_AS(HeatKernelPlan(g, 1.0, 0.0), Error);
  CHECK_THROWS_AS(HeatKernelPlan(g, 1.0, 1.0), Error);
  CHECK_THROWS_AS(HeatKernelPlan(g, -1.0, 0.1), Error);
}

TEST_CASE("plan records are enumerate_paths grouped by length") {
  for (auto g : {cycle_with_pendant(), star({1.0, 0.6, 1.3})}) {
    HeatKernelPlan plan(g, 0.05, 1e-6);
    const std::size_t nd = g->directed_edge_count();
    for (std::size_t i = 0; i < nd; ++i) {
      for (std::size_t j = 0; j < nd; ++j) {
        const auto a = DirectedEdge::from_index(i);
        const auto b = DirectedEdge::from_index(j);
        std::map<long long, double> grouped;
        for (const Path& p : enumerate_paths(*g, a, b, plan.radius()))
          if (p.steps() > 0) grouped[std::llround(p.length * 1e9)] += p.weight;
        std::map<long long, double> records;
        for (const KernelRecord& r : plan.records(a, b)) records[std::llround(r.length * 1e9)] += r.weight;
        for (auto it = records.begin(); it != records.end();)
          it = std::abs(it->second) < 1e-14 ? records.erase(it) : std::next(it);
        for (auto it = grouped.begin(); it != grouped.end();)
          it = std::abs(it->second) < 1e-14 ? grouped.erase(it) : std::next(it);
        REQUIRE(grouped.size() == records.size());
        for (const auto& [len, w] : grouped) {
          REQUIRE(records.count(len) == 1);
          CHECK(records[len] == doctest::Approx(w).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("interval kernel matches images series") {
  auto g = interval();
  HeatKernelPlan plan(g, 0.1, 1e-12);
  CHECK(plan.radius() >= 2.0);
  double worst = 0.0;
  for (double t : {0.01, 0.03, 0.05, 0.1})
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j) {
        const double x = i / 20.0, y = j / 20.0;
        worst = std::max(worst, std::abs(eval_kernel(plan, t, {0, x}, {0, y}) - images_kernel(t, x, y)));
      }
  CHECK(worst <= 1e-10);
  CHECK_THROWS_AS(eval_kernel(plan, 0.2, {0, 0.1}, {0, 0.2}), Error);
  CHECK_THROWS_AS(eval_kernel(plan, 0.0, {0, 0.1}, {0, 0.2}), Error);
}

TEST_CASE("kernel symmetry and positivity") {
  std::mt19937_64 rng(7);
  for (auto g : {star3(), star({1.0, 0.6, 1.3}, true), cycle_with_pendant()}) {
    HeatKernelPlan plan(g, 0.5, 1e-12);
    std::uniform_int_distribution<std::size_t> pick(0, g->edge_count() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
      const EdgePoint x{pick(rng), 0.0};
      const EdgePoint y{pick(rng), 0.0};
      const EdgePoint xp{x.edge, unit(rng) * g->length(x.edge)};
      const EdgePoint yp{y.edge, unit(rng) * g->length(y.edge)};
      const double t = 0.01 + 0.49 * unit(rng);
      const double kxy = eval_kernel(plan, t, xp, yp);
      CHECK(std::abs(kxy - eval_kernel(plan, t, yp, xp)) <= 1e-10);
      CHECK(kxy > -1e-10);
    }
  }
}

TEST_CASE("kernel is continuous across vertices") {
  auto g = star3();
  HeatKernelPlan plan(g, 0.2, 1e-12);
  const EdgePoint y{1, 0.37};
  for (double t : {0.02, 0.2}) {
    const double k0 = eval_kernel(plan, t, {0, 0.0}, y);
    CHECK(std::abs(k0 - eval_kernel(plan, t, {1, 0.0}, y)) < 1e-12);
    CHECK(std::abs(k0 - eval_kernel(plan, t, {2, 0.0}, y)) < 1e-12);
  }
}

TEST_CASE("long-time limit is the uniform density") {
  for (auto g : {interval(), star3(), cycle_with_pendant()}) {
    const double t = 10.0 * g->diameter() * g->diameter();
    HeatKernelPlan plan(g, t, 1e-12);
    for (EdgeIndex e = 0; e < g->edge_count(); ++e)
      CHECK(std::abs(eval_kernel(plan, t, {0, 0.3}, {e, 0.8 * g->length(e)}) - 1.0 / g->total_length()) < 1e-6);
  }
}

TEST_CASE("cutoff convergence") {
  auto g = star3();
  const double eps = 1e-10;
  HeatKernelPlan plan(g, 1.0, eps);
  HeatKernelPlan wider(g, 1.6, eps);
  REQUIRE(wider.radius() >= plan.radius() + 1.0);
  for (double xi : {0.0, 0.25, 0.5, 1.0})
    for (double yi : {0.1, 0.9})
      CHECK(std::abs(eval_kernel(plan, 1.0, {0, xi}, {2, yi}) - eval_kernel(wider, 1.0, {0, xi}, {2, yi})) < eps);
}

TEST_CASE("kernel derivatives match finite differences") {
  auto g = interval();
  HeatKernelPlan plan(g, 0.1, 1e-12);
  const double t = 0.05, step = 1e-5;
  for (double x : {0.2, 0.5, 0.83})
    for (double y : {0.1, 0.4, 0.5, 0.77}) {
      const double fd = (eval_kernel(plan, t, {0, x}, {0, y + step}) - eval_kernel(plan, t, {0, x}, {0, y - step})) / (2 * step);
      CHECK(std::abs(eval_kernel_dy(plan, t, {0, x}, {0, y}) - fd) <= 1e-6);
      const double fdx = (eval_kernel(plan, t, {0, x + step}, {0, y}) - eval_kernel(plan, t, {0, x - step}, {0, y})) / (2 * step);
      CHECK(std::abs(eval_kernel_dx(plan, t, {0, x}, {0, y}) - fdx) <= 1e-6);
    }
  bool one_sided = false;
  eval_kernel_dy(plan, t, {0, 0.3}, {0, 0.4}, &one_sided);
  CHECK_FALSE(one_sided);
  eval_kernel_dy(plan, t, {0, 0.3}, {0, 1.0}, &one_sided);
  CHECK(one_sided);

  // On a star the y-derivative is taken along the y edge's orientation.
  auto s = star({1.0, 0.7, 1.2});
  HeatKernelPlan sp(s, 0.1, 1e-12);
  for (EdgeIndex e = 0; e < 3; ++e) {
    const double y = 0.45 * s->length(e);
    const double fd = (eval_kernel(sp, t, {1, 0.3}, {e, y + step}) - eval_kernel(sp, t, {1, 0.3}, {e, y - step})) / (2 * step);
    CHECK(std::abs(eval_kernel_dy(sp, t, {1, 0.3}, {e, y}) - fd) <= 1e-6);
  }
}

TEST_CASE("direct term derivative vanishes at the diagonal") {
  // Far from the ends of a long edge only the direct term matters.
  auto g = interval(20.0);
  HeatKernelPlan plan(g, 0.1, 1e-12);
  CHECK(std::abs(eval_kernel_dy(plan, 0.05, {0, 10.0}, {0, 10.0})) < 1e-300);
}

TEST_CASE("apply_heat basics") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 100);
  HeatKernelPlan plan(g, 1.0, 1e-12);
  const auto one = GridFunction::constant(mesh, 2.5);
  for (double t : {1e-4, 0.01, 0.3, 1.0}) {
    const auto out = apply_heat(plan, t, 0.0, one);
    CHECK((out.values().array() - 2.5).abs().maxCoeff() <= 1e-9);
    CHECK(out.vertex_continuous());
  }
  std::mt19937_64 rng(3);
  const auto u = random_smooth(mesh, rng);
  const double mass = u.values().dot(mesh->simpson_weights());
  for (double t : {0.001, 0.05, 0.5}) {
    const auto out = apply_heat(plan, t, 0.0, u);
    CHECK(std::abs(out.values().dot(mesh->simpson_weights()) - mass) <= 1e-8);
  }
  const auto shifted = apply_heat(plan, 0.2, 0.7, u);
  const auto plain = apply_heat(plan, 0.2, 0.0, u);
  CHECK(max_abs_diff(shifted, std::exp(-0.14) * plain) < 1e-14);

  auto other = std::make_shared<const Mesh>(star3(), 100);
  CHECK_THROWS_AS(apply_heat(plan, 0.1, 0.0, GridFunction::constant(other, 1.0)), Error);
  CHECK_THROWS_AS(apply_heat(plan, 2.0, 0.0, one), Error);
}

TEST_CASE("apply_heat matches the free line away from vertices") {
  auto g = interval(4.0);
  auto mesh = std::make_shared<const Mesh>(g, 100);
  HeatKernelPlan plan(g, 0.01, 1e-12);
  const double w = 0.1, c = 2.0;
  const auto u = bump(mesh, 0, c, w);
  for (double t : {0.002, 0.01}) {
    // Gaussian convolved with exp(-(x-c)^2/w^2): closed form.
    const double s2 = w * w / 4.0 + t;
    const auto heat = apply_heat(plan, t, 0.0, u);
    const auto heat_dx = apply_heat_dx(plan, t, 0.0, u);
    double worst = 0.0, worst_dx = 0.0;
    for (std::size_t j = 0; j <= mesh->intervals(0); ++j) {
      const double x = mesh->position(0, j);
      const double exact = w / 2.0 / std::sqrt(s2) * std::exp(-(x - c) * (x - c) / (4 * s2));
      const double exact_dx = -(x - c) / (2 * s2) * exact;
      worst = std::max(worst, std::abs(heat.at(0, j) - exact));
      worst_dx = std::max(worst_dx, std::abs(heat_dx.at(0, j) - exact_dx));
    }
    CHECK(worst <= 1e-8);
    CHECK(worst_dx <= 1e-8);
  }
}

TEST_CASE("apply_heat_dx equals apply_heat of the derivative") {
  auto g = star({1.0, 1.0, 1.0});
  auto mesh = std::make_shared<const Mesh>(g, 200);
  HeatKernelPlan plan(g, 0.1, 1e-12);
  const double w = 0.08, c = 0.5;
  const auto psi = bump(mesh, 1, c, w);
  const auto dpsi = GridFunction::sample(mesh, [&](EdgeIndex e, double xi) {
    return e == 1 ? -2.0 * (xi - c) / (w * w) * std::exp(-(xi - c) * (xi - c) / (w * w)) : 0.0;
  });
  for (double t : {0.01, 0.05, 0.1}) {
    CHECK(max_abs_diff(apply_heat_dx(plan, t, 0.0, psi), apply_heat(plan, t, 0.0, dpsi)) <= 1e-7);
  }
  // On the bump's own edge, before anything reaches a vertex, d/dx e^{t Delta}
  // and e^{t Delta} d/dx agree. On other edges they differ by orientation.
  const auto a = apply_dx_heat(plan, 0.0005, 0.0, psi);
  const auto b = apply_heat_dx(plan, 0.0005, 0.0, psi);
  for (std::size_t j = 0; j <= mesh->intervals(1); ++j) CHECK(std::abs(a.at(1, j) - b.at(1, j)) < 1e-8);
}

TEST_CASE("small-time moment quadrature") {
  // Below t = 2 h^2 the quadrature integrates the Gaussian exactly against the
  // linear interpolant, so constants and mass stay exact.
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 20);
  HeatKernelPlan plan(g, 1.0, 1e-12);
  const double t = 1e-4;
  REQUIRE(t < HeatKernelPlan::small_time_threshold(mesh->spacing(0)));
  const auto out = apply_heat(plan, t, 0.0, GridFunction::constant(mesh, 1.0));
  CHECK((out.values().array() - 1.0).abs().maxCoeff() < 1e-12);
  // A hat at a node comes back nearly unchanged for a tiny t.
  GridFunction hat(mesh);
  hat.at(0, 10) = 1.0;
  const auto h2 = apply_heat(plan, 1e-8, 0.0, hat);
  // Exact value of the Gaussian against the hat: 1 - E|z| / h.
  const double expect = 1.0 - 2.0 * std::sqrt(1e-8 / std::numbers::pi) / mesh->spacing(0);
  CHECK(std::abs(h2.at(0, 10) - expect) < 1e-10);
}

TEST_CASE("semigroup property and stochasticity") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 200);
  HeatKernelPlan plan(g, 0.3, 1e-12);
  std::mt19937_64 rng(11);
  const auto u = random_smooth(mesh, rng);
  const auto a = apply_heat(plan, 0.1, 0.0, apply_heat(plan, 0.05, 0.0, u));
  const auto b = apply_heat(plan, 0.15, 0.0, u);
  CHECK(max_abs_diff(a, b) <= 1e-6);

  const Eigen::MatrixXd m = plan.build_matrix(*mesh, 0.05, KernelKind::Heat);
  CHECK((m.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-8);
}

TEST_CASE("kernel matrix cache and thread independence") {
  auto g = star3();
  auto mesh = std::make_shared<const Mesh>(g, 40);
  HeatKernelPlan plan(g, 0.3, 1e-12);
  std::mt19937_64 rng(5);
  const auto u = random_smooth(mesh, rng);
  const auto first = apply_heat(plan, 0.1, 0.0, u);
  CHECK(plan.cached_matrices() == 0);
  const auto second = apply_heat(plan, 0.1, 0.0, u);
  CHECK(plan.cached_matrices() == 1);
  CHECK(max_abs_diff(first, second) < 1e-14);

  const Eigen::MatrixXd serial = plan.build_matrix(*mesh, 0.02, KernelKind::HeatDx);
  set_thread_count(4);
  const Eigen::MatrixXd threaded = plan.build_matrix(*mesh, 0.02, KernelKind::HeatDx);
  set_thread_count(1);
  CHECK((serial - threaded).cwiseAbs().maxCoeff() == 0.0);
  plan.clear_cache();
  CHECK(plan.cached_matrices() == 0);
}

TEST_CASE("self-loop kernel agrees with the spectral expansion") {
  // lollipop: a loop of length 1 at a, a tail a-b
  auto g = make_graph({"a", "b"}, {{"loop", "a", "a", 1.0}, {"tail", "a", "b", 1.0}});
  auto lap = assemble(g, 100.0);
  auto mesh = lap.mesh_ptr();
  const auto dec = eigendecompose(lap, lap.size());
  HeatKernelPlan plan(g, 1.0, 1e-12);
  std::mt19937_64 rng(5);
  const auto u = random_smooth(mesh, rng);
  for (double t : {0.02, 0.1, 1.0}) {
    CAPTURE(t);
    CHECK(max_abs_diff(apply_heat(plan, t, 0.0, u), spectral_heat(dec, t, 0.0, u, SpectrumScale::Continuum)) <= 1e-10);
    CHECK(std::abs(eval_kernel(plan, t, {0, 0.0}, {1, 0.4}) - eval_kernel(plan, t, {0, 1.0}, {1, 0.4})) <= 1e-12);
    CHECK(std::abs(eval_kernel(plan, t, {0, 0.3}, {1, 0.7}) - eval_kernel(plan, t, {1, 0.7}, {0, 0.3})) <= 1e-12);
  }
}
