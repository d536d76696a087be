#include <cmath>

#include "ksg/error.hpp"
#include "ksg/solver.hpp"
#include "solver_internal.hpp"

namespace ksg {

SolveResult solve_mild(const HeatKernelPlan& plan, const Nonlinearity& nl, const GridFunction& u0,
                       const GridFunction& v0, const SolverConfig& cfg) {
  cfg.validate();
  nl.validate();
  const auto mesh = u0.mesh_ptr();
  const bool elliptic = nl.regime == Regime::ParabolicElliptic;
  if (!elliptic) require_same_mesh(v0.mesh(), *mesh);
  const double tau = elliptic ? 1.0 : nl.tau;
  const double reach = cfg.max_window_steps * cfg.dt / std::min(1.0, tau);
  if (reach > plan.horizon() * (1.0 + 1e-12))
    fail(ErrorKind::InvalidArgument, "kernel plan horizon " + std::to_string(plan.horizon()) +
                                         " is shorter than the longest window " + std::to_string(reach));

  const double sigma = cfg.sigma_shift;
  auto quad = std::make_shared<DuhamelQuadrature>(plan, mesh, sigma);
  std::shared_ptr<DiscreteLaplacian> lap;
  if (elliptic) lap = std::make_shared<DiscreteLaplacian>(mesh);

  detail::WindowProblem pb;
  pb.mesh = mesh;
  pb.has_v = true;
  pb.v_in_distance = !elliptic;
  if (elliptic) {
    pb.signal = [lap, mesh, &nl](const Eigen::VectorXd& u) {
      return resolvent_solve(*lap, nl.sigma, map_values(GridFunction(mesh, u, true), nl.f)).values();
    };
  }

  pb.sweep = [&, quad, mesh, elliptic, tau, sigma](double, double h, const detail::WindowFields& in,
                                                   detail::WindowFields& out) {
    const std::size_t n = in.u.size() - 1;
    const Eigen::Index size = static_cast<Eigen::Index>(mesh->size());
    std::vector<Eigen::VectorXd> react(n + 1), chem(n + 1), src;
    if (!elliptic) src.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      const Eigen::VectorXd& u = in.u[k];
      const Eigen::VectorXd& v = in.v[k];
      const Eigen::VectorXd vx = detail::edge_dx(mesh, v);
      react[k].resize(size);
      chem[k].resize(size);
      if (!elliptic) src[k].resize(size);
      for (Eigen::Index j = 0; j < size; ++j) {
        react[k][j] = nl.f2(u[j], v[j]) + sigma * u[j];
        chem[k][j] = nl.f1(u[j], v[j]) * vx[j];
        if (!elliptic) src[k][j] = nl.f3(u[j], v[j]) + sigma * v[j];
      }
    }
    for (std::size_t i = 1; i <= n; ++i) {
      const int lag = static_cast<int>(i);
      Eigen::VectorXd u = quad->free(KernelKind::Heat, h, lag) * in.u[0] +
                          quad->integral(KernelKind::Heat, h, react, i) -
                          quad->integral(KernelKind::HeatDx, h, chem, i);
      GridFunction ug(mesh, std::move(u), false);
      ug.make_vertex_continuous();
      out.u[i] = ug.values();
      if (!elliptic) {
        const double hv = h / tau;
        GridFunction vg(mesh, quad->free(KernelKind::Heat, hv, lag) * in.v[0] + quad->integral(KernelKind::Heat, hv, src, i),
                        false);
        vg.make_vertex_continuous();
        out.v[i] = vg.values();
      }
    }
    if (elliptic)
      for (std::size_t i = 1; i <= n; ++i) out.v[i] = pb.signal(out.u[i]);
  };

  Eigen::VectorXd v_init = elliptic ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh->size())) : v0.values();
  return detail::run_windows(pb, u0.values(), std::move(v_init), 0.0, cfg);
}

}  // namespace ksg
