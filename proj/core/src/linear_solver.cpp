#include <cmath>

#include "ksg/error.hpp"
#include "ksg/solver.hpp"
#include "solver_internal.hpp"

namespace ksg {

SolveResult solve_linear_nonautonomous(const HeatKernelPlan& plan, const TimePath& a_path, const TimePath& b_path,
                                       const GridFunction& psi0, double kappa, double sigma,
                                       const SolverConfig& cfg) {
  cfg.validate();
  const auto mesh = psi0.mesh_ptr();
  for (const TimePath* p : {&a_path, &b_path}) {
    if (p->times.empty() || p->times.size() != p->values.size())
      fail(ErrorKind::InvalidArgument, "coefficient paths must be non-empty and consistent");
    if (p->times.front() > kappa + 1e-12 || p->times.back() < kappa + cfg.t_end - 1e-9 * (1.0 + cfg.t_end))
      fail(ErrorKind::InvalidArgument, "coefficient paths must cover [kappa, kappa + t_end]");
    for (const auto& g : p->values) require_same_mesh(g.mesh(), *mesh);
  }
  if (cfg.max_window_steps * cfg.dt > plan.horizon() * (1.0 + 1e-12))
    fail(ErrorKind::InvalidArgument, "kernel plan horizon is shorter than the longest window");

  auto quad = std::make_shared<DuhamelQuadrature>(plan, mesh, sigma);
  detail::WindowProblem pb;
  pb.mesh = mesh;
  pb.has_v = false;
  pb.sweep = [&, quad, mesh](double t0, double h, const detail::WindowFields& in, detail::WindowFields& out) {
    const std::size_t n = in.u.size() - 1;
    std::vector<Eigen::VectorXd> rhs(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      const double tk = t0 + h * static_cast<double>(k);
      const Eigen::VectorXd a = a_path.at(tk).values();
      const Eigen::VectorXd b = b_path.at(tk).values();
      const Eigen::VectorXd dx = detail::edge_dx(mesh, in.u[k]);
      rhs[k] = a.cwiseProduct(dx) + b.cwiseProduct(in.u[k]);
    }
    for (std::size_t i = 1; i <= n; ++i) {
      GridFunction g(mesh,
                     quad->free(KernelKind::Heat, h, static_cast<int>(i)) * in.u[0] +
                         quad->integral(KernelKind::Heat, h, rhs, i),
                     false);
      g.make_vertex_continuous();
      out.u[i] = g.values();
    }
  };
  return detail::run_windows(pb, psi0.values(), Eigen::VectorXd(), kappa, cfg);
}

FrozenCoefficients frozen_coefficients(const Nonlinearity& nl, const GridFunction& u, const GridFunction& v,
                                       double sigma) {
  require_same_mesh(u.mesh(), v.mesh());
  const GridFunction vx = edge_derivative(v);
  const GridFunction vxx = edge_second_derivative(v);
  FrozenCoefficients out{GridFunction(u.mesh_ptr()), GridFunction(u.mesh_ptr()), 0};
  const auto& uu = u.values();
  const auto& vv = v.values();
  for (Eigen::Index j = 0; j < uu.size(); ++j) {
    const double s = uu[j], r = vv[j], d1 = vx.values()[j];
    out.a.values()[j] = -nl.eval_df1_du(s, r) * d1;
    out.b.values()[j] = nl.eval_g2(s, r, &out.floored) + sigma - nl.eval_g1(s, r, &out.floored) * vxx.values()[j] -
                        nl.eval_g3(s, r, &out.floored) * d1 * d1;
  }
  return out;
}

}  // namespace ksg
