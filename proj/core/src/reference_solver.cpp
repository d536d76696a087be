#include <algorithm>
#include <cmath>

#include "ksg/error.hpp"
#include "ksg/solver.hpp"
#include "solver_internal.hpp"

namespace ksg {

namespace {

struct Interval {
  Eigen::Index a, b;
  double h;
};

std::vector<Interval> intervals_of(const Mesh& mesh) {
  std::vector<Interval> out;
  for (EdgeIndex e = 0; e < mesh.graph().edge_count(); ++e)
    for (std::size_t j = 0; j < mesh.intervals(e); ++j)
      out.push_back({static_cast<Eigen::Index>(mesh.shared_index(e, j)),
                     static_cast<Eigen::Index>(mesh.shared_index(e, j + 1)), mesh.spacing(e)});
  return out;
}

}  // namespace

SolveResult solve_reference(const DiscreteLaplacian& lap, const Nonlinearity& nl, const GridFunction& u0,
                            const GridFunction& v0, const SolverConfig& cfg) {
  cfg.validate();
  nl.validate();
  const auto mesh = lap.mesh_ptr();
  require_same_mesh(u0.mesh(), *mesh);
  const bool elliptic = nl.regime == Regime::ParabolicElliptic;
  if (!elliptic) require_same_mesh(v0.mesh(), *mesh);

  const Eigen::VectorXd& w = lap.weights();
  const std::vector<Interval> cells = intervals_of(*mesh);
  auto signal = [&](const Eigen::VectorXd& u) {
    return resolvent_solve(lap, nl.sigma, map_values(GridFunction::from_shared(mesh, u), nl.f)).to_shared();
  };

  Eigen::VectorXd u = u0.to_shared();
  Eigen::VectorXd v = elliptic ? signal(u) : v0.to_shared();
  const Eigen::Index n = u.size();

  SolveResult out;
  detail::Recorder rec(out, mesh, cfg, true);
  auto edge = [&](const Eigen::VectorXd& s) { return GridFunction::from_shared(mesh, s).values(); };
  {
    const Eigen::VectorXd ve = edge(v);
    rec.push(0.0, edge(u), &ve, 0, 0.0, 0.0, true);
  }

  const auto steps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  double t = 0.0;
  Eigen::VectorXd flux(n), react(n), src(n);
  for (long step = 0; step < steps; ++step) {
    const double dt = (step + 1 == steps) ? cfg.t_end - t : cfg.dt;

    // Upwind flux f1(u, v) v_x split by the sign of the velocity g1 v_x on
    // each side of the cell. Node increments sum to zero, so mass moves
    // between nodes (vertices included) without being created.
    flux.setZero();
    double speed = 0.0;
    for (const Interval& c : cells) {
      const double slope = (v[c.b] - v[c.a]) / c.h;
      const double va = nl.eval_g1(u[c.a], v[c.a], &out.floored_nodes) * slope;
      const double vb = nl.eval_g1(u[c.b], v[c.b], &out.floored_nodes) * slope;
      double f = 0.0;
      if (va > 0.0) f += nl.f1(u[c.a], v[c.a]) * slope;
      if (vb < 0.0) f += nl.f1(u[c.b], v[c.b]) * slope;
      flux[c.a] -= f;
      flux[c.b] += f;
      speed = std::max(speed, std::max(std::abs(va), std::abs(vb)) / c.h);
    }
    if (!(2.0 * speed * dt <= 1.0))
      fail(ErrorKind::StepUnstable, "explicit chemotaxis flux needs dt <= " + std::to_string(0.5 / speed) +
                                        " at t = " + std::to_string(t) + " (dt = " + std::to_string(dt) + ")");

    for (Eigen::Index i = 0; i < n; ++i) {
      react[i] = u[i] + dt * (flux[i] / w[i] + nl.f2(u[i], v[i]));
      if (!elliptic) src[i] = nl.tau / dt * v[i] + nl.f3(u[i], v[i]);
    }
    const Eigen::VectorXd u_next = lap.solve_shifted(1.0 / dt, w.cwiseProduct(react) / dt);
    if (elliptic)
      v = signal(u_next);
    else
      v = lap.solve_shifted(nl.tau / dt, w.cwiseProduct(src));
    u = u_next;
    t = (step + 1 == steps) ? cfg.t_end : t + dt;

    if (!u.allFinite()) fail(ErrorKind::StepUnstable, "reference solution became non-finite at t = " + std::to_string(t));
    const Eigen::VectorXd ve = edge(v);
    if (rec.push(t, edge(u), &ve, 0, 0.0, dt, step + 1 == steps)) {
      out.status = SolveStatus::BlowUpDetected;
      out.blowup_time_estimate = rec.blowup_estimate();
      return out;
    }
  }
  return out;
}

}  // namespace ksg
