#include <array>
#include <cmath>

#include "ksg/error.hpp"
#include "ksg/solver.hpp"
#include "solver_internal.hpp"

namespace ksg {

namespace {

// Gauss-Legendre rules mapped to [0, 1].
struct Rule {
  std::array<double, 4> x{};
  std::array<double, 4> w{};
  int n = 0;
};

Rule gauss(int n) {
  Rule r;
  r.n = n;
  if (n == 3) {
    const double a = std::sqrt(0.6);
    const double xs[3] = {-a, 0.0, a};
    const double ws[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    for (int i = 0; i < 3; ++i) {
      r.x[i] = 0.5 * (1.0 + xs[i]);
      r.w[i] = 0.5 * ws[i];
    }
  } else {
    const double xs[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
    const double ws[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
    for (int i = 0; i < 4; ++i) {
      r.x[i] = 0.5 * (1.0 + xs[i]);
      r.w[i] = 0.5 * ws[i];
    }
  }
  return r;
}

}  // namespace

struct DuhamelQuadrature::Set {
  std::vector<std::unique_ptr<Eigen::MatrixXd>> free;  // [lag], lag >= 1
  std::vector<std::unique_ptr<Eigen::MatrixXd>> left;  // L_d: weight of F at the older end of step d
  std::vector<std::unique_ptr<Eigen::MatrixXd>> pair;  // P_m = L_{m-1} + R_m, m >= 1
  std::vector<std::unique_ptr<Eigen::MatrixXd>> right; // R_d
};

DuhamelQuadrature::DuhamelQuadrature(const HeatKernelPlan& plan, std::shared_ptr<const Mesh> mesh, double sigma)
    : plan_(plan), mesh_(std::move(mesh)), sigma_(sigma) {
  if (!mesh_) fail(ErrorKind::InvalidArgument, "quadrature needs a mesh");
  if (&mesh_->graph() != &plan_.graph() && mesh_->graph_ptr() != plan_.graph_ptr())
    fail(ErrorKind::MeshMismatch, "mesh and kernel plan are built on different graphs");
  if (!(sigma_ >= 0.0)) fail(ErrorKind::InvalidArgument, "semigroup shift must be >= 0");
}

DuhamelQuadrature::~DuhamelQuadrature() = default;

DuhamelQuadrature::Set& DuhamelQuadrature::set(KernelKind kind, double dt) const {
  if (!(dt > 0.0)) fail(ErrorKind::NonpositiveTime, "quadrature step must be positive");
  auto& slot = sets_[{static_cast<int>(kind), dt}];
  if (!slot) slot = std::make_unique<Set>();
  return *slot;
}

const Eigen::MatrixXd& DuhamelQuadrature::free(KernelKind kind, double dt, int lag) const {
  std::lock_guard lock(mutex_);
  Set& s = set(kind, dt);
  if (lag < 1) fail(ErrorKind::InvalidArgument, "free propagator needs lag >= 1");
  if (s.free.size() <= static_cast<std::size_t>(lag)) s.free.resize(static_cast<std::size_t>(lag) + 1);
  auto& m = s.free[static_cast<std::size_t>(lag)];
  if (!m) {
    const double t = dt * lag;
    m = std::make_unique<Eigen::MatrixXd>(std::exp(-sigma_ * t) * plan_.build_matrix(*mesh_, t, kind));
  }
  return *m;
}

// which: 'L', 'R' or 'P'.
const Eigen::MatrixXd& DuhamelQuadrature::weight(KernelKind kind, double dt, char which, int lag) const {
  Set& s = set(kind, dt);
  auto kernel = [&](double theta) { return Eigen::MatrixXd(std::exp(-sigma_ * theta) * plan_.build_matrix(*mesh_, theta, kind)); };
  auto ensure = [&](int d) {
    const auto n = static_cast<std::size_t>(d) + 1;
    if (s.left.size() < n) {
      s.left.resize(n);
      s.right.resize(n);
    }
    if (s.left[static_cast<std::size_t>(d)]) return;
    const Eigen::Index size = static_cast<Eigen::Index>(mesh_->size());
    auto l = std::make_unique<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(size, size));
    auto r = std::make_unique<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(size, size));
    if (d == 0) {
      // theta = dt y^2: the Jacobian 2 dt y cancels the theta^{-1/2} of the
      // derivative kernel, leaving a smooth integrand in y.
      const Rule g = gauss(4);
      for (int i = 0; i < g.n; ++i) {
        const double y = g.x[i];
        const double x = y * y;
        const Eigen::MatrixXd k = kernel(dt * x);
        const double jac = 2.0 * dt * y * g.w[i];
        *l += jac * x * k;
        *r += jac * (1.0 - x) * k;
      }
    } else {
      const Rule g = gauss(3);
      for (int i = 0; i < g.n; ++i) {
        const double x = g.x[i];
        const Eigen::MatrixXd k = kernel(dt * (d + x));
        *l += dt * g.w[i] * x * k;
        *r += dt * g.w[i] * (1.0 - x) * k;
      }
    }
    s.left[static_cast<std::size_t>(d)] = std::move(l);
    s.right[static_cast<std::size_t>(d)] = std::move(r);
  };
  switch (which) {
    case 'L':
      ensure(lag);
      return *s.left[static_cast<std::size_t>(lag)];
    case 'R':
      ensure(lag);
      return *s.right[static_cast<std::size_t>(lag)];
    default: {
      const auto m = static_cast<std::size_t>(lag);
      if (s.pair.size() <= m) s.pair.resize(m + 1);
      if (!s.pair[m]) {
        ensure(lag - 1);
        ensure(lag);
        s.pair[m] = std::make_unique<Eigen::MatrixXd>(*s.left[m - 1] + *s.right[m]);
      }
      return *s.pair[m];
    }
  }
}

Eigen::VectorXd DuhamelQuadrature::integral(KernelKind kind, double dt, const std::vector<Eigen::VectorXd>& samples,
                                            std::size_t i) const {
  if (samples.size() <= i) fail(ErrorKind::InvalidArgument, "quadrature needs samples up to the evaluation node");
  const Eigen::Index n = static_cast<Eigen::Index>(mesh_->size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (i == 0) return out;
  std::lock_guard lock(mutex_);
  const int ii = static_cast<int>(i);
  out.noalias() += weight(kind, dt, 'R', 0) * samples[i];
  for (int k = 1; k < ii; ++k) out.noalias() += weight(kind, dt, 'P', ii - k) * samples[static_cast<std::size_t>(k)];
  out.noalias() += weight(kind, dt, 'L', ii - 1) * samples[0];
  return out;
}

std::size_t DuhamelQuadrature::cached_bytes() const {
  std::lock_guard lock(mutex_);
  std::size_t bytes = 0;
  auto count = [&](const std::vector<std::unique_ptr<Eigen::MatrixXd>>& v) {
    for (const auto& m : v)
      if (m) bytes += static_cast<std::size_t>(m->size()) * sizeof(double);
  };
  for (const auto& [key, s] : sets_) {
    count(s->free);
    count(s->left);
    count(s->right);
    count(s->pair);
  }
  return bytes;
}

namespace detail {

Eigen::VectorXd edge_dx(const std::shared_ptr<const Mesh>& mesh, const Eigen::VectorXd& values) {
  return edge_derivative(GridFunction(mesh, values, false)).values();
}

}  // namespace detail

namespace {

double path_step(const TimePath& path, const Mesh& mesh, const char* what) {
  if (path.times.size() != path.values.size())
    fail(ErrorKind::InvalidArgument, std::string(what) + ": times and values differ in length");
  if (path.times.empty()) fail(ErrorKind::QuadratureUnderResolved, std::string(what) + " is empty");
  if (path.times.front() != 0.0) fail(ErrorKind::InvalidArgument, std::string(what) + " must start at t = 0");
  for (const auto& g : path.values) require_same_mesh(g.mesh(), mesh);
  const double t = path.times.back();
  if (t == 0.0) return 0.0;
  if (path.times.size() < 2)
    fail(ErrorKind::QuadratureUnderResolved, std::string(what) + " needs at least two samples on [0, t]");
  const double dt = t / static_cast<double>(path.times.size() - 1);
  for (std::size_t j = 0; j < path.times.size(); ++j)
    if (std::abs(path.times[j] - dt * static_cast<double>(j)) > 1e-9 * t)
      fail(ErrorKind::InvalidArgument, std::string(what) + " must be sampled uniformly on [0, t]");
  return dt;
}

void check_same_times(const TimePath& a, const TimePath& b) {
  if (a.times.size() != b.times.size())
    fail(ErrorKind::InvalidArgument, "u and v paths must share their sample times");
  for (std::size_t j = 0; j < a.times.size(); ++j)
    if (std::abs(a.times[j] - b.times[j]) > 1e-12 * (1.0 + std::abs(a.times[j])))
      fail(ErrorKind::InvalidArgument, "u and v paths must share their sample times");
}

Eigen::VectorXd phi_at(const DuhamelQuadrature& quad, const Nonlinearity& nl, double sigma, const Eigen::VectorXd& u0,
                       const std::vector<Eigen::VectorXd>& u, const std::vector<Eigen::VectorXd>& v, double dt) {
  const std::size_t n = u.size() - 1;
  std::vector<Eigen::VectorXd> react(n + 1), chem(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const Eigen::VectorXd vx = detail::edge_dx(quad.mesh(), v[k]);
    react[k].resize(u[k].size());
    chem[k].resize(u[k].size());
    for (Eigen::Index j = 0; j < u[k].size(); ++j) {
      react[k][j] = nl.f2(u[k][j], v[k][j]) + sigma * u[k][j];
      chem[k][j] = nl.f1(u[k][j], v[k][j]) * vx[j];
    }
  }
  return quad.free(KernelKind::Heat, dt, static_cast<int>(n)) * u0 + quad.integral(KernelKind::Heat, dt, react, n) -
         quad.integral(KernelKind::HeatDx, dt, chem, n);
}

std::vector<Eigen::VectorXd> values_of(const TimePath& p) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(p.values.size());
  for (const auto& g : p.values) out.push_back(g.values());
  return out;
}

GridFunction continuous(const std::shared_ptr<const Mesh>& mesh, Eigen::VectorXd values) {
  GridFunction g(mesh, std::move(values), false);
  g.make_vertex_continuous();
  return g;
}

}  // namespace

GridFunction duhamel_phi(const HeatKernelPlan& plan, const Nonlinearity& nl, double sigma, const GridFunction& u0,
                         const TimePath& u_path, const TimePath& v_path) {
  const double dt = path_step(u_path, u0.mesh(), "u path");
  path_step(v_path, u0.mesh(), "v path");
  check_same_times(u_path, v_path);
  if (dt == 0.0) return u0;
  DuhamelQuadrature quad(plan, u0.mesh_ptr(), sigma);
  return continuous(u0.mesh_ptr(), phi_at(quad, nl, sigma, u0.values(), values_of(u_path), values_of(v_path), dt));
}

GridFunction duhamel_psi(const HeatKernelPlan& plan, const Nonlinearity& nl, double sigma, const GridFunction& v0,
                         const TimePath& u_path, const TimePath& v_path) {
  if (nl.regime != Regime::ParabolicParabolic)
    fail(ErrorKind::InvalidArgument, "Psi is defined for the parabolic-parabolic regime");
  const double dt = path_step(u_path, v0.mesh(), "u path");
  path_step(v_path, v0.mesh(), "v path");
  check_same_times(u_path, v_path);
  if (dt == 0.0) return v0;
  DuhamelQuadrature quad(plan, v0.mesh_ptr(), sigma);
  const std::size_t n = u_path.size() - 1;
  std::vector<Eigen::VectorXd> src(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const auto& u = u_path.values[k].values();
    const auto& v = v_path.values[k].values();
    src[k].resize(u.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) src[k][j] = nl.f3(u[j], v[j]) + sigma * v[j];
  }
  const double h = dt / nl.tau;
  return continuous(v0.mesh_ptr(), quad.free(KernelKind::Heat, h, static_cast<int>(n)) * v0.values() +
                                       quad.integral(KernelKind::Heat, h, src, n));
}

GridFunction duhamel_theta(const HeatKernelPlan& plan, const Nonlinearity& nl, double sigma,
                           const DiscreteLaplacian& lap, const GridFunction& u0, const TimePath& u_path) {
  if (nl.regime != Regime::ParabolicElliptic)
    fail(ErrorKind::InvalidArgument, "Theta is defined for the parabolic-elliptic regime");
  require_same_mesh(lap.mesh(), u0.mesh());
  const double dt = path_step(u_path, u0.mesh(), "u path");
  if (dt == 0.0) return u0;
  TimePath v_path;
  v_path.times = u_path.times;
  for (const auto& u : u_path.values) v_path.values.push_back(resolvent_solve(lap, nl.sigma, map_values(u, nl.f)));
  DuhamelQuadrature quad(plan, u0.mesh_ptr(), sigma);
  return continuous(u0.mesh_ptr(), phi_at(quad, nl, sigma, u0.values(), values_of(u_path), values_of(v_path), dt));
}

}  // namespace ksg
