#include <algorithm>
#include <cmath>
#include <numbers>

#include "ksg/error.hpp"
#include "ksg/heat_kernel.hpp"
#include "ksg/parallel.hpp"

namespace ksg {

namespace {

// Terms with z^2 / 4t beyond this contribute below 1e-304 relative.
constexpr double kExponentCutoff = 700.0;

double gauss(double t, double z) { return std::exp(-z * z / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t); }

// Integral of f_t over [a, b], written to avoid cancellation in the tails.
double gauss_mass(double t, double a, double b) {
  const double s = 2.0 * std::sqrt(t);
  if (a >= 0.0) return 0.5 * (std::erfc(a / s) - std::erfc(b / s));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / s) - std::erfc(-a / s));
  return 0.5 * (std::erf(b / s) - std::erf(a / s));
}

struct KindFactors {
  bool derivative;  // integrate f' instead of f
  double coefficient;
};

KindFactors factors(KernelKind kind, const HeatKernelPlan::Term& term) {
  switch (kind) {
    case KernelKind::Heat: return {false, term.weight};
    case KernelKind::HeatDx: return {true, -term.weight * term.sy};
    case KernelKind::DxHeat: return {true, -term.weight * term.sx};
  }
  return {false, 0.0};
}

}  // namespace

void HeatKernelPlan::check_mesh(const Mesh& mesh) const {
  if (mesh.graph_ptr() != graph_ && &mesh.graph() != graph_.get())
    fail(ErrorKind::MeshMismatch, "mesh is built on a different graph than the kernel plan");
}

void HeatKernelPlan::build_row(const Mesh& mesh, double t, KernelKind kind, std::size_t row, double* out) const {
  const MetricGraph& g = *graph_;
  const EdgeIndex ex = mesh.edge_of(row);
  const double xi = mesh.position(ex, mesh.node_of(row));
  const double lx = g.length(ex);
  const double zmax = std::sqrt(4.0 * t * kExponentCutoff);
  const Eigen::VectorXd& simpson = mesh.simpson_weights();
  std::fill(out, out + mesh.size(), 0.0);

  for (EdgeIndex ey = 0; ey < g.edge_count(); ++ey) {
    const std::size_t n = mesh.intervals(ey);
    const double h = mesh.spacing(ey);
    const double ly = g.length(ey);
    const std::size_t off = mesh.offset(ey);
    const bool moments = t < small_time_threshold(h);

    for (const Term& term : terms(ex, ey)) {
      // Gaussian argument z(eta) = a0 + sy * eta for y = (ey, eta).
      const double sx_coord = term.sx > 0 ? xi : lx - xi;
      const double a0 = term.length - sx_coord + (term.sy > 0 ? 0.0 : ly);
      if (a0 - ly > zmax || a0 + ly < -zmax) {
        // Whole edge out of reach; terms are sorted by length so once the
        // nearest point is beyond the cutoff for a positive offset, all later
        // terms of the same orientation are as well. Keep it simple and skip.
        if (term.length - lx - ly > zmax) break;
        continue;
      }
      double lo, hi;
      if (term.sy > 0) {
        lo = -zmax - a0;
        hi = zmax - a0;
      } else {
        lo = a0 - zmax;
        hi = a0 + zmax;
      }
      lo = std::max(lo, 0.0);
      hi = std::min(hi, ly);
      if (lo > hi) continue;
      const KindFactors kf = factors(kind, term);

      if (!moments) {
        const auto j0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo / h - 1e-9)));
        const auto j1 = std::min(n, static_cast<std::size_t>(std::floor(hi / h + 1e-9)));
        for (std::size_t j = j0; j <= j1; ++j) {
          const double z = a0 + term.sy * h * static_cast<double>(j);
          const double f = gauss(t, z);
          const double val = kf.derivative ? -z / (2.0 * t) * f : f;
          out[off + j] += kf.coefficient * val * simpson[static_cast<Eigen::Index>(off + j)];
        }
      } else {
        // Exact integral of the Gaussian (or its derivative) against the
        // piecewise-linear interpolant, cell by cell.
        const auto k0 = static_cast<std::size_t>(std::max(0.0, std::floor(lo / h)));
        const auto k1 = std::min(n, static_cast<std::size_t>(std::ceil(hi / h)));
        for (std::size_t k = k0; k < k1; ++k) {
          const double za = a0 + term.sy * h * static_cast<double>(k);
          const double zb = a0 + term.sy * h * static_cast<double>(k + 1);
          const double zlo = std::min(za, zb);
          const double zhi = std::max(za, zb);
          const double mass = gauss_mass(t, zlo, zhi);
          const double flo = gauss(t, zlo);
          const double fhi = gauss(t, zhi);
          double g0, gc;  // integral of g and of (z - zlo) g over the cell
          if (kf.derivative) {
            g0 = fhi - flo;
            gc = h * fhi - mass;
          } else {
            g0 = mass;
            gc = -2.0 * t * (fhi - flo) - zlo * mass;
          }
          const double ib = term.sy > 0 ? gc / h : g0 - gc / h;
          const double ia = g0 - ib;
          out[off + k] += kf.coefficient * ia;
          out[off + k + 1] += kf.coefficient * ib;
        }
      }
    }
  }
}

Eigen::MatrixXd HeatKernelPlan::build_matrix(const Mesh& mesh, double t, KernelKind kind) const {
  check_time(t);
  check_mesh(mesh);
  const std::size_t n = mesh.size();
  // Column-major storage: build rows into scratch, then copy.
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> row(n);
    for (std::size_t i = begin; i < end; ++i) {
      build_row(mesh, t, kind, i, row.data());
      for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  });
  return m;
}

std::shared_ptr<const Eigen::MatrixXd> HeatKernelPlan::lookup(const std::shared_ptr<const Mesh>& mesh, double t,
                                                              KernelKind kind) const {
  const CacheKey key{mesh.get(), t, static_cast<int>(kind)};
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      cache_[key] = CacheEntry{mesh, nullptr, ++cache_clock_, 1};
      return nullptr;
    }
    CacheEntry& entry = it->second;
    ++entry.requests;
    entry.stamp = ++cache_clock_;
    if (entry.matrix) return entry.matrix;
  }
  // Second request: materialize outside the lock, then publish. A concurrent
  // builder for the same key may race; the first one to publish wins.
  auto built = std::make_shared<const Eigen::MatrixXd>(build_matrix(*mesh, t, kind));
  const std::size_t bytes = static_cast<std::size_t>(built->size()) * sizeof(double);
  std::lock_guard lock(cache_mutex_);
  CacheEntry& entry = cache_[key];
  if (entry.matrix) return entry.matrix;
  if (bytes > cache_capacity_) return built;
  while (cache_bytes_ + bytes > cache_capacity_) {
    auto oldest = cache_.end();
    for (auto it = cache_.begin(); it != cache_.end(); ++it)
      if (it->second.matrix && (oldest == cache_.end() || it->second.stamp < oldest->second.stamp)) oldest = it;
    if (oldest == cache_.end()) break;
    cache_bytes_ -= static_cast<std::size_t>(oldest->second.matrix->size()) * sizeof(double);
    oldest->second.matrix.reset();
  }
  entry.mesh = mesh;
  entry.matrix = built;
  cache_bytes_ += bytes;
  return built;
}

Eigen::VectorXd HeatKernelPlan::apply(const std::shared_ptr<const Mesh>& mesh, double t, KernelKind kind,
                                      const Eigen::VectorXd& values) const {
  check_time(t);
  check_mesh(*mesh);
  const std::size_t n = mesh->size();
  if (static_cast<std::size_t>(values.size()) != n) fail(ErrorKind::MeshMismatch, "vector size does not match mesh");
  if (auto m = lookup(mesh, t, kind)) return (*m) * values;
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> row(n);
    for (std::size_t i = begin; i < end; ++i) {
      build_row(*mesh, t, kind, i, row.data());
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * values[static_cast<Eigen::Index>(j)];
      out[static_cast<Eigen::Index>(i)] = acc;
    }
  });
  return out;
}

void HeatKernelPlan::set_cache_capacity(std::size_t bytes) const {
  std::lock_guard lock(cache_mutex_);
  cache_capacity_ = bytes;
}

std::size_t HeatKernelPlan::cached_matrices() const {
  std::lock_guard lock(cache_mutex_);
  return static_cast<std::size_t>(
      std::count_if(cache_.begin(), cache_.end(), [](const auto& kv) { return kv.second.matrix != nullptr; }));
}

void HeatKernelPlan::clear_cache() const {
  std::lock_guard lock(cache_mutex_);
  cache_.clear();
  cache_bytes_ = 0;
}

namespace {

GridFunction apply_kind(const HeatKernelPlan& plan, double t, double sigma, const GridFunction& u, KernelKind kind) {
  if (!(sigma >= 0.0)) fail(ErrorKind::InvalidArgument, "sigma must be >= 0");
  Eigen::VectorXd out = plan.apply(u.mesh_ptr(), t, kind, u.values());
  out *= std::exp(-sigma * t);
  GridFunction r(u.mesh_ptr(), std::move(out), false);
  if (kind != KernelKind::DxHeat) r.make_vertex_continuous();
  return r;
}

}  // namespace

GridFunction apply_heat(const HeatKernelPlan& plan, double t, double sigma, const GridFunction& u) {
  return apply_kind(plan, t, sigma, u, KernelKind::Heat);
}

GridFunction apply_heat_dx(const HeatKernelPlan& plan, double t, double sigma, const GridFunction& u) {
  return apply_kind(plan, t, sigma, u, KernelKind::HeatDx);
}

GridFunction apply_dx_heat(const HeatKernelPlan& plan, double t, double sigma, const GridFunction& u) {
  return apply_kind(plan, t, sigma, u, KernelKind::DxHeat);
}

}  // namespace ksg
