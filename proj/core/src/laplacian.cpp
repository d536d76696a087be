#include "ksg/laplacian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

#include "ksg/error.hpp"

namespace ksg {

struct DiscreteLaplacian::Factor {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

DiscreteLaplacian::DiscreteLaplacian(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
  if (!mesh_) fail(ErrorKind::InvalidArgument, "laplacian needs a mesh");
  const Mesh& m = *mesh_;
  const auto n = static_cast<Eigen::Index>(m.shared_size());
  std::vector<Eigen::Triplet<double>> trip;
  for (EdgeIndex e = 0; e < m.graph().edge_count(); ++e) {
    const double c = 1.0 / m.spacing(e);
    for (std::size_t j = 0; j < m.intervals(e); ++j) {
      const auto a = static_cast<Eigen::Index>(m.shared_index(e, j));
      const auto b = static_cast<Eigen::Index>(m.shared_index(e, j + 1));
      trip.emplace_back(a, a, -c);
      trip.emplace_back(b, b, -c);
      trip.emplace_back(a, b, c);
      trip.emplace_back(b, a, c);
    }
  }
  a_.resize(n, n);
  a_.setFromTriplets(trip.begin(), trip.end());
  a_.makeCompressed();
  w_ = m.shared_weights();
}

DiscreteLaplacian::~DiscreteLaplacian() = default;

Eigen::SparseMatrix<double> DiscreteLaplacian::matrix() const {
  Eigen::SparseMatrix<double> l = w_.cwiseInverse().asDiagonal() * a_;
  return l;
}

Eigen::VectorXd DiscreteLaplacian::apply(const Eigen::VectorXd& shared) const {
  if (shared.size() != w_.size()) fail(ErrorKind::MeshMismatch, "vector size does not match laplacian");
  return (a_ * shared).cwiseQuotient(w_);
}

GridFunction DiscreteLaplacian::apply(const GridFunction& u) const {
  require_same_mesh(*mesh_, u.mesh());
  return GridFunction::from_shared(mesh_, apply(u.to_shared()));
}

double DiscreteLaplacian::inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  return (u.array() * v.array() * w_.array()).sum();
}

Eigen::VectorXd DiscreteLaplacian::solve_shifted(double sigma, const Eigen::VectorXd& rhs) const {
  std::shared_ptr<Factor> f;
  {
    std::lock_guard lock(factor_mutex_);
    auto it = factors_.find(sigma);
    if (it != factors_.end()) f = it->second;
  }
  if (!f) {
    f = std::make_shared<Factor>();
    Eigen::SparseMatrix<double> m = -a_;
    for (Eigen::Index i = 0; i < w_.size(); ++i) m.coeffRef(i, i) += sigma * w_[i];
    f->ldlt.compute(m);
    if (f->ldlt.info() != Eigen::Success)
      fail(ErrorKind::SolveFailure, "factorization of sigma W - A failed for sigma = " + std::to_string(sigma));
    std::lock_guard lock(factor_mutex_);
    factors_.emplace(sigma, f);
  }
  Eigen::VectorXd x = f->ldlt.solve(rhs);
  if (f->ldlt.info() != Eigen::Success || !x.allFinite())
    fail(ErrorKind::SolveFailure, "shifted solve failed for sigma = " + std::to_string(sigma));
  return x;
}

DiscreteLaplacian assemble(std::shared_ptr<const MetricGraph> graph, double nodes_per_unit_length) {
  if (!graph) fail(ErrorKind::InvalidArgument, "assemble needs a graph");
  const double need = 2.0 / graph->shortest_edge();
  if (nodes_per_unit_length < need * (1.0 - 1e-12))
    fail(ErrorKind::MeshTooCoarse, "nodes_per_unit_length " + std::to_string(nodes_per_unit_length) +
                                       " below 2 / shortest edge = " + std::to_string(need));
  return DiscreteLaplacian(std::make_shared<const Mesh>(std::move(graph), nodes_per_unit_length));
}

GridFunction SpectralDecomposition::mode(std::size_t j) const {
  if (j >= count()) fail(ErrorKind::InvalidArgument, "mode index out of range");
  return GridFunction::from_shared(mesh, vectors.col(static_cast<Eigen::Index>(j)));
}

Eigen::VectorXd SpectralDecomposition::coefficients(const GridFunction& u) const {
  require_same_mesh(*mesh, u.mesh());
  const Eigen::VectorXd s = u.to_shared();
  return vectors.transpose() * s.cwiseProduct(weights);
}

GridFunction SpectralDecomposition::synthesize(const Eigen::VectorXd& c) const {
  return GridFunction::from_shared(mesh, vectors * c);
}

Eigen::VectorXd SpectralDecomposition::continuum_eigenvalues() const {
  const auto h = mesh->uniform_spacing();
  if (!h) fail(ErrorKind::MeshMismatch, "continuum eigenvalues need the same h on every edge");
  Eigen::VectorXd out(eigenvalues.size());
  for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
    const double s = std::clamp(*h * std::sqrt(std::max(0.0, -eigenvalues[j])) / 2.0, 0.0, 1.0);
    const double k = 2.0 / *h * std::asin(s);
    out[j] = -k * k;
  }
  return out;
}

namespace {

void canonical_signs(Eigen::MatrixXd& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const double scale = v.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) > 1e-8 * scale) {
        if (v(i, j) < 0) v.col(j) *= -1.0;
        break;
      }
    }
  }
}

void fill_residuals(const DiscreteLaplacian& lap, SpectralDecomposition& dec) {
  dec.residuals.resize(dec.eigenvalues.size());
  for (Eigen::Index j = 0; j < dec.eigenvalues.size(); ++j) {
    const Eigen::VectorXd phi = dec.vectors.col(j);
    const Eigen::VectorXd r = lap.apply(phi) - dec.eigenvalues[j] * phi;
    dec.residuals[j] = std::sqrt(lap.inner(r, r)) / std::max(1.0, std::abs(dec.eigenvalues[j]));
  }
}

// Subspace iteration on (s W - A)^{-1} W, whose dominant eigenvalues
// 1/(s - lambda) belong to the least negative lambda.
void iterative_eigs(const DiscreteLaplacian& lap, std::size_t k, SpectralDecomposition& dec) {
  const auto n = static_cast<Eigen::Index>(lap.size());
  const Eigen::VectorXd& w = lap.weights();
  const auto block = static_cast<Eigen::Index>(std::min<std::size_t>(lap.size(), k + std::max<std::size_t>(10, k / 2)));
  const double shift = 1e-2;
  // Representing phi in floating point already costs about eps ||L|| in the
  // residual, so convergence is judged relative to that floor.
  const double lnorm = 2.0 * (-Eigen::VectorXd(lap.stiffness().diagonal())).cwiseQuotient(w).maxCoeff();
  const double tol = std::max(1e-10, 100.0 * std::numeric_limits<double>::epsilon() * lnorm);
  Eigen::MatrixXd x(n, block);
  // Deterministic start: low-frequency cosines of the node index plus a constant.
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = std::cos(0.7 * static_cast<double>(j) * static_cast<double>(i) / n + 0.3 * j);
  const auto w_orth = [&](Eigen::MatrixXd& m) {
    Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::MatrixXd y = sw.asDiagonal() * m;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    m = sw.cwiseInverse().asDiagonal() * (qr.householderQ() * Eigen::MatrixXd::Identity(n, m.cols()));
  };
  w_orth(x);
  for (int iter = 0; iter < 2000; ++iter) {
    Eigen::MatrixXd y(n, block);
    for (Eigen::Index j = 0; j < block; ++j) y.col(j) = lap.solve_shifted(shift, w.cwiseProduct(x.col(j)));
    w_orth(y);
    // Rayleigh-Ritz with the symmetric pencil (A, W).
    Eigen::MatrixXd h = y.transpose() * (lap.stiffness() * y);
    h = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    Eigen::MatrixXd ritz = y * es.eigenvectors();
    Eigen::VectorXd vals = es.eigenvalues();
    x = ritz;
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const Eigen::Index c = block - 1 - static_cast<Eigen::Index>(j);
      const Eigen::VectorXd r = lap.apply(Eigen::VectorXd(x.col(c))) - vals[c] * x.col(c);
      worst = std::max(worst, std::sqrt(lap.inner(r, r)) / std::max(1.0, std::abs(vals[c])));
    }
    if (worst < tol) {
      dec.eigenvalues.resize(static_cast<Eigen::Index>(k));
      dec.vectors.resize(n, static_cast<Eigen::Index>(k));
      for (std::size_t j = 0; j < k; ++j) {
        const Eigen::Index c = block - 1 - static_cast<Eigen::Index>(j);
        dec.eigenvalues[static_cast<Eigen::Index>(j)] = vals[c];
        dec.vectors.col(static_cast<Eigen::Index>(j)) = x.col(c);
      }
      return;
    }
  }
  fail(ErrorKind::ConvergenceFailure, "subspace iteration did not converge for k = " + std::to_string(k));
}

}  // namespace

SpectralDecomposition eigendecompose(const DiscreteLaplacian& lap, std::size_t k) {
  const std::size_t n = lap.size();
  if (k < 1 || k > n) fail(ErrorKind::InvalidArgument, "eigenpair count must be in [1, N]");
  SpectralDecomposition dec;
  dec.mesh = lap.mesh_ptr();
  dec.weights = lap.weights();
  if (n <= 4000) {
    const Eigen::VectorXd isw = lap.weights().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd b = isw.asDiagonal() * Eigen::MatrixXd(lap.stiffness()) * isw.asDiagonal();
    b = 0.5 * (b + b.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    if (es.info() != Eigen::Success) fail(ErrorKind::ConvergenceFailure, "dense eigensolver failed");
    const auto kk = static_cast<Eigen::Index>(k);
    dec.eigenvalues = es.eigenvalues().tail(kk).reverse();
    dec.vectors = (isw.asDiagonal() * es.eigenvectors().rightCols(kk)).rowwise().reverse();
  } else {
    iterative_eigs(lap, k, dec);
  }
  canonical_signs(dec.vectors);
  fill_residuals(lap, dec);
  return dec;
}

GridFunction resolvent_solve(const DiscreteLaplacian& lap, double sigma, const GridFunction& f) {
  if (!(sigma > 0.0)) fail(ErrorKind::InvalidArgument, "resolvent needs sigma > 0");
  require_same_mesh(lap.mesh(), f.mesh());
  const Eigen::VectorXd rhs = lap.weights().cwiseProduct(f.to_shared());
  Eigen::VectorXd w = lap.solve_shifted(sigma, rhs);
  // One step of iterative refinement keeps the relative residual near rounding.
  const Eigen::VectorXd r = rhs - (sigma * lap.weights().cwiseProduct(w) - lap.stiffness() * w);
  w += lap.solve_shifted(sigma, r);
  return GridFunction::from_shared(lap.mesh_ptr(), w);
}

namespace {

Eigen::VectorXd scale_eigenvalues(const SpectralDecomposition& dec, SpectrumScale scale) {
  return scale == SpectrumScale::Continuum ? dec.continuum_eigenvalues() : dec.eigenvalues;
}

}  // namespace

GridFunction spectral_heat(const SpectralDecomposition& dec, double t, double sigma, const GridFunction& u,
                           SpectrumScale scale) {
  if (!(t >= 0.0)) fail(ErrorKind::NonpositiveTime, "spectral_heat needs t >= 0");
  const Eigen::VectorXd lambda = scale_eigenvalues(dec, scale);
  Eigen::VectorXd c = dec.coefficients(u);
  for (Eigen::Index j = 0; j < c.size(); ++j) c[j] *= std::exp((lambda[j] - sigma) * t);
  return dec.synthesize(c);
}

GridFunction apply_fractional_power(const SpectralDecomposition& dec, double sigma, double alpha,
                                    const GridFunction& u, SpectrumScale scale) {
  if (!(sigma > 0.0)) fail(ErrorKind::InvalidArgument, "fractional power needs sigma > 0");
  const Eigen::VectorXd lambda = scale_eigenvalues(dec, scale);
  Eigen::VectorXd c = dec.coefficients(u);
  for (Eigen::Index j = 0; j < c.size(); ++j) c[j] *= std::pow(sigma - lambda[j], alpha);
  return dec.synthesize(c);
}

}  // namespace ksg
