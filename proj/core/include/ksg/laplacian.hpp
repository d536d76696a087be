#pragma once

#include <map>
#include <memory>
#include <mutex>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ksg/mesh.hpp"

namespace ksg {

/// Neumann-Kirchhoff Laplacian on a mesh, acting on the shared layout
/// (one unknown per vertex). Stored as L = W^{-1} A with W the diagonal of
/// trapezoid weights and A symmetric, so L is self-adjoint in the weighted
/// inner product. Vertex rows are the flux balance sum_ends (u_nb - u_v)/h_e
/// divided by the vertex weight; a leaf row reduces to 2 (u_1 - u_0) / h^2.
class DiscreteLaplacian {
 public:
  explicit DiscreteLaplacian(std::shared_ptr<const Mesh> mesh);
  ~DiscreteLaplacian();

  const Mesh& mesh() const noexcept { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const noexcept { return mesh_; }
  std::size_t size() const noexcept { return mesh_->shared_size(); }

  const Eigen::SparseMatrix<double>& stiffness() const noexcept { return a_; }
  const Eigen::VectorXd& weights() const noexcept { return w_; }
  /// L = W^{-1} A as a sparse matrix.
  Eigen::SparseMatrix<double> matrix() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& shared) const;
  GridFunction apply(const GridFunction& u) const;
  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;

  /// Solves (sigma W - A) x = rhs with a factorization cached per sigma.
  Eigen::VectorXd solve_shifted(double sigma, const Eigen::VectorXd& rhs) const;

 private:
  struct Factor;
  std::shared_ptr<const Mesh> mesh_;
  Eigen::SparseMatrix<double> a_;
  Eigen::VectorXd w_;
  mutable std::mutex factor_mutex_;
  mutable std::map<double, std::shared_ptr<Factor>> factors_;
};

/// Throws MeshTooCoarse unless nodes_per_unit_length >= 2 / (shortest edge).
DiscreteLaplacian assemble(std::shared_ptr<const MetricGraph> graph, double nodes_per_unit_length);

/// Eigenpairs of the discrete Laplacian, largest (least negative) first.
struct SpectralDecomposition {
  std::shared_ptr<const Mesh> mesh;
  Eigen::VectorXd weights;      // shared-layout quadrature weights
  Eigen::VectorXd eigenvalues;  // lambda_0 >= lambda_1 >= ...
  Eigen::MatrixXd vectors;      // columns, W-orthonormal, shared layout
  Eigen::VectorXd residuals;    // ||L phi - lambda phi||_W / max(1, |lambda|)

  std::size_t count() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
  GridFunction mode(std::size_t j) const;
  /// Coefficients <u, phi_j>_W.
  Eigen::VectorXd coefficients(const GridFunction& u) const;
  GridFunction synthesize(const Eigen::VectorXd& coefficients) const;

  /// On a mesh with one h on every edge, discrete eigenvectors are exact
  /// samples of continuum eigenfunctions and lambda_h = -(4/h^2) sin^2(kh/2).
  /// Returns the continuum eigenvalues -k^2 recovered from that relation.
  /// Throws MeshMismatch if the mesh is not uniform.
  Eigen::VectorXd continuum_eigenvalues() const;
};

/// k largest eigenpairs. Dense symmetric solve for N <= 4000, shift-invert
/// subspace iteration otherwise. Throws ConvergenceFailure.
SpectralDecomposition eigendecompose(const DiscreteLaplacian& lap, std::size_t k);

/// w with (sigma - L) w = f, i.e. (sigma W - A) w = W f. Throws SolveFailure.
GridFunction resolvent_solve(const DiscreteLaplacian& lap, double sigma, const GridFunction& f);

enum class SpectrumScale {
  Discrete,   // use the eigenvalues of L
  Continuum,  // use continuum_eigenvalues(), i.e. the exact flow of the sampled modes
};

/// sum_j e^{(lambda_j - sigma) t} <u, phi_j> phi_j.
GridFunction spectral_heat(const SpectralDecomposition& dec, double t, double sigma, const GridFunction& u,
                           SpectrumScale scale = SpectrumScale::Discrete);

/// sum_j (sigma - lambda_j)^alpha <u, phi_j> phi_j.
GridFunction apply_fractional_power(const SpectralDecomposition& dec, double sigma, double alpha,
                                    const GridFunction& u, SpectrumScale scale = SpectrumScale::Discrete);

}  // namespace ksg
