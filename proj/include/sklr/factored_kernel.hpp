#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace sklr {

/// A rank-r kernel K = Q (G Gᵀ) Qᵀ held in the r-dimensional space spanned by
/// the columns of Q. The initial kernel in that space is diagonal, so only its
/// eigenvalues are stored.
struct FactoredKernel {
  Eigen::MatrixXd Q;             // n x r, orthonormal columns
  Eigen::MatrixXd G;             // r x r, K̂ = G Gᵀ
  Eigen::VectorXd k0_eigenvalues;  // diagonal of K̂₀ = Qᵀ K₀ Q, descending
  int clipped = 0;               // eigenvalues of K₀ clipped from slightly negative to zero

  Eigen::Index n() const { return Q.rows(); }
  Eigen::Index rank() const { return G.rows(); }

  Eigen::MatrixXd kernel_hat() const { return G * G.transpose(); }
  Eigen::MatrixXd initial_hat() const { return k0_eigenvalues.asDiagonal(); }

  /// tr(K̂) as the squared Frobenius norm of G.
  double trace_hat() const { return G.squaredNorm(); }

  void validate() const {
    const auto r = G.rows();
    if (G.cols() != r || Q.cols() != r || k0_eigenvalues.size() != r)
      throw std::invalid_argument("factored kernel: inconsistent ranks");
    if (r == 0) throw std::invalid_argument("factored kernel: rank zero");
    if ((k0_eigenvalues.array() <= 0.0).any())
      throw std::invalid_argument("factored kernel: initial kernel must be positive definite in r-space");
  }
};

/// Starting point of a learning run: K̂ = K̂₀.
inline FactoredKernel with_initial_factor(FactoredKernel fk) {
  fk.G = fk.k0_eigenvalues.cwiseSqrt().asDiagonal();
  return fk;
}

}  // namespace sklr
