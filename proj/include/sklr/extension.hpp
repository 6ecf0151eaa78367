#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "sklr/factored_kernel.hpp"
#include "sklr/init_kernel.hpp"

namespace sklr {

/// Everything needed to evaluate the learned kernel between arbitrary points:
///   k(x, y) = k₀(x, y) + k_xᵀ K₀† (K − K₀) K₀† k_y,
/// held in the r-space as k₀(x, y) + (Qᵀk_x)ᵀ M (Qᵀk_y).
/// k₀ is the raw Gaussian minus the Nyström extension of the eigenpairs the
/// PSD projection removed, so it reproduces the projected K₀ on training items.
struct KernelExtension {
  Eigen::MatrixXd train_features;
  Eigen::VectorXd train_sigma;
  int neighbors = kDefaultNeighbors;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd M;  // r x r, Λ⁺ (K̂ − Λ) Λ⁺
  Eigen::MatrixXd removed_vectors;
  Eigen::VectorXd removed_values;
};

/// Pseudo-inverse cutoff: eigenvalues below 1e-10 of the largest count as zero.
inline KernelExtension build_extension(const FactoredKernel& learned, const InitialKernel& init,
                                       double pinv_cutoff = 1e-10) {
  learned.validate();
  if (learned.n() != init.features.rows() || init.sigma.size() != init.features.rows())
    throw std::invalid_argument("extension: factorization does not match the initial kernel");
  KernelExtension ext;
  ext.train_features = init.features;
  ext.train_sigma = init.sigma;
  ext.neighbors = init.neighbors;
  ext.Q = learned.Q;
  ext.removed_vectors = init.removed_vectors;
  ext.removed_values = init.removed_values;
  const auto& lam = learned.k0_eigenvalues;
  const double top = lam.maxCoeff();
  Eigen::VectorXd pinv(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) pinv(i) = lam(i) > pinv_cutoff * top ? 1.0 / lam(i) : 0.0;
  Eigen::MatrixXd diff = learned.kernel_hat();
  diff.diagonal() -= lam;
  ext.M = pinv.asDiagonal() * diff * pinv.asDiagonal();
  ext.M = 0.5 * (ext.M + ext.M.transpose());
  return ext;
}

/// Bandwidth of a new point: distance to its k-th nearest training point. A
/// training point at distance zero is taken to be the point itself and
/// skipped, so training items get back their own bandwidth.
inline double bandwidth_for(const KernelExtension& ext, const Eigen::VectorXd& x) {
  const auto n = ext.train_features.rows();
  if (x.size() != ext.train_features.cols()) throw std::invalid_argument("extension: dimension mismatch");
  std::vector<double> d(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    d[static_cast<std::size_t>(i)] = (ext.train_features.row(i) - x.transpose()).squaredNorm();
  std::sort(d.begin(), d.end());
  const std::size_t offset = d.front() == 0.0 ? 1 : 0;
  const std::size_t idx = offset + static_cast<std::size_t>(ext.neighbors) - 1;
  if (idx >= d.size()) throw std::invalid_argument("extension: too few training points for the neighbor count");
  const double s = std::sqrt(d[idx]);
  if (!(s > 0.0)) throw std::invalid_argument("extension: zero bandwidth for new point");
  return s;
}

inline Eigen::VectorXd bandwidths_for(const KernelExtension& ext, const Eigen::MatrixXd& X) {
  Eigen::VectorXd s(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) s(i) = bandwidth_for(ext, X.row(i).transpose());
  return s;
}

/// Learned-kernel Gram block between the rows of A and the rows of B.
inline Eigen::MatrixXd extended_gram(const KernelExtension& ext, const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& B) {
  const Eigen::VectorXd sa = bandwidths_for(ext, A);
  const Eigen::VectorXd sb = bandwidths_for(ext, B);
  const Eigen::MatrixXd KA = gaussian_cross_kernel(A, sa, ext.train_features, ext.train_sigma);
  const Eigen::MatrixXd KB = gaussian_cross_kernel(B, sb, ext.train_features, ext.train_sigma);
  const Eigen::MatrixXd PA = KA * ext.Q;
  const Eigen::MatrixXd PB = KB * ext.Q;
  Eigen::MatrixXd out = gaussian_cross_kernel(A, sa, B, sb) + PA * ext.M * PB.transpose();
  if (ext.removed_values.size() > 0) {
    const Eigen::MatrixXd NA = KA * ext.removed_vectors;
    const Eigen::MatrixXd NB = KB * ext.removed_vectors;
    out -= NA * ext.removed_values.cwiseInverse().asDiagonal() * NB.transpose();
  }
  if (!out.allFinite()) throw std::invalid_argument("extension: non-finite kernel value");
  return out;
}

/// Symmetric Gram over the rows of A.
inline Eigen::MatrixXd extended_gram(const KernelExtension& ext, const Eigen::MatrixXd& A) {
  Eigen::MatrixXd K = extended_gram(ext, A, A);
  return 0.5 * (K + K.transpose());
}

inline double extended_kernel(const KernelExtension& ext, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  return extended_gram(ext, x.transpose(), y.transpose())(0, 0);
}

}  // namespace sklr
