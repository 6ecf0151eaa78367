#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "sklr/constraints.hpp"
#include "sklr/dataset.hpp"
#include "sklr/factored_kernel.hpp"

namespace sklr {

inline constexpr int kDefaultNeighbors = 7;
inline constexpr double kDefaultEnergy = 0.9;

/// All pairwise squared Euclidean distances between rows of A and rows of B.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd D(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j) D(i, j) = (A.row(i) - B.row(j)).squaredNorm();
  return D;
}

/// σᵢ = distance from xᵢ to its k-th nearest other item.
inline Eigen::VectorXd adaptive_bandwidths(const Eigen::MatrixXd& X, int k = kDefaultNeighbors) {
  const auto n = X.rows();
  if (k < 1) throw std::invalid_argument("neighbor count must be positive");
  if (k >= n)
    throw std::invalid_argument("neighbor count " + std::to_string(k) + " must be below item count " +
                                std::to_string(n));
  if (!X.allFinite()) throw std::invalid_argument("features must be finite");
  const Eigen::MatrixXd D = squared_distances(X, X);
  Eigen::VectorXd sigma(n);
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) row[c++] = D(i, j);
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    sigma(i) = std::sqrt(row[static_cast<std::size_t>(k - 1)]);
    if (!(sigma(i) > 0.0))
      throw std::invalid_argument("zero bandwidth at item " + std::to_string(i) +
                                  ": its k nearest neighbors coincide with it");
  }
  return sigma;
}

inline Eigen::VectorXd adaptive_bandwidths(const Dataset& ds, int k = kDefaultNeighbors) {
  return adaptive_bandwidths(ds.features, k);
}

/// K[a,b] = exp(-‖x_a - y_b‖² / (σ_a σ_b)) between the rows of X (bandwidths
/// sx) and Y (bandwidths sy).
inline Eigen::MatrixXd gaussian_cross_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& sx,
                                             const Eigen::MatrixXd& Y, const Eigen::VectorXd& sy) {
  if (sx.size() != X.rows() || sy.size() != Y.rows())
    throw std::invalid_argument("bandwidth count does not match item count");
  if ((sx.array() <= 0.0).any() || (sy.array() <= 0.0).any())
    throw std::invalid_argument("bandwidths must be positive");
  Eigen::MatrixXd K = squared_distances(X, Y);
  for (Eigen::Index a = 0; a < K.rows(); ++a)
    for (Eigen::Index b = 0; b < K.cols(); ++b) K(a, b) = std::exp(-K(a, b) / (sx(a) * sy(b)));
  if (!K.allFinite()) throw std::invalid_argument("kernel has non-finite entries");
  return K;
}

/// Initial kernel with pairwise bandwidth σᵢⱼ² = σᵢσⱼ. Symmetric with unit diagonal.
inline Eigen::MatrixXd gaussian_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& sigma) {
  Eigen::MatrixXd K = gaussian_cross_kernel(X, sigma, X, sigma);
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i);
  }
  return K;
}

inline Eigen::MatrixXd gaussian_kernel(const Dataset& ds, const Eigen::VectorXd& sigma) {
  return gaussian_kernel(ds.features, sigma);
}

/// Top-r eigenpairs of K0 with r the smallest rank whose Frobenius energy
/// ratio √(Σ_{i≤r} λᵢ²)/√(Σ λᵢ²) reaches `energy`. Eigenvectors are sorted by
/// descending eigenvalue and signed so their largest-magnitude entry is positive.
inline FactoredKernel low_rank_factorize(const Eigen::MatrixXd& K0, double energy = kDefaultEnergy) {
  if (!(energy > 0.0 && energy <= 1.0)) throw std::invalid_argument("energy must lie in (0, 1]");
  if (K0.rows() != K0.cols() || K0.rows() == 0) throw std::invalid_argument("kernel must be square");
  const double asym = (K0 - K0.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) throw std::invalid_argument("kernel is not symmetric");

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (K0 + K0.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const auto n = K0.rows();
  Eigen::VectorXd lambda = es.eigenvalues().reverse();
  Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();

  const double spectral = std::max(std::abs(lambda(0)), std::abs(lambda(n - 1)));
  FactoredKernel fk;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda(i) < 0.0) {
      if (lambda(i) < -1e-8 * spectral)
        throw std::invalid_argument("kernel has a negative eigenvalue " + std::to_string(lambda(i)));
      lambda(i) = 0.0;
      ++fk.clipped;
    }
  }
  if (!(lambda(0) > 0.0)) throw std::invalid_argument("kernel is zero");

  const double total = lambda.squaredNorm();
  // Eigenvalues at rounding level carry no energy and would make K̂₀ singular.
  const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * lambda(0);
  Eigen::Index r = 0;
  double acc = 0.0;
  while (r < n && lambda(r) > floor) {
    acc += lambda(r) * lambda(r);
    ++r;
    if (std::sqrt(acc / total) >= energy * (1.0 - 1e-12)) break;
  }

  fk.Q = vecs.leftCols(r);
  for (Eigen::Index c = 0; c < r; ++c) {
    Eigen::Index arg = 0;
    fk.Q.col(c).cwiseAbs().maxCoeff(&arg);
    if (fk.Q(arg, c) < 0.0) fk.Q.col(c) *= -1.0;
  }
  fk.k0_eigenvalues = lambda.head(r);
  fk.G = fk.k0_eigenvalues.cwiseSqrt().asDiagonal();
  return fk;
}

/// K = Q (G Gᵀ) Qᵀ, symmetrized.
inline Eigen::MatrixXd lift_kernel(const FactoredKernel& fk) {
  const Eigen::MatrixXd QG = fk.Q * fk.G;
  Eigen::MatrixXd K = QG * QG.transpose();
  return 0.5 * (K + K.transpose());
}

/// Moves a constraint into the r-space: Û = QᵀU, V̂ = QᵀV, so Û V̂ᵀ = Qᵀ C Q.
inline Rank2Constraint transform_rank2(const Eigen::MatrixXd& Q, const Rank2Constraint& rc) {
  if (rc.U.rows() != Q.rows()) throw std::invalid_argument("transform_rank2: dimension mismatch");
  Rank2Constraint out;
  out.U.resize(Q.cols(), 2);
  out.V.resize(Q.cols(), 2);
  out.U.setZero();
  out.V.setZero();
  // The item-space factors have at most three non-zero rows.
  for (Eigen::Index a = 0; a < rc.U.rows(); ++a) {
    if (rc.U.row(a).isZero(0.0) && rc.V.row(a).isZero(0.0)) continue;
    out.U.noalias() += Q.row(a).transpose() * rc.U.row(a);
    out.V.noalias() += Q.row(a).transpose() * rc.V.row(a);
  }
  out.sense = rc.sense;
  out.origin = rc.origin;
  return out;
}

inline std::vector<Rank2Constraint> transform_all(const Eigen::MatrixXd& Q,
                                                  const std::vector<Rank2Constraint>& cs) {
  std::vector<Rank2Constraint> out;
  out.reserve(cs.size());
  for (const auto& rc : cs) out.push_back(transform_rank2(Q, rc));
  return out;
}

/// Training features and bandwidths: everything needed to evaluate the
/// initial kernel function at points outside the training set.
struct InitialKernel {
  Eigen::MatrixXd features;
  Eigen::VectorXd sigma;
  int neighbors = kDefaultNeighbors;
  Eigen::MatrixXd K0;
  int negative_clipped = 0;     // eigenvalues of the raw Gram matrix set to zero
  double negative_extreme = 0.0;  // most negative raw eigenvalue (0 if none)
  // Clipped eigenpairs with |λ| above rounding level; the out-of-sample
  // extension subtracts their Nyström extension from the raw kernel.
  Eigen::MatrixXd removed_vectors;  // n x q
  Eigen::VectorXd removed_values;   // q, all negative
};

namespace detail {

inline Eigen::MatrixXd psd_from(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, const Eigen::MatrixXd& K,
                                int* clipped, double* extreme) {
  Eigen::VectorXd lam = es.eigenvalues();
  int count = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(i) < 0.0) {
      lam(i) = 0.0;
      ++count;
    }
  if (clipped) *clipped = count;
  if (extreme) *extreme = std::min(0.0, es.eigenvalues()(0));
  if (count == 0) return 0.5 * (K + K.transpose());
  Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace detail

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues set to zero.
/// The adaptive-bandwidth Gram matrix is not PSD in general.
inline Eigen::MatrixXd psd_project(const Eigen::MatrixXd& K, int* clipped = nullptr, double* extreme = nullptr) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (K + K.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return detail::psd_from(es, K, clipped, extreme);
}

inline InitialKernel build_initial_kernel(const Eigen::MatrixXd& X, int neighbors = kDefaultNeighbors) {
  InitialKernel ik;
  ik.features = X;
  ik.neighbors = neighbors;
  ik.sigma = adaptive_bandwidths(X, neighbors);
  const Eigen::MatrixXd raw = gaussian_kernel(X, ik.sigma);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(raw);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  ik.K0 = detail::psd_from(es, raw, &ik.negative_clipped, &ik.negative_extreme);
  const auto& lam = es.eigenvalues();
  const double cut = 1e-10 * std::max(std::abs(lam(0)), std::abs(lam(lam.size() - 1)));
  Eigen::Index q = 0;
  while (q < lam.size() && lam(q) < -cut) ++q;
  ik.removed_vectors = es.eigenvectors().leftCols(q);
  ik.removed_values = lam.head(q);
  return ik;
}

}  // namespace sklr
