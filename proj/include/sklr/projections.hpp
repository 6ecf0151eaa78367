#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "sklr/constraints.hpp"
#include "sklr/error.hpp"
#include "sklr/factored_kernel.hpp"

namespace sklr {

/// The (at most) two non-zero eigenvalues of K̂Ĉ, eta1 >= eta2.
/// For a positive definite K̂ and a constraint of mixed inertia,
/// eta2 <= 0 <= eta1.
struct EigenPair {
  double eta1 = 0.0;
  double eta2 = 0.0;

  double sum() const { return eta1 + eta2; }
  double product() const { return eta1 * eta2; }
};

/// Eigenvalues of a real 2x2 matrix with a real spectrum, computed from trace
/// and determinant. The smaller-magnitude root comes from det / larger root to
/// avoid cancellation.
inline EigenPair eigenvalues_2x2(const Eigen::Matrix2d& B) {
  const double half = 0.5 * (B(0, 0) + B(1, 1));
  const double det = B(0, 0) * B(1, 1) - B(0, 1) * B(1, 0);
  double disc = half * half - det;
  if (disc < 0.0) {
    const double scale = half * half + std::abs(det);
    if (disc < -1e-12 * scale) throw NumericalError("complex eigenvalues in rank-2 product");
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  const double big = half >= 0.0 ? half + root : half - root;
  const double small = big != 0.0 ? det / big : 0.0;
  return big >= small ? EigenPair{big, small} : EigenPair{small, big};
}

namespace detail {

struct ProjectedFactors {
  Eigen::Matrix<double, Eigen::Dynamic, 2> X;  // Gᵀ Û
  Eigen::Matrix<double, Eigen::Dynamic, 2> Y;  // Gᵀ V̂
  Eigen::Matrix2d B;                           // V̂ᵀ K̂ Û = Yᵀ X
};

inline ProjectedFactors project_factors(const FactoredKernel& fk, const Rank2Constraint& rc) {
  if (rc.dim() != fk.rank()) throw std::invalid_argument("constraint not in kernel space");
  ProjectedFactors pf;
  pf.X.noalias() = fk.G.transpose() * rc.U;
  pf.Y.noalias() = fk.G.transpose() * rc.V;
  pf.B.noalias() = pf.Y.transpose() * pf.X;
  return pf;
}

inline EigenPair checked_pair(const Eigen::Matrix2d& B) {
  const EigenPair ep = eigenvalues_2x2(B);
  const double tol = 1e-9 * std::max(std::abs(ep.eta1), std::abs(ep.eta2));
  if (ep.eta2 > tol || ep.eta1 < -tol)
    throw NumericalError("rank-2 eigenvalues (" + std::to_string(ep.eta1) + ", " +
                         std::to_string(ep.eta2) + ") do not straddle zero");
  return ep;
}

}  // namespace detail

/// Eigenvalues of the 2x2 matrix V̂ᵀK̂Û, which carries the non-zero spectrum of K̂Ĉ.
inline EigenPair rank2_eigenvalues(const FactoredKernel& fk, const Rank2Constraint& rc) {
  return detail::checked_pair(detail::project_factors(fk, rc).B);
}

/// Exact projection step α* = −(η1+η2) / (2 η1 η2), the stationary point of
/// log((1+αη1)(1+αη2)). Used unchanged for equality constraints, where the
/// sign is unrestricted.
inline double alpha_hard(const EigenPair& ep, Sense /*sense*/ = Sense::LeqZero) {
  const double p = ep.product();
  const double scale = ep.eta1 * ep.eta1 + ep.eta2 * ep.eta2;
  if (scale == 0.0 || std::abs(p) <= 1e-14 * scale)
    throw std::invalid_argument("alpha_hard: eigenvalue product is zero (inactive constraint)");
  return -0.5 * ep.sum() / p;
}

// ---------------------------------------------------------------------------
// Soft-margin step

/// Dual objective of one soft projection,
///   log((1+αη1)(1+αη2)) − (ν+α)²/(2λ),
/// where ν is the multiplier already accumulated for this constraint (0 for a
/// first visit). −inf outside the domain 1+αηᵢ > 0.
inline double soft_dual_objective(const EigenPair& ep, double lambda, double alpha, double prior = 0.0) {
  const double a = alpha * ep.eta1, b = alpha * ep.eta2;
  if (!(a > -1.0 && b > -1.0)) return -std::numeric_limits<double>::infinity();
  const double t = prior + alpha;
  return std::log1p(a) + std::log1p(b) - 0.5 * t * t / lambda;
}

/// Derivative of soft_dual_objective in α:
///   η1/(1+αη1) + η2/(1+αη2) − (ν+α)/λ.
inline double soft_stationarity(const EigenPair& ep, double lambda, double alpha, double prior = 0.0) {
  return ep.eta1 / (1.0 + alpha * ep.eta1) + ep.eta2 / (1.0 + alpha * ep.eta2) - (prior + alpha) / lambda;
}

/// Real roots of c3 x³ + c2 x² + c1 x + c0, each refined by Newton steps on
/// the polynomial. Degrades to the quadratic / linear case when the leading
/// coefficients vanish relative to the others.
inline std::vector<double> real_cubic_roots(double c3, double c2, double c1, double c0) {
  std::vector<double> roots;
  const double cmax = std::max({std::abs(c3), std::abs(c2), std::abs(c1), std::abs(c0)});
  if (cmax == 0.0) return roots;
  if (std::abs(c3) <= 1e-300 || std::abs(c3) < 1e-15 * cmax) {
    if (std::abs(c2) < 1e-15 * cmax) {
      if (c1 != 0.0) roots.push_back(-c0 / c1);
      return roots;
    }
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc < 0.0) return roots;
    const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
    if (q != 0.0) roots.push_back(c0 / q);
    roots.push_back(q / c2);
  } else {
    const double a = c2 / c3, b = c1 / c3, c = c0 / c3;
    // Depressed cubic t³ + p t + q with x = t - a/3.
    const double shift = a / 3.0;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double disc = q * q / 4.0 + p * p * p / 27.0;
    if (disc > 0.0) {
      const double s = std::sqrt(disc);
      const double u = std::cbrt(-q / 2.0 + s);
      const double v = std::cbrt(-q / 2.0 - s);
      roots.push_back(u + v - shift);
    } else if (p == 0.0) {
      roots.push_back(-shift);
    } else {
      const double m = 2.0 * std::sqrt(-p / 3.0);
      const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
      const double theta = std::acos(arg) / 3.0;
      for (int k = 0; k < 3; ++k)
        roots.push_back(m * std::cos(theta - 2.0 * M_PI * k / 3.0) - shift);
    }
  }
  for (double& x : roots) {
    for (int it = 0; it < 3; ++it) {
      const double f = ((c3 * x + c2) * x + c1) * x + c0;
      const double df = (3.0 * c3 * x + 2.0 * c2) * x + c1;
      if (df == 0.0) break;
      const double dx = f / df;
      if (!std::isfinite(dx)) break;
      x -= dx;
    }
  }
  return roots;
}

/// Coefficients (c3, c2, c1, c0) of the cubic obtained by multiplying the
/// stationarity condition by λ(1+αη1)(1+αη2):
///   η1η2 α³ + (η1+η2 + νη1η2) α² + (1 + ν(η1+η2) − 2λη1η2) α − (λ(η1+η2) − ν) = 0.
inline std::array<double, 4> soft_cubic_coefficients(const EigenPair& ep, double lambda, double prior = 0.0) {
  const double s = ep.sum(), p = ep.product();
  return {p, s + prior * p, 1.0 + prior * s - 2.0 * lambda * p, -(lambda * s - prior)};
}

/// Soft-margin projection step: the maximizer of soft_dual_objective over the
/// domain 1+αηᵢ > 0, additionally restricted to ν+α >= 0 for inequalities.
/// Candidates come from the closed-form cubic roots; the winner is polished
/// by safeguarded Newton on the stationarity condition.
inline double alpha_soft(const EigenPair& ep, double lambda, Sense sense = Sense::LeqZero,
                         double prior = 0.0) {
  if (!(lambda > 0.0)) throw std::invalid_argument("alpha_soft: lambda must be positive");
  const double inf = std::numeric_limits<double>::infinity();
  // Open domain (lo, hi) of the log terms.
  double lo = ep.eta1 > 0.0 ? -1.0 / ep.eta1 : -inf;
  double hi = ep.eta2 < 0.0 ? -1.0 / ep.eta2 : inf;
  if (ep.eta2 > 0.0) lo = std::max(lo, -1.0 / ep.eta2);
  if (ep.eta1 < 0.0) hi = std::min(hi, -1.0 / ep.eta1);
  const double floor = sense == Sense::LeqZero ? -prior : -inf;

  // The objective is strictly concave, so the stationarity function is
  // decreasing: if it is non-positive at the floor, the floor is optimal.
  if (sense == Sense::LeqZero && floor > lo && soft_stationarity(ep, lambda, floor, prior) <= 0.0)
    return floor;

  const auto c = soft_cubic_coefficients(ep, lambda, prior);
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_obj = -inf;
  for (double x : real_cubic_roots(c[0], c[1], c[2], c[3])) {
    if (!(x > lo && x < hi && x >= floor)) continue;
    const double obj = soft_dual_objective(ep, lambda, x, prior);
    if (obj > best_obj || (obj == best_obj && x < best)) {
      best_obj = obj;
      best = x;
    }
  }

  // Bracket the unique root and polish. The bracket also rescues the case
  // where cancellation pushed every cubic root out of the domain.
  double a = std::max(lo, floor), b = hi;
  auto finite_or = [](double v, double alt) { return std::isfinite(v) ? v : alt; };
  if (!std::isfinite(a)) {
    a = -1.0;
    while (soft_stationarity(ep, lambda, a, prior) < 0.0) a *= 2.0;
  }
  if (!std::isfinite(b)) {
    b = 1.0;
    while (b < a + 1.0 || soft_stationarity(ep, lambda, b, prior) > 0.0) b *= 2.0;
  }
  double x = std::isfinite(best) ? best : 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    const double g = soft_stationarity(ep, lambda, x, prior);
    if (g == 0.0) break;
    if (g > 0.0)
      a = std::max(a, x);
    else
      b = std::min(b, x);
    const double d1 = 1.0 + x * ep.eta1, d2 = 1.0 + x * ep.eta2;
    const double dg = -ep.eta1 * ep.eta1 / (d1 * d1) - ep.eta2 * ep.eta2 / (d2 * d2) - 1.0 / lambda;
    double next = x - g / dg;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
      x = next;
      break;
    }
    x = finite_or(next, 0.5 * (a + b));
  }
  if (!(x > lo && x < hi) || !std::isfinite(x))
    throw NumericalError("alpha_soft: no feasible stationary point");
  return std::max(x, floor);
}

// ---------------------------------------------------------------------------
// Cholesky factor of I + λ1 u vᵀ + λ2 w zᵀ

/// Lower-triangular L with L[k,k] = diag[k] and, below the diagonal,
/// L[i,k] = cu[k] u[i] + cw[k] w[i]. Storage and construction are O(m).
struct IdentityRank2Cholesky {
  Eigen::VectorXd diag;
  Eigen::VectorXd cu;
  Eigen::VectorXd cw;
  Eigen::VectorXd u;
  Eigen::VectorXd w;

  Eigen::Index size() const { return diag.size(); }

  Eigen::MatrixXd dense() const {
    const auto m = size();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      L(k, k) = diag(k);
      const auto tail = m - k - 1;
      if (tail > 0) L.col(k).tail(tail) = cu(k) * u.tail(tail) + cw(k) * w.tail(tail);
    }
    return L;
  }

  /// G L in O(rows(G) · m) using suffix sums of the columns of G.
  Eigen::MatrixXd right_multiply(const Eigen::MatrixXd& G) const {
    const auto m = size();
    if (G.cols() != m) throw std::invalid_argument("right_multiply: dimension mismatch");
    Eigen::MatrixXd out(G.rows(), m);
    Eigen::VectorXd su = Eigen::VectorXd::Zero(G.rows());
    Eigen::VectorXd sw = Eigen::VectorXd::Zero(G.rows());
    for (Eigen::Index k = m - 1; k >= 0; --k) {
      out.col(k) = diag(k) * G.col(k) + cu(k) * su + cw(k) * sw;
      su += u(k) * G.col(k);
      sw += w(k) * G.col(k);
    }
    return out;
  }
};

namespace detail {

// Peels one row/column per level. The trailing block stays identity plus
// rank 2 in the fixed vectors u, w, with (λ1 v, λ2 z) tracked as 2x2
// coefficient combinations of the original v and z.
inline IdentityRank2Cholesky chol_identity_rank2_unchecked(double lambda1, const Eigen::VectorXd& u,
                                                           const Eigen::VectorXd& v, double lambda2,
                                                           const Eigen::VectorXd& w,
                                                           const Eigen::VectorXd& z) {
  const auto m = u.size();
  IdentityRank2Cholesky L;
  L.diag.resize(m);
  L.cu.resize(m);
  L.cw.resize(m);
  L.u = u;
  L.w = w;
  // Vcur = a v + b z, Zcur = c v + d z
  double a = lambda1, b = 0.0, c = 0.0, d = lambda2;
  for (Eigen::Index k = 0; k < m; ++k) {
    const double Vk = a * v(k) + b * z(k);
    const double Zk = c * v(k) + d * z(k);
    const double tau = 1.0 + u(k) * Vk + w(k) * Zk;
    if (!(tau > 0.0))
      throw NumericalError("identity plus rank-2 matrix is not positive definite (level " +
                           std::to_string(k) + ")");
    const double s = std::sqrt(tau);
    L.diag(k) = s;
    L.cu(k) = Vk / s;
    L.cw(k) = Zk / s;
    const double keepV = 1.0 + w(k) * Zk, mixV = w(k) * Vk;
    const double keepZ = 1.0 + u(k) * Vk, mixZ = u(k) * Zk;
    const double na = (keepV * a - mixV * c) / tau;
    const double nb = (keepV * b - mixV * d) / tau;
    const double nc = (keepZ * c - mixZ * a) / tau;
    const double nd = (keepZ * d - mixZ * b) / tau;
    a = na;
    b = nb;
    c = nc;
    d = nd;
  }
  return L;
}

}  // namespace detail

/// Cholesky factor of A = I + λ1 u vᵀ + λ2 w zᵀ by the level-by-level Schur
/// complement recursion. A must be symmetric and positive definite.
inline IdentityRank2Cholesky chol_identity_rank2(double lambda1, const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& v, double lambda2,
                                                 const Eigen::VectorXd& w, const Eigen::VectorXd& z) {
  const auto m = u.size();
  if (v.size() != m || w.size() != m || z.size() != m)
    throw std::invalid_argument("chol_identity_rank2: vector lengths differ");
  const Eigen::MatrixXd R = lambda1 * u * v.transpose() + lambda2 * w * z.transpose();
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("chol_identity_rank2: matrix is not symmetric");
  return detail::chol_identity_rank2_unchecked(lambda1, u, v, lambda2, w, z);
}

// ---------------------------------------------------------------------------
// Kernel update

/// K̂ ← (K̂⁻¹ + αĈ)⁻¹ applied to the factor: G ← G W with
/// W Wᵀ = I − α (GᵀÛ)(I₂ + α V̂ᵀK̂Û)⁻¹(V̂ᵀG).
inline FactoredKernel project(FactoredKernel fk, const Rank2Constraint& rc, double alpha) {
  if (alpha == 0.0) return fk;
  const auto pf = detail::project_factors(fk, rc);
  const Eigen::Matrix2d middle = Eigen::Matrix2d::Identity() + alpha * pf.B;
  const double det = middle.determinant();
  if (!(std::abs(det) > 1e-14 * std::max(1.0, middle.cwiseAbs().maxCoeff())))
    throw NumericalError("projection middle factor is singular");
  const Eigen::Matrix<double, Eigen::Dynamic, 2> P = pf.X * middle.inverse();
  const Eigen::VectorXd yv = -alpha * pf.Y.col(0);
  const Eigen::VectorXd yz = -alpha * pf.Y.col(1);
  const auto W = detail::chol_identity_rank2_unchecked(1.0, P.col(0), yv, 1.0, P.col(1), yz);
  fk.G = W.right_multiply(fk.G);
  return fk;
}

// ---------------------------------------------------------------------------
// Divergence

/// D_ld(K̂, K̂₀) = tr(K̂K̂₀⁻¹) − log det(K̂K̂₀⁻¹) − r with K̂₀ diagonal.
inline double logdet_divergence(const FactoredKernel& fk) {
  const auto r = fk.rank();
  const Eigen::VectorXd inv = fk.k0_eigenvalues.cwiseInverse();
  const double trace = (fk.G.array().square().colwise() * inv.array()).sum();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(fk.G);
  double logdet_g = 0.0;
  for (Eigen::Index i = 0; i < r; ++i) {
    const double uii = std::abs(lu.matrixLU()(i, i));
    if (!(uii > 0.0)) throw NumericalError("learned kernel is singular in r-space");
    logdet_g += std::log(uii);
  }
  const double logdet = 2.0 * logdet_g - fk.k0_eigenvalues.array().log().sum();
  return trace - logdet - static_cast<double>(r);
}

}  // namespace sklr
