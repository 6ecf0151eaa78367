#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "sklr/projections.hpp"
#include "test_util.hpp"

using namespace sklr;
using sklr_test::identity_space_kernel;
using sklr_test::random_matrix;
using sklr_test::random_pd;
using sklr_test::rel_frobenius;

namespace {

// Golden-section maximization of a unimodal function on [a, b].
double golden_max(const std::function<double(double)>& f, double a, double b) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 300 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

Rank2Constraint random_constraint(std::size_t n, std::mt19937_64& rng, bool eq) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  if (eq) return expand_eq(Triplet::eq(idx[0], idx[1], idx[2]), n)[rng() % 3];
  return expand_neq(Triplet::neq(idx[0], idx[1], idx[2]), n, 2.0)[rng() % 2];
}

}  // namespace

TEST(Eigenvalues, IdentityKernelNeq) {
  const auto fk = identity_space_kernel(Eigen::MatrixXd::Identity(3, 3));
  const auto rc = expand_neq(Triplet::neq(0, 1, 2), 3, 2.0)[0];
  const Eigen::Matrix2d B = (rc.V.transpose() * fk.kernel_hat() * rc.U);
  Eigen::Matrix2d expected;
  expected << 4, std::sqrt(2.0), -std::sqrt(2.0), -2;
  // Same spectrum as the hand-derived 2x2 (its basis differs by a rotation).
  EXPECT_NEAR(B.trace(), expected.trace(), 1e-12);
  EXPECT_NEAR(B.determinant(), expected.determinant(), 1e-12);
  const auto ep = rank2_eigenvalues(fk, rc);
  EXPECT_NEAR(ep.eta1, 1.0 + std::sqrt(7.0), 1e-12);
  EXPECT_NEAR(ep.eta2, 1.0 - std::sqrt(7.0), 1e-12);
}

TEST(Eigenvalues, EqualityIsSymmetricUnderIdentity) {
  const auto fk = identity_space_kernel(Eigen::MatrixXd::Identity(4, 4));
  for (const auto& rc : expand_eq(Triplet::eq(0, 2, 3), 4)) {
    const auto ep = rank2_eigenvalues(fk, rc);
    EXPECT_NEAR(ep.eta1, -ep.eta2, 1e-12);
    EXPECT_GT(ep.eta1, 0.0);
  }
}

TEST(Eigenvalues, ZeroConstraint) {
  const auto fk = identity_space_kernel(Eigen::MatrixXd::Identity(3, 3));
  Rank2Constraint rc;
  rc.U = Eigen::MatrixXd::Zero(3, 2);
  rc.V = Eigen::MatrixXd::Zero(3, 2);
  const auto ep = rank2_eigenvalues(fk, rc);
  EXPECT_EQ(ep.eta1, 0.0);
  EXPECT_EQ(ep.eta2, 0.0);
}

TEST(Eigenvalues, MatchDenseSpectrumAndStraddleZero) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd K = random_pd(7, rng);
    const auto fk = identity_space_kernel(K);
    const auto rc = random_constraint(7, rng, trial % 2 == 1);
    const auto ep = rank2_eigenvalues(fk, rc);
    EXPECT_LE(ep.eta2, 0.0);
    EXPECT_GE(ep.eta1, 0.0);
    const Eigen::EigenSolver<Eigen::MatrixXd> es(K * rc.dense());
    std::vector<double> ev;
    for (Eigen::Index i = 0; i < 7; ++i) ev.push_back(es.eigenvalues()(i).real());
    std::sort(ev.begin(), ev.end());
    EXPECT_NEAR(ep.eta1, ev.back(), 1e-10 * std::max(1.0, ev.back()));
    EXPECT_NEAR(ep.eta2, ev.front(), 1e-10 * std::max(1.0, -ev.front()));
  }
}

TEST(AlphaHard, Examples) {
  EXPECT_NEAR(alpha_hard({1.0 + std::sqrt(7.0), 1.0 - std::sqrt(7.0)}), 1.0 / 6.0, 1e-14);
  EXPECT_NEAR(alpha_hard({2.0, -1.0}), 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(alpha_hard({3.0, -3.0}), 0.0);
  EXPECT_THROW(alpha_hard({2.0, 0.0}), std::invalid_argument);
}

TEST(AlphaHard, MaximizesDualObjective) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double e1 = 0.01 + 10.0 * u(rng);
    const double e2 = -e1 * (0.01 + 0.98 * u(rng));
    auto obj = [&](double a) { return std::log1p(a * e1) + std::log1p(a * e2); };
    const double oracle = golden_max(obj, 0.0, -1.0 / e2 * (1.0 - 1e-12));
    EXPECT_NEAR(alpha_hard({e1, e2}), oracle, 1e-6 * oracle);
  }
}

TEST(AlphaSoft, Examples) {
  const double a = alpha_soft({2.0, -1.0}, 1.0);
  EXPECT_NEAR(a, 0.1953, 5e-5);
  EXPECT_NEAR(soft_stationarity({2.0, -1.0}, 1.0, a), 0.0, 1e-12);
  EXPECT_NEAR(alpha_soft({2.0, -1.0}, 1e12), 0.25, 1e-3 * 0.25);
  EXPECT_DOUBLE_EQ(alpha_soft({4.0, -4.0}, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(alpha_soft({4.0, -4.0}, 1e9), 0.0);
  EXPECT_THROW(alpha_soft({2.0, -1.0}, 0.0), std::invalid_argument);
}

TEST(AlphaSoft, MatchesNumericalMaximum) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double e1 = 0.01 + 10.0 * u(rng);
    const double e2 = -e1 * (0.01 + 0.98 * u(rng));
    const double lambda = std::pow(10.0, -2.0 + 8.0 * u(rng));
    const double a = alpha_soft({e1, e2}, lambda);
    const double oracle =
        golden_max([&](double x) { return soft_dual_objective({e1, e2}, lambda, x); }, 0.0, -1.0 / e2);
    EXPECT_NEAR(a, oracle, 1e-6 * std::max(oracle, 1e-12));
    EXPECT_LT(std::abs(soft_stationarity({e1, e2}, lambda, a)), 1e-9);
    EXPECT_LE(a, alpha_hard({e1, e2}) * (1.0 + 1e-12));
  }
}

TEST(AlphaSoft, NondecreasingInLambdaWithHardLimit) {
  const EigenPair ep{3.0, -0.5};
  double prev = 0.0;
  for (double lambda = 1e-3; lambda <= 1e10; lambda *= 10.0) {
    const double a = alpha_soft(ep, lambda);
    EXPECT_GE(a, prev - 1e-15);
    prev = a;
  }
  EXPECT_NEAR(prev, alpha_hard(ep), 1e-6 * alpha_hard(ep));
}

TEST(AlphaSoft, EqualityStepMayBeNegative) {
  // Sum of eigenvalues negative: the equality is violated from below.
  const EigenPair ep{0.5, -2.0};
  EXPECT_LT(alpha_soft(ep, 1e6, Sense::EqZero), 0.0);
  EXPECT_NEAR(alpha_soft(ep, 1e10, Sense::EqZero), alpha_hard(ep), 1e-4 * std::abs(alpha_hard(ep)));
  // An inequality that already holds takes no step on a first visit.
  EXPECT_DOUBLE_EQ(alpha_soft(ep, 1e6, Sense::LeqZero), 0.0);
}

TEST(AlphaSoft, AccumulatedMultiplierFloor) {
  // A satisfied inequality can release at most the multiplier it holds.
  const EigenPair ep{0.5, -2.0};
  const double prior = 0.05;
  const double a = alpha_soft(ep, 1.0, Sense::LeqZero, prior);
  EXPECT_GE(a, -prior - 1e-15);
  EXPECT_LT(a, 0.0);
  const double b = alpha_soft(ep, 1e-6, Sense::LeqZero, prior);
  if (b > -prior) EXPECT_LT(std::abs(soft_stationarity(ep, 1e-6, b, prior)), 1e-9);
}

TEST(CubicRoots, SoftCoefficientsShareStationaryPoint) {
  const EigenPair ep{2.0, -1.0};
  for (double lambda : {0.1, 1.0, 50.0}) {
    const auto c = soft_cubic_coefficients(ep, lambda);
    const double a = alpha_soft(ep, lambda);
    EXPECT_NEAR(((c[0] * a + c[1]) * a + c[2]) * a + c[3], 0.0, 1e-9 * std::max(1.0, lambda));
  }
  const auto roots = real_cubic_roots(1.0, -6.0, 11.0, -6.0);
  ASSERT_EQ(roots.size(), 3u);
  std::vector<double> sorted = roots;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_NEAR(sorted[0], 1.0, 1e-12);
  EXPECT_NEAR(sorted[1], 2.0, 1e-12);
  EXPECT_NEAR(sorted[2], 3.0, 1e-12);
  EXPECT_EQ(real_cubic_roots(0.0, 0.0, 2.0, -4.0), std::vector<double>{2.0});
}

TEST(CholRank2, IdentityWhenCoefficientsVanish) {
  Eigen::VectorXd u = Eigen::VectorXd::Ones(4), w = Eigen::VectorXd::LinSpaced(4, 0, 1);
  const auto L = chol_identity_rank2(0.0, u, u, 0.0, w, w);
  EXPECT_LT((L.dense() - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-15);
}

TEST(CholRank2, TwoByTwoExample) {
  const Eigen::VectorXd u = Eigen::VectorXd::Ones(2), zero = Eigen::VectorXd::Zero(2);
  const auto L = chol_identity_rank2(1.0, u, u, 0.0, zero, zero).dense();
  Eigen::Matrix2d expected;
  expected << std::sqrt(2.0), 0.0, 1.0 / std::sqrt(2.0), std::sqrt(1.5);
  EXPECT_LT((L - expected).norm(), 1e-14);
}

TEST(CholRank2, MatchesDenseCholesky) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 50;
    const Eigen::VectorXd u = random_matrix(m, 1, rng) / std::sqrt(double(m));
    const Eigen::VectorXd w = random_matrix(m, 1, rng) / std::sqrt(double(m));
    // Symmetric either as λ1 u uᵀ + λ2 w wᵀ or as u wᵀ + w uᵀ.
    const bool cross = trial % 2 == 1;
    const double l1 = cross ? 0.4 : 1.5, l2 = cross ? 0.4 : -0.3;
    const auto L = cross ? chol_identity_rank2(l1, u, w, l2, w, u) : chol_identity_rank2(l1, u, u, l2, w, w);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m);
    A += cross ? Eigen::MatrixXd(l1 * u * w.transpose() + l2 * w * u.transpose())
               : Eigen::MatrixXd(l1 * u * u.transpose() + l2 * w * w.transpose());
    const Eigen::MatrixXd D = L.dense();
    EXPECT_LT(rel_frobenius(D * D.transpose(), A), 1e-10);
    const Eigen::MatrixXd ref = Eigen::LLT<Eigen::MatrixXd>(A).matrixL();
    EXPECT_LT((D - ref).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_TRUE(D.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero(0.0));
    const Eigen::MatrixXd G = random_matrix(7, m, rng);
    EXPECT_LT(rel_frobenius(L.right_multiply(G), G * D), 1e-12);
  }
}

TEST(CholRank2, RejectsIndefiniteAndAsymmetric) {
  const Eigen::VectorXd u = Eigen::VectorXd::Ones(3), e0 = Eigen::VectorXd::Unit(3, 0),
                        e1 = Eigen::VectorXd::Unit(3, 1);
  EXPECT_THROW(chol_identity_rank2(-2.0, u, u, 0.0, u, u), NumericalError);
  EXPECT_THROW(chol_identity_rank2(1.0, e0, e1, 0.0, u, u), std::invalid_argument);
}

TEST(Project, ZeroStepIsIdentity) {
  std::mt19937_64 rng(25);
  const auto fk = identity_space_kernel(random_pd(5, rng));
  const auto rc = random_constraint(5, rng, false);
  EXPECT_EQ(project(fk, rc, 0.0).G, fk.G);
}

TEST(Project, MatchesDenseInverseUpdate) {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd K = random_pd(8, rng);
    const auto fk = identity_space_kernel(K);
    const auto rc = random_constraint(8, rng, trial % 3 == 2);
    const double alpha = alpha_hard(rank2_eigenvalues(fk, rc));
    const auto next = project(fk, rc, alpha);
    const Eigen::MatrixXd dense = (K.inverse() + alpha * rc.dense()).inverse();
    EXPECT_LT(rel_frobenius(next.kernel_hat(), dense), 1e-8);
    EXPECT_LT(std::abs(violation(next, rc)), 1e-8 * next.trace_hat() / 8.0);
  }
}

TEST(Project, PreservesDefinitenessAndRank) {
  std::mt19937_64 rng(27);
  auto fk = identity_space_kernel(random_pd(10, rng));
  for (int step = 0; step < 200; ++step) {
    const auto rc = random_constraint(10, rng, step % 4 == 0);
    const auto ep = rank2_eigenvalues(fk, rc);
    if (std::abs(ep.product()) < 1e-14) continue;
    fk = project(std::move(fk), rc, alpha_hard(ep));
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fk.kernel_hat(), Eigen::EigenvaluesOnly);
  EXPECT_GT(es.eigenvalues()(0), 1e-9 * es.eigenvalues()(9));
}

TEST(Divergence, Examples) {
  std::mt19937_64 rng(28);
  FactoredKernel fk;
  fk.Q = Eigen::MatrixXd::Identity(2, 2);
  fk.k0_eigenvalues = Eigen::VectorXd::Ones(2);
  fk.G = std::sqrt(2.0) * Eigen::MatrixXd::Identity(2, 2);
  EXPECT_NEAR(logdet_divergence(fk), 4.0 - std::log(4.0) - 2.0, 1e-14);
  EXPECT_NEAR(logdet_divergence(fk), 0.61371, 1e-5);

  FactoredKernel same;
  same.Q = Eigen::MatrixXd::Identity(4, 4);
  same.k0_eigenvalues = Eigen::Vector4d(3.0, 2.0, 1.0, 0.5);
  same = with_initial_factor(same);
  EXPECT_NEAR(logdet_divergence(same), 0.0, 1e-14);
}

TEST(Divergence, NonnegativeAndMatchesDense) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd K = random_pd(6, rng);
    Eigen::VectorXd k0 = Eigen::VectorXd::Random(6).cwiseAbs().array() + 0.2;
    const auto fk = identity_space_kernel(K, k0);
    const Eigen::MatrixXd R = K * k0.cwiseInverse().asDiagonal();
    const double dense = R.trace() - std::log(R.determinant()) - 6.0;
    EXPECT_NEAR(logdet_divergence(fk), dense, 1e-10 * std::max(1.0, dense));
    EXPECT_GE(logdet_divergence(fk), 0.0);
  }
}
