#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "sklr/init_kernel.hpp"
#include "sklr/synthetic.hpp"
#include "test_util.hpp"

using namespace sklr;
using sklr_test::random_pd;
using sklr_test::rel_frobenius;

namespace {

Eigen::MatrixXd line(std::initializer_list<double> xs) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) X(i++, 0) = x;
  return X;
}

}  // namespace

TEST(Bandwidths, NearestNeighborDistances) {
  const auto X = line({0.0, 1.0, 3.0});
  const Eigen::Vector3d k1 = adaptive_bandwidths(X, 1);
  const Eigen::Vector3d k2 = adaptive_bandwidths(X, 2);
  EXPECT_LT((k1 - Eigen::Vector3d(1, 1, 2)).norm(), 1e-15);
  EXPECT_LT((k2 - Eigen::Vector3d(3, 2, 3)).norm(), 1e-15);
}

TEST(Bandwidths, Errors) {
  EXPECT_THROW(adaptive_bandwidths(line({0.0, 0.0, 5.0}), 1), std::invalid_argument);
  EXPECT_THROW(adaptive_bandwidths(line({0.0, 1.0, 3.0}), 3), std::invalid_argument);
  EXPECT_THROW(adaptive_bandwidths(line({0.0, 1.0, 3.0}), 0), std::invalid_argument);
}

TEST(GaussianKernel, PointValues) {
  const double e1 = std::exp(-1.0);
  EXPECT_NEAR(gaussian_cross_kernel(line({0.0}), Eigen::VectorXd::Ones(1), line({1.0}), Eigen::VectorXd::Ones(1))(0, 0),
              e1, 1e-15);
  Eigen::VectorXd s(2);
  s << 2.0, 0.5;
  const Eigen::MatrixXd K = gaussian_kernel(line({0.0, 1.0}), s);
  EXPECT_NEAR(K(0, 1), e1, 1e-15);
  EXPECT_DOUBLE_EQ(K(1, 0), K(0, 1));
}

TEST(GaussianKernel, UnitDiagonalAndSymmetric) {
  const auto ds = unit_square_clusters(0.3, 10, 1);
  const Eigen::MatrixXd K = gaussian_kernel(ds.features, adaptive_bandwidths(ds.features));
  EXPECT_TRUE((K.diagonal().array() == 1.0).all());
  EXPECT_EQ((K - K.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE((K.array() > 0.0).all());
}

TEST(PsdProject, ClipsOnlyNegativeEigenvalues) {
  Eigen::Matrix3d A;
  A << 1, 0.9, 0.9, 0.9, 1, -0.9, 0.9, -0.9, 1;
  int clipped = -1;
  double extreme = 0.0;
  const Eigen::MatrixXd P = psd_project(A, &clipped, &extreme);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> raw(A), fixed(P);
  EXPECT_EQ(clipped, 1);
  EXPECT_NEAR(extreme, raw.eigenvalues()(0), 1e-14);
  EXPECT_GE(fixed.eigenvalues()(0), -1e-12);
  EXPECT_NEAR(fixed.eigenvalues()(2), raw.eigenvalues()(2), 1e-12);

  std::mt19937_64 rng(2);
  const Eigen::MatrixXd K = random_pd(6, rng);
  EXPECT_LT(rel_frobenius(psd_project(K, &clipped), K), 1e-15);
  EXPECT_EQ(clipped, 0);
}

TEST(InitialKernel, IsPsdAndRecordsClipping) {
  const auto ds = unit_square_clusters(0.3, 25, 4);
  const auto ik = build_initial_kernel(ds.features);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ik.K0, Eigen::EigenvaluesOnly);
  EXPECT_GE(es.eigenvalues()(0), -1e-10);
  EXPECT_GE(ik.negative_clipped, 0);
  EXPECT_LE(ik.negative_extreme, 0.0);
  EXPECT_EQ(ik.sigma.size(), 100);
  EXPECT_NO_THROW(low_rank_factorize(ik.K0, 0.9));
}

TEST(LowRank, IdentityRank) {
  const auto fk = low_rank_factorize(Eigen::MatrixXd::Identity(10, 10), 0.9);
  EXPECT_EQ(fk.rank(), 9);
  EXPECT_LT((fk.Q.transpose() * fk.Q - Eigen::MatrixXd::Identity(9, 9)).norm(), 1e-10);
}

TEST(LowRank, SingleNonzeroEigenvalue) {
  const Eigen::Matrix3d K = Eigen::Vector3d(4, 0, 0).asDiagonal();
  const auto fk = low_rank_factorize(K, 0.9);
  ASSERT_EQ(fk.rank(), 1);
  EXPECT_DOUBLE_EQ(fk.k0_eigenvalues(0), 4.0);
  EXPECT_DOUBLE_EQ(fk.kernel_hat()(0, 0), 4.0);
  EXPECT_NEAR(std::abs(fk.Q(0, 0)), 1.0, 1e-15);
}

TEST(LowRank, FullEnergyIsFullRankAndLiftsBack) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd K = random_pd(12, rng);
  const auto fk = low_rank_factorize(K, 1.0);
  EXPECT_EQ(fk.rank(), 12);
  EXPECT_LT((fk.Q.transpose() * fk.Q - Eigen::MatrixXd::Identity(12, 12)).norm(), 1e-10);
  EXPECT_LT(rel_frobenius(lift_kernel(fk), K), 1e-8);
  for (Eigen::Index i = 1; i < fk.rank(); ++i) EXPECT_GE(fk.k0_eigenvalues(i - 1), fk.k0_eigenvalues(i));
}

TEST(LowRank, ClipsTinyNegativesRejectsLarge) {
  Eigen::Matrix3d K = Eigen::Vector3d(2, 1, -1e-12).asDiagonal();
  const auto fk = low_rank_factorize(K, 1.0);
  EXPECT_EQ(fk.clipped, 1);
  EXPECT_EQ(fk.rank(), 2);
  K(2, 2) = -0.1;
  EXPECT_THROW(low_rank_factorize(K, 1.0), std::invalid_argument);
  EXPECT_THROW(low_rank_factorize(Eigen::Matrix3d::Identity(), 0.0), std::invalid_argument);
}

TEST(LowRank, EigenvectorSignConvention) {
  std::mt19937_64 rng(6);
  const auto fk = low_rank_factorize(random_pd(7, rng), 0.95);
  for (Eigen::Index c = 0; c < fk.rank(); ++c) {
    Eigen::Index arg = 0;
    fk.Q.col(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(fk.Q(arg, c), 0.0);
  }
}

// Truncation removes energy from the total, so refactorizing the lifted
// kernel can only need as many or fewer components.
TEST(LowRank, RefactorizingLiftedKernel) {
  const auto ds = unit_square_clusters(0.3, 25, 8);
  const auto ik = build_initial_kernel(ds.features);
  for (double energy : {0.8, 0.9, 0.99}) {
    const auto fk = low_rank_factorize(ik.K0, energy);
    const auto again = low_rank_factorize(lift_kernel(fk), energy);
    EXPECT_LE(again.rank(), fk.rank());
    const auto full = low_rank_factorize(lift_kernel(fk), 1.0);
    EXPECT_EQ(full.rank(), fk.rank());
  }
}

TEST(Lift, RankOne) {
  FactoredKernel fk;
  fk.Q = Eigen::MatrixXd::Zero(3, 1);
  fk.Q(0, 0) = 1.0;
  fk.G = Eigen::MatrixXd::Constant(1, 1, 2.0);
  fk.k0_eigenvalues = Eigen::VectorXd::Constant(1, 4.0);
  const Eigen::MatrixXd K = lift_kernel(fk);
  Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
  expected(0, 0) = 4.0;
  EXPECT_LT((K - expected).norm(), 1e-15);
}
