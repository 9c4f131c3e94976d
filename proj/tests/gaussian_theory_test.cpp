#include "bms/gaussian_theory.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using bms::ShrinkState;

ShrinkState state(Eigen::MatrixXd cov, double tau) {
  return ShrinkState{std::move(cov), tau, 0};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) a(r, c) = z(rng);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(p, p);
}

TEST(ShrinkMap, ZeroMapsToZero) {
  const auto s = state(Eigen::MatrixXd::Identity(3, 3), 1.5);
  EXPECT_EQ(bms::shrink_map(Eigen::VectorXd::Zero(3), s).norm(), 0.0);
}

TEST(ShrinkMap, ScalarFactorIsOneFifth) {
  const auto s = state(Eigen::MatrixXd::Identity(1, 1), 2.0);
  Eigen::VectorXd x(1);
  x << 5.0;
  EXPECT_NEAR(bms::shrink_map(x, s)(0), 1.0, 1e-15);
}

TEST(ShrinkMap, AnisotropicAxesScaleSeparately) {
  Eigen::MatrixXd cov = Eigen::Vector2d(1.0, 4.0).asDiagonal();
  Eigen::VectorXd x(2);
  x << 1.0, 1.0;
  const Eigen::VectorXd y = bms::shrink_map(x, state(cov, 1.0));
  EXPECT_NEAR(y(0), 0.5, 1e-15);
  EXPECT_NEAR(y(1), 0.8, 1e-15);
}

TEST(ShrinkMap, MatchesDirectInverseAndIsOdd) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 1 + trial % 4;
    const Eigen::MatrixXd cov = random_spd(rng, p);
    const double tau = 0.3 + 0.1 * trial;
    Eigen::VectorXd x(p);
    for (int d = 0; d < p; ++d) x(d) = z(rng);
    const Eigen::MatrixXd m =
        (Eigen::MatrixXd::Identity(p, p) + tau * tau * cov.inverse()).inverse();
    const auto s = state(cov, tau);
    const Eigen::VectorXd y = bms::shrink_map(x, s);
    EXPECT_LT((y - m * x).norm(), 1e-10 * (1.0 + x.norm()));
    EXPECT_LT((bms::shrink_map(-x, s) + y).norm(), 1e-14 * (1.0 + y.norm()));
  }
}

TEST(ShrinkMap, RejectsBadState) {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.4, 1.0;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(2);
  EXPECT_THROW(bms::shrink_map(x, state(asym, 1.0)), bms::ArgumentError);
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(bms::shrink_map(x, state(indefinite, 1.0)), bms::ArgumentError);
  EXPECT_THROW(bms::shrink_map(x, state(Eigen::MatrixXd::Identity(2, 2), 0.0)),
               bms::ArgumentError);
  EXPECT_THROW(bms::shrink_map(Eigen::VectorXd::Ones(3),
                               state(Eigen::MatrixXd::Identity(2, 2), 1.0)),
               bms::Error);
}

TEST(CovarianceStep, ScalarSequence) {
  // High-precision values of lambda^3/(lambda+4)^2 iterated from 1.
  ShrinkState s = state(Eigen::MatrixXd::Identity(1, 1), 2.0);
  const double expected[] = {0.04, 3.92118419762768e-6, 3.76817355316191e-18};
  for (double e : expected) {
    s = bms::covariance_step(s);
    EXPECT_LT(rel(s.covariance(0, 0), e), 1e-12);
  }
  EXPECT_EQ(s.step, 3);
  EXPECT_NEAR(std::sqrt(s.covariance(0, 0)), 1.94117839292578e-9, 1e-20);
}

TEST(CovarianceStep, MatchesSandwichFormula) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int p = 2 + trial % 3;
    const Eigen::MatrixXd cov = random_spd(rng, p);
    const double tau = 0.5 + 0.05 * trial;
    const Eigen::MatrixXd m =
        (Eigen::MatrixXd::Identity(p, p) + tau * tau * cov.inverse()).inverse();
    const Eigen::MatrixXd direct = m * cov * m;
    const Eigen::MatrixXd got = bms::covariance_step(state(cov, tau)).covariance;
    EXPECT_LT((got - direct).norm(), 1e-10 * direct.norm());
  }
}

TEST(CovarianceStep, PreservesEigenvectors) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 2 + trial % 3;
    const Eigen::MatrixXd cov = random_spd(rng, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::MatrixXd v = eig.eigenvectors();
    const Eigen::MatrixXd next = bms::covariance_step(state(cov, 1.0)).covariance;
    Eigen::MatrixXd rotated = v.transpose() * next * v;
    const Eigen::VectorXd diag = rotated.diagonal();
    rotated.diagonal().setZero();
    EXPECT_LT(rotated.norm(), 1e-10);
    for (int d = 0; d < p; ++d) {
      const double l = eig.eigenvalues()(d);
      EXPECT_LT(rel(diag(d), l * l * l / ((l + 1.0) * (l + 1.0))), 1e-9);
      EXPECT_LT(diag(d), l);
    }
  }
}

TEST(EigenvalueSequence, PublishedValues) {
  const auto seq = bms::eigenvalue_sequence(1.0, 2.0, 3);
  ASSERT_EQ(seq.size(), 4u);
  EXPECT_EQ(seq[0], 1.0);
  EXPECT_LT(rel(seq[1], 0.04), 1e-14);
  EXPECT_LT(rel(seq[2], 3.92118419762768e-6), 1e-12);
  EXPECT_LT(rel(seq[3], 3.76817355316191e-18), 1e-12);
}

TEST(EigenvalueSequence, DecreasingUnderGeometricBoundAndToZero) {
  for (double l0 : {0.1, 1.0, 7.0}) {
    for (double tau : {0.2, 1.0, 3.0}) {
      const auto seq = bms::eigenvalue_sequence(l0, tau, 1000);
      const double ratio = l0 * l0 / ((l0 + tau * tau) * (l0 + tau * tau));
      for (std::size_t s = 1; s < seq.size(); ++s) {
        if (seq[s - 1] > 0.0) EXPECT_LT(seq[s], seq[s - 1]);
        EXPECT_LE(seq[s], std::pow(ratio, static_cast<double>(s)) * l0 * (1 + 1e-12));
      }
      EXPECT_LT(seq.back(), 1e-12 * l0);
    }
  }
}

TEST(EigenvalueSequence, TinyBandwidthBarelyMoves) {
  const auto seq = bms::eigenvalue_sequence(1.0, 1e-6, 1);
  EXPECT_NEAR(seq[1], 1.0 - 2e-12, 1e-15);
  EXPECT_LT(seq[1], 1.0);
}

TEST(EigenvalueSequence, RejectsBadInputs) {
  EXPECT_THROW(bms::eigenvalue_sequence(0.0, 1.0, 2), bms::ArgumentError);
  EXPECT_THROW(bms::eigenvalue_sequence(1.0, -1.0, 2), bms::ArgumentError);
  EXPECT_THROW(bms::eigenvalue_sequence(1.0, 1.0, -1), bms::ArgumentError);
}

TEST(NonblurringStd, PublishedValues) {
  const auto seq = bms::nonblurring_std_sequence(1.0, 2.0, 3);
  ASSERT_EQ(seq.size(), 4u);
  EXPECT_NEAR(seq[1], 0.2, 1e-15);
  EXPECT_NEAR(seq[2], 0.04, 1e-15);
  EXPECT_NEAR(seq[3], 0.008, 1e-15);
}

TEST(NonblurringStd, EqualBandwidthHalves) {
  const auto seq = bms::nonblurring_std_sequence(3.0, 3.0, 4);
  for (std::size_t s = 1; s < seq.size(); ++s) EXPECT_DOUBLE_EQ(seq[s], 0.5 * seq[s - 1]);
  EXPECT_EQ(bms::nonblurring_std_sequence(2.0, 1.0, 0), std::vector<double>{2.0});
  EXPECT_THROW(bms::nonblurring_std_sequence(0.0, 1.0, 2), bms::ArgumentError);
}

TEST(StdSequences, BlurringDominatesFromStepTwo) {
  for (double s0 : {0.3, 1.0, 4.0})
    for (double tau : {0.25, 1.0, 2.0}) {
      const auto b = bms::blurring_std_sequence(s0, tau, 5);
      const auto nb = bms::nonblurring_std_sequence(s0, tau, 5);
      EXPECT_DOUBLE_EQ(b[0], nb[0]);
      EXPECT_LT(rel(b[1], nb[1]), 1e-14);
      for (std::size_t s = 2; s < b.size(); ++s) EXPECT_LT(b[s], nb[s]);
    }
}

}  // namespace
