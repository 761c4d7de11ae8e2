#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "leadlag/kalman.hpp"
#include "leadlag/random.hpp"

using namespace leadlag;

namespace {

struct DensePosterior {
  Eigen::VectorXd mean;  // states 0..S
  Eigen::VectorXd var;
};

/// Posterior of (beta_0..beta_S) by inverting the joint precision matrix.
DensePosterior dense_posterior(const std::vector<double>& alpha, double sigma2, double obs_var) {
  const int S = static_cast<int>(alpha.size());
  const int n = S + 1;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  P(0, 0) += 1.0 / (kDiffuseMultiplier * sigma2);
  for (int s = 1; s <= S; ++s) {
    P(s, s) += 1.0 / sigma2;
    P(s - 1, s - 1) += 1.0 / sigma2;
    P(s, s - 1) -= 1.0 / sigma2;
    P(s - 1, s) -= 1.0 / sigma2;
    P(s, s) += 1.0 / obs_var;
    b(s) = alpha[static_cast<std::size_t>(s - 1)] / obs_var;
  }
  const Eigen::MatrixXd cov = P.inverse();
  return {cov * b, cov.diagonal()};
}

}  // namespace

TEST(Kalman, ThreeStepExampleMatchesDenseInversion) {
  const std::vector<double> alpha{0.0, 1.0, 2.0};
  const KalmanMoments k = kalman_smooth(alpha, 1.0, 1.0);
  const DensePosterior d = dense_posterior(alpha, 1.0, 1.0);
  EXPECT_NEAR(k.anchor_mean, d.mean(0), 1e-8);
  EXPECT_NEAR(k.anchor_var, d.var(0), 1e-8);
  for (int s = 1; s <= 3; ++s) {
    EXPECT_NEAR(k.m_tilde[static_cast<std::size_t>(s - 1)], d.mean(s), 1e-8);
    EXPECT_NEAR(k.V_tilde[static_cast<std::size_t>(s - 1)], d.var(s), 1e-8);
  }
}

TEST(Kalman, RandomChainsMatchDenseInversion) {
  Rng rng = make_rng(42);
  std::uniform_int_distribution<int> len(1, 5);
  std::uniform_real_distribution<double> logvar(-3.0, 2.0);
  std::normal_distribution<double> obs(0.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int S = len(rng);
    const double sigma2 = std::exp(logvar(rng)), obs_var = std::exp(logvar(rng));
    std::vector<double> alpha(static_cast<std::size_t>(S));
    for (double& a : alpha) a = obs(rng);
    const KalmanMoments k = kalman_smooth(alpha, sigma2, obs_var);
    const DensePosterior d = dense_posterior(alpha, sigma2, obs_var);
    EXPECT_NEAR(k.anchor_mean, d.mean(0), 1e-8);
    for (int s = 1; s <= S; ++s) {
      EXPECT_NEAR(k.m_tilde[static_cast<std::size_t>(s - 1)], d.mean(s), 1e-8) << "rep " << rep;
      EXPECT_NEAR(k.V_tilde[static_cast<std::size_t>(s - 1)], d.var(s), 1e-8 * std::max(1.0, d.var(s))) << "rep " << rep;
      EXPECT_GE(k.V_tilde[static_cast<std::size_t>(s - 1)], 0.0);
    }
  }
}

TEST(Kalman, ConstantSignalIsReproducedUpToPriorShrinkage) {
  const std::vector<double> alpha{1.0, 1.0, 1.0};
  for (double sigma2 : {0.005, 1.0, 10.0})
    for (double obs_var : {0.05, 1.0, 10.0}) {
      const KalmanMoments k = kalman_smooth(alpha, sigma2, obs_var);
      const DensePosterior d = dense_posterior(alpha, sigma2, obs_var);
      for (int s = 0; s < 3; ++s) {
        const double m = k.m_tilde[static_cast<std::size_t>(s)];
        EXPECT_NEAR(m, d.mean(s + 1), 1e-8);
        // the only pull away from 1 is the finite start variance
        EXPECT_LE(1.0 - m, obs_var / (kDiffuseMultiplier * sigma2));
        EXPECT_GT(m, 0.0);
      }
    }
  const KalmanMoments tight = kalman_smooth(alpha, 10.0, 0.001);
  for (double m : tight.m_tilde) EXPECT_NEAR(m, 1.0, 1e-6);
}

TEST(Kalman, UninformativeObservationsGivePriorMoments) {
  const std::vector<double> alpha{3.0, -2.0, 5.0};
  const double sigma2 = 0.5;
  const KalmanMoments k = kalman_smooth(alpha, sigma2, 1e12);
  const double v0 = kDiffuseMultiplier * sigma2;
  for (int s = 1; s <= 3; ++s) {
    EXPECT_NEAR(k.m_tilde[static_cast<std::size_t>(s - 1)], 0.0, 1e-6);
    EXPECT_NEAR(k.V_tilde[static_cast<std::size_t>(s - 1)], v0 + s * sigma2, 1e-6 * v0);
  }
}

TEST(Kalman, SmootherIsLinearInObservations) {
  const SmootherGains g(4, 0.3, 2.0);
  Rng rng = make_rng(9);
  std::normal_distribution<double> n;
  std::vector<double> a(4), b(4), ab(4), mf(4), ma(4), mb(4), mab(4);
  double anchor_a, anchor_b, anchor_ab;
  for (int i = 0; i < 4; ++i) {
    a[static_cast<std::size_t>(i)] = n(rng);
    b[static_cast<std::size_t>(i)] = n(rng);
    ab[static_cast<std::size_t>(i)] = 2.0 * a[static_cast<std::size_t>(i)] - 3.0 * b[static_cast<std::size_t>(i)];
  }
  g.smooth(a, 1, mf, ma, std::span<double>(&anchor_a, 1));
  g.smooth(b, 1, mf, mb, std::span<double>(&anchor_b, 1));
  g.smooth(ab, 1, mf, mab, std::span<double>(&anchor_ab, 1));
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(mab[static_cast<std::size_t>(i)], 2.0 * ma[static_cast<std::size_t>(i)] - 3.0 * mb[static_cast<std::size_t>(i)], 1e-12);
  EXPECT_NEAR(anchor_ab, 2.0 * anchor_a - 3.0 * anchor_b, 1e-12);
}

TEST(Kalman, UnsmoothInvertsSmooth) {
  Rng rng = make_rng(17);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int S : {1, 2, 5, 12}) {
    const SmootherGains g(S, 0.7, 7.0);
    const int W = 3;
    std::vector<double> alpha(static_cast<std::size_t>(S * W)), back(alpha.size()), mf(alpha.size()), mt(alpha.size()),
        anchor(W);
    for (double& x : alpha) x = n(rng);
    g.smooth(alpha, W, mf, mt, anchor);
    g.unsmooth(mt, W, back);
    for (std::size_t i = 0; i < alpha.size(); ++i) EXPECT_NEAR(back[i], alpha[i], 1e-8 * std::max(1.0, std::abs(alpha[i])));
  }
}

TEST(Kalman, JacobianMatchesFiniteDifferences) {
  const int S = 4;
  const SmootherGains g(S, 0.2, 2.0);
  std::vector<double> alpha{0.3, -0.1, 0.8, 1.2}, mf(S), m0(S), m1(S);
  double a0, a1;
  g.smooth(alpha, 1, mf, m0, std::span<double>(&a0, 1));
  for (int t = 0; t < S; ++t) {
    auto bumped = alpha;
    bumped[static_cast<std::size_t>(t)] += 1.0;  // linear map: unit step is exact
    g.smooth(bumped, 1, mf, m1, std::span<double>(&a1, 1));
    EXPECT_NEAR(g.jac(0, t), a1 - a0, 1e-12);
    for (int s = 1; s <= S; ++s) EXPECT_NEAR(g.jac(s, t), m1[static_cast<std::size_t>(s - 1)] - m0[static_cast<std::size_t>(s - 1)], 1e-12);
  }
}

TEST(Kalman, RejectsBadArguments) {
  EXPECT_THROW(SmootherGains(0, 1.0, 1.0), ValidationError);
  EXPECT_THROW(SmootherGains(3, 0.0, 1.0), ValidationError);
  EXPECT_THROW(SmootherGains(3, 1.0, -1.0), ValidationError);
}
