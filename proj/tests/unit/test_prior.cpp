#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace mixchoice;
using testing_helpers::vec;

namespace {

Eigen::VectorXd fish_mean() {
  return vec({2.864, 1.074, 2.003, -0.974, -0.834, 0.356, 0.376, 0.106, 0.206, 0.642, 0.2,
              0.403, -0.078, -0.087, -0.01, 0.027, 0.001, -0.008, 0, 0, 0});
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST(IdentifyPrior, FishPattyMean) {
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(21, 21);
  const PriorSpec p = identify_prior({fish_mean(), cov}, 3);
  ASSERT_EQ(p.dim(), 20);
  EXPECT_NEAR(p.mean[0], 0.861, 1e-12);
  EXPECT_NEAR(p.mean[1], -0.929, 1e-12);
  for (int k = 2; k < 20; ++k) EXPECT_EQ(p.mean[k], fish_mean()[k + 1]);
}

TEST(IdentifyPrior, KappaIdentityCovariancePattern) {
  for (double kappa : {0.5, 5.0, 10.0, 30.0}) {
    const PriorSpec p = identify_prior({fish_mean(), kappa * Eigen::MatrixXd::Identity(21, 21)}, 3);
    Eigen::MatrixXd expected = kappa * Eigen::MatrixXd::Identity(20, 20);
    expected(0, 0) = expected(1, 1) = 2.0 * kappa;
    expected(0, 1) = expected(1, 0) = kappa;
    EXPECT_EQ(p.covariance, expected);
  }
}

TEST(IdentifyPrior, BinaryMixture) {
  // q=2, r=0: m=2, coefficients (g1, g2, g12)
  const PriorSpec p = identify_prior({vec({3.0, 1.25, 0.5}), 4.0 * Eigen::MatrixXd::Identity(3, 3)}, 2);
  EXPECT_EQ(p.mean, vec({1.75, 0.5}));
  Eigen::MatrixXd T(2, 3);
  T << 1, -1, 0, 0, 0, 1;
  EXPECT_EQ(p.covariance, T * (4.0 * Eigen::MatrixXd::Identity(3, 3)) * T.transpose());
  EXPECT_EQ(p.covariance(0, 0), 8.0);
}

TEST(IdentifyPrior, Linearity) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Eigen::VectorXd a(21), b(21);
  for (int i = 0; i < 21; ++i) {
    a[i] = n(rng);
    b[i] = n(rng);
  }
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(21, 21);
  const Eigen::VectorXd combo = identify_prior({2.5 * a - 1.5 * b, cov}, 3).mean;
  const Eigen::VectorXd parts = 2.5 * identify_prior({a, cov}, 3).mean - 1.5 * identify_prior({b, cov}, 3).mean;
  EXPECT_LT((combo - parts).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(IdentifyPrior, PreservesPsd) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Eigen::MatrixXd A(21, 10);
  for (int i = 0; i < 21; ++i)
    for (int j = 0; j < 10; ++j) A(i, j) = n(rng);
  const PriorSpec p = identify_prior({fish_mean(), A * A.transpose()}, 3);
  EXPECT_LT((p.covariance - p.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.covariance);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * p.covariance.trace());
}

TEST(IdentifyPrior, DimensionErrors) {
  EXPECT_THROW(identify_prior({Eigen::VectorXd::Zero(20), Eigen::MatrixXd::Identity(20, 20)}, 3),
               std::invalid_argument);
  EXPECT_THROW(identify_prior({fish_mean(), Eigen::MatrixXd::Identity(20, 20)}, 3), std::invalid_argument);
}

TEST(Halton, BaseTwoAndThreePrefixes) {
  const Eigen::MatrixXd h = halton_sequence(2, 5);
  const double base2[] = {0.5, 0.25, 0.75, 0.125, 0.625};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(h(i, 0), base2[i]);
  EXPECT_EQ(radical_inverse_fraction(1, 3), boost::rational<std::int64_t>(1, 3));
  EXPECT_EQ(radical_inverse_fraction(2, 3), boost::rational<std::int64_t>(2, 3));
  EXPECT_EQ(radical_inverse_fraction(3, 3), boost::rational<std::int64_t>(1, 9));
  EXPECT_EQ(radical_inverse_fraction(4, 3), boost::rational<std::int64_t>(4, 9));
  EXPECT_EQ(h(3, 1), 4.0 / 9.0);
}

TEST(Halton, DistinctInUnitInterval) {
  const Eigen::MatrixXd h = halton_sequence(50, 500, 3);
  for (int d = 0; d < 50; ++d) {
    std::set<double> seen;
    for (int i = 0; i < 500; ++i) {
      EXPECT_GT(h(i, d), 0.0);
      EXPECT_LT(h(i, d), 1.0);
      seen.insert(h(i, d));
    }
    EXPECT_EQ(seen.size(), 500u);
  }
}

TEST(Halton, StreamingConsistency) {
  const Eigen::MatrixXd whole = halton_sequence(7, 30, 5);
  const Eigen::MatrixXd first = halton_sequence(7, 12, 5);
  const Eigen::MatrixXd second = halton_sequence(7, 18, 17);
  EXPECT_EQ(whole.topRows(12), first);
  EXPECT_EQ(whole.bottomRows(18), second);
}

TEST(Halton, DimensionLimit) {
  EXPECT_THROW(halton_sequence(51, 4), UnsupportedDimension);
  EXPECT_NO_THROW(halton_sequence(50, 4));
  EXPECT_THROW(halton_sequence(0, 4), std::invalid_argument);
}

TEST(NormalQuantile, ReferenceValues) {
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_NEAR(normal_quantile(0.25), -0.674489750196082, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-9);
}

TEST(NormalQuantile, InvertsErfcCdf) {
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    const double p = normal_cdf(x);
    if (p <= 0.0 || p >= 1.0) continue;
    const double back = normal_quantile(p);
    // the cdf loses relative precision in the upper tail; compare in probability there
    if (x < 5.0)
      EXPECT_NEAR(back, x, 1e-9 * std::max(1.0, std::abs(x)));
    else
      EXPECT_NEAR(normal_cdf(back), p, 1e-15);
  }
}

TEST(NormalDraws, ZeroCovarianceGivesMean) {
  const PriorSpec p = PriorSpec::normal(vec({1, -2, 3}), Eigen::MatrixXd::Zero(3, 3), 16);
  for (const auto& t : normal_draws(p, 0)) EXPECT_EQ(t, vec({1, -2, 3}));
}

TEST(NormalDraws, UnivariateQuantiles) {
  const PriorSpec p = PriorSpec::normal(vec({0}), Eigen::MatrixXd::Identity(1, 1), 2);
  const auto d = normal_draws(p, 0);
  EXPECT_EQ(d[0][0], 0.0);
  EXPECT_NEAR(d[1][0], -0.67449, 1e-5);
}

TEST(NormalDraws, SampleMomentsMatchPseudoRandom) {
  Eigen::MatrixXd cov = vec({1, 4}).asDiagonal();
  const PriorSpec p = PriorSpec::normal(vec({1, 2}), cov, 4096);
  const auto d = normal_draws(p, 0);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& t : d) mean += t;
  mean /= static_cast<double>(d.size());
  EXPECT_NEAR(mean[0], 1.0, 0.05);
  EXPECT_NEAR(mean[1], 2.0, 0.05);
  // pseudo-random reference draws with the same moments
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  Eigen::Vector2d ref = Eigen::Vector2d::Zero();
  for (int i = 0; i < 4096; ++i) ref += Eigen::Vector2d(1.0 + n(rng), 2.0 + 2.0 * n(rng));
  ref /= 4096.0;
  EXPECT_NEAR(mean[0], ref[0], 0.1);
  EXPECT_NEAR(mean[1], ref[1], 0.2);
  Eigen::Vector2d var = Eigen::Vector2d::Zero();
  for (const auto& t : d) var += (t - mean).cwiseAbs2();
  var /= static_cast<double>(d.size());
  EXPECT_NEAR(var[0], 1.0, 0.05);
  EXPECT_NEAR(var[1], 4.0, 0.2);
}

TEST(NormalDraws, BitReproducibleAndSkipAware) {
  const PriorSpec p = PriorSpec::normal(testing_helpers::cocktail_mean(),
                                        vec({4, 9, 49, 36, 49, 900, 900, 900, 900}).asDiagonal().toDenseMatrix(), 128);
  const auto a = normal_draws(p, 0);
  const auto b = normal_draws(p, 0);
  ASSERT_EQ(a.size(), 128u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  const auto shifted = normal_draws(p, 10);
  for (std::size_t i = 0; i + 10 < a.size(); ++i) EXPECT_EQ(shifted[i], a[i + 10]);
}

TEST(NormalDraws, SingularPsdCovariance) {
  Eigen::MatrixXd cov(2, 2);
  cov << 1, 1, 1, 1;
  const PriorSpec p = PriorSpec::normal(vec({0, 0}), cov, 64);
  for (const auto& t : normal_draws(p, 0)) EXPECT_NEAR(t[0], t[1], 1e-12);
}

TEST(NormalDraws, InvalidCovarianceRejected) {
  Eigen::MatrixXd cov(2, 2);
  cov << 1, 2, 2, 1;
  EXPECT_THROW(normal_draws(PriorSpec::normal(vec({0, 0}), cov, 4), 0), InvalidCovariance);
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  EXPECT_THROW(normal_draws(PriorSpec::normal(vec({0, 0}), asym, 4), 0), InvalidCovariance);
}

TEST(PriorSpec, PointPriorRules) {
  PriorSpec p = PriorSpec::point(vec({1, 2}));
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(prior_draws(p).size(), 1u);
  p.draws = 3;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}
