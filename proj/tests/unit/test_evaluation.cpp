#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace mixchoice;
using testing_helpers::vec;

namespace {

double sample_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double bootstrap_se_of_median(const std::vector<double>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
  std::vector<double> meds;
  for (int b = 0; b < 200; ++b) {
    std::vector<double> s(v.size());
    for (auto& x : s) x = v[pick(rng)];
    meds.push_back(sample_median(s));
  }
  double mean = 0.0;
  for (double m : meds) mean += m;
  mean /= meds.size();
  double var = 0.0;
  for (double m : meds) var += (m - mean) * (m - mean);
  return std::sqrt(var / (meds.size() - 1));
}

}  // namespace

TEST(SampleRegion, FeasibleAndDeterministic) {
  const ModelSpec spec(3, 2);
  const auto a = sample_region(spec, 1000, 5);
  const auto b = sample_region(spec, 1000, 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NO_THROW(validate_point(spec, a[i]));
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].z, b[i].z);
  }
  EXPECT_THROW(sample_region(spec, 0, 1), std::invalid_argument);
}

TEST(SampleRegion, DirichletAndUniformMoments) {
  const ModelSpec spec(3, 1);
  const auto pts = sample_region(spec, 100000, 12);
  double m1 = 0, m2 = 0, s11 = 0, s12 = 0, mz = 0;
  for (const auto& p : pts) {
    m1 += p.x[0];
    m2 += p.x[1];
    mz += p.z[0];
  }
  const double n = static_cast<double>(pts.size());
  m1 /= n;
  m2 /= n;
  mz /= n;
  for (const auto& p : pts) {
    s11 += (p.x[0] - m1) * (p.x[0] - m1);
    s12 += (p.x[0] - m1) * (p.x[1] - m2);
  }
  EXPECT_NEAR(s11 / n, 1.0 / 18.0, 0.1 / 18.0);
  EXPECT_NEAR(s12 / n, -1.0 / 36.0, 0.1 / 36.0);
  EXPECT_NEAR(mz, 0.0, 0.01);
}

TEST(FdsCurve, StructureAndMedian) {
  const ModelSpec spec(3, 1);
  const Design d = random_design(spec, 30, 2, 2);
  const std::vector<ParameterVector> draws{testing_helpers::cocktail_mean(), ParameterVector::Zero(9)};
  const FdsCurve c = fds_curve(spec, d, draws, 1001, 4);
  ASSERT_EQ(c.variances.size(), 1001u);
  EXPECT_TRUE(std::is_sorted(c.variances.begin(), c.variances.end()));
  EXPECT_DOUBLE_EQ(c.fractions.front(), 1.0 / 1001.0);
  EXPECT_EQ(c.fractions.back(), 1.0);
  for (std::size_t i = 1; i < c.fractions.size(); ++i) EXPECT_GT(c.fractions[i], c.fractions[i - 1]);
  const auto raw = averaged_prediction_variances(spec, d, draws, sample_region(spec, 1001, 4));
  EXPECT_EQ(c.median(), sample_median(raw));
  EXPECT_EQ(c.min(), *std::min_element(raw.begin(), raw.end()));
  EXPECT_EQ(c.max(), *std::max_element(raw.begin(), raw.end()));
  const FdsCurve even = fds_curve(spec, d, draws, 1000, 4);
  EXPECT_EQ(even.median(), 0.5 * (even.variances[499] + even.variances[500]));
}

TEST(FdsCurve, AveragesOverDrawsThenSorts) {
  const ModelSpec spec(3, 1);
  const Design d = random_design(spec, 30, 2, 2);
  const std::vector<ParameterVector> draws{testing_helpers::cocktail_mean(), ParameterVector::Zero(9)};
  const auto pts = sample_region(spec, 200, 9);
  const auto avg = averaged_prediction_variances(spec, d, draws, pts);
  const Eigen::MatrixXd i0 = information_matrix(spec, draws[0], d);
  const Eigen::MatrixXd i1 = information_matrix(spec, draws[1], d);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Eigen::VectorXd f = model_expand(spec, pts[k]);
    const double oracle = 0.5 * (f.dot(i0.inverse() * f) + f.dot(i1.inverse() * f));
    EXPECT_NEAR(avg[k], oracle, 1e-8 * oracle);
  }
}

TEST(FdsCurve, ScaledInformationGivesScaledCurve) {
  // replicating every choice set doubles the information, halving all variances
  const ModelSpec spec(3, 1);
  const Design d = random_design(spec, 20, 2, 6);
  std::vector<DesignPoint> twice = d.points();
  twice.insert(twice.end(), d.points().begin(), d.points().end());
  const std::vector<ParameterVector> draws{testing_helpers::cocktail_mean()};
  const FdsCurve a = fds_curve(spec, d, draws, 500, 1);
  const FdsCurve b = fds_curve(spec, Design(40, 2, twice), draws, 500, 1);
  for (std::size_t i = 0; i < a.variances.size(); ++i) EXPECT_NEAR(b.variances[i], 0.5 * a.variances[i], 1e-9 * a.variances[i]);
}

TEST(FdsCurve, MeanVarianceMatchesIValue) {
  const ModelSpec spec(3, 2);
  const MomentsMatrix W(spec);
  const Design d = random_design(spec, 40, 2, 31);
  const std::vector<ParameterVector> draws{ParameterVector::Constant(spec.m(), 0.2)};
  const auto v = averaged_prediction_variances(spec, d, draws, sample_region(spec, 200000, 3));
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  const double volume = 4.0 / 2.0;  // 2^r / (q-1)!
  const double iv = i_value(information_matrix(spec, draws[0], d), W);
  EXPECT_NEAR(mean * volume, iv, 0.02 * iv);
}

TEST(FdsCurve, SingularDrawNamed) {
  const ModelSpec spec(2, 0);
  const Design d(2, 2, {testing_helpers::pt({1, 0}), testing_helpers::pt({0, 1}), testing_helpers::pt({0.5, 0.5}),
                        testing_helpers::pt({0, 1})});
  const std::vector<ParameterVector> draws{vec({0, 0}), vec({1, 1}), vec({800, 3000})};
  try {
    fds_curve(spec, d, draws, 100, 1);
    FAIL() << "expected SingularInformation";
  } catch (const SingularInformation& e) {
    EXPECT_EQ(e.draw(), 2);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
  EXPECT_THROW(fds_curve(spec, d, std::vector<ParameterVector>{vec({0, 0})}, 99, 1), std::invalid_argument);
}

TEST(FdsCurve, SeedInvarianceInDistribution) {
  const ModelSpec spec(3, 1);
  const Design d = random_design(spec, 40, 2, 8);
  const std::vector<ParameterVector> draws{testing_helpers::cocktail_mean()};
  const auto a = averaged_prediction_variances(spec, d, draws, sample_region(spec, 4000, 100));
  const auto b = averaged_prediction_variances(spec, d, draws, sample_region(spec, 4000, 200));
  const double se = std::hypot(bootstrap_se_of_median(a, 1), bootstrap_se_of_median(b, 2));
  EXPECT_LT(std::abs(sample_median(a) - sample_median(b)), 3.0 * se);
}

TEST(CompareDesigns, SelfComparisonAndDuplicates) {
  const ModelSpec spec(3, 1);
  const Design d = random_design(spec, 20, 2, 3);
  const std::vector<ParameterVector> draws{testing_helpers::cocktail_mean()};
  const std::vector<NamedDesign> designs{{"a", d}, {"b", d}};
  const auto rows = compare_designs(spec, designs, draws, 500, 7);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].d_value, rows[1].d_value);
  EXPECT_EQ(rows[0].i_value, rows[1].i_value);
  EXPECT_EQ(rows[0].fds_median, rows[1].fds_median);
  EXPECT_LE(rows[0].fds_min, rows[0].fds_median);
  EXPECT_LE(rows[0].fds_median, rows[0].fds_max);
  const std::vector<NamedDesign> dup{{"a", d}, {"a", d}};
  EXPECT_THROW(compare_designs(spec, dup, draws, 500, 7), std::invalid_argument);
}

TEST(CompareDesigns, IOptimalHasLowerIValue) {
  const ModelSpec spec(3, 1);
  const auto draws = prior_draws(PriorSpec::normal(testing_helpers::cocktail_mean(),
                                                   vec({4, 9, 49, 36, 49, 900, 900, 900, 900}).asDiagonal().toDenseMatrix(),
                                                   8));
  OptimizerConfig cfg;
  cfg.n_starts = 2;
  cfg.max_passes = 8;
  const Design di = coordinate_exchange(spec, 20, 2, draws, CriterionKind::I, cfg).best_design;
  const Design dd = coordinate_exchange(spec, 20, 2, draws, CriterionKind::D, cfg).best_design;
  const std::vector<NamedDesign> designs{{"i-opt", di}, {"d-opt", dd}};
  const auto rows = compare_designs(spec, designs, draws, 2000, 3);
  EXPECT_LT(rows[0].i_value, rows[1].i_value);
  EXPECT_LT(rows[1].d_value, rows[0].d_value);
}
