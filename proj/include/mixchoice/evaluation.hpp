#pragma once

// Fraction-of-design-space curves and side-by-side design comparison.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mixchoice/design_model.hpp"
#include "mixchoice/errors.hpp"
#include "mixchoice/mnl.hpp"
#include "mixchoice/optimality.hpp"
#include "mixchoice/optimizer.hpp"

namespace mixchoice {

inline constexpr int kDefaultFdsSamples = 10000;

struct FdsCurve {
  std::vector<double> fractions;  // i / M, i = 1..M
  std::vector<double> variances;  // sorted ascending
  int M = 0;
  std::uint64_t seed = 0;

  double min() const { return variances.front(); }
  double max() const { return variances.back(); }
  /// Sample median of the variances (mean of the two middle values for even M).
  double median() const {
    const auto n = variances.size();
    return n % 2 == 1 ? variances[n / 2] : 0.5 * (variances[n / 2 - 1] + variances[n / 2]);
  }
};

/// M points uniform on the simplex x [-1, 1]^r.
inline std::vector<DesignPoint> sample_region(const ModelSpec& spec, int M, std::uint64_t seed) {
  if (M < 1) throw std::invalid_argument("sample_region: need M >= 1");
  std::mt19937_64 rng(seed);
  std::vector<DesignPoint> out;
  out.reserve(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) out.push_back(random_point(spec, rng));
  return out;
}

/// Prediction variance at each region point averaged over draws, unsorted.
inline std::vector<double> averaged_prediction_variances(const ModelSpec& spec, const Design& design,
                                                         std::span<const ParameterVector> draws,
                                                         std::span<const DesignPoint> points) {
  if (draws.empty()) throw std::invalid_argument("prediction variances need at least one draw");
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors(draws.size());
  for (std::size_t r = 0; r < draws.size(); ++r) {
    const InfoMatrix info = information_matrix(spec, draws[r], design);
    if (!factorize_spd(info, factors[r]))
      throw SingularInformation("information matrix is singular for prior draw " + std::to_string(r),
                                static_cast<std::ptrdiff_t>(r));
  }
  std::vector<double> out(points.size());
  Eigen::VectorXd f(spec.m());
  Eigen::VectorXd half(spec.m());
  for (std::size_t i = 0; i < points.size(); ++i) {
    model_expand_into(spec, points[i].x, points[i].z, f);
    double sum = 0.0;
    for (const auto& llt : factors) {
      half = llt.matrixL().solve(f);
      sum += half.squaredNorm();
    }
    out[i] = sum / static_cast<double>(draws.size());
  }
  return out;
}

inline FdsCurve fds_curve(const ModelSpec& spec, const Design& design, std::span<const ParameterVector> draws, int M,
                          std::uint64_t seed) {
  if (M < 100) throw std::invalid_argument("fds_curve: need M >= 100 region samples");
  const auto points = sample_region(spec, M, seed);
  FdsCurve curve;
  curve.M = M;
  curve.seed = seed;
  curve.variances = averaged_prediction_variances(spec, design, draws, points);
  std::stable_sort(curve.variances.begin(), curve.variances.end());
  curve.fractions.resize(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) curve.fractions[static_cast<std::size_t>(i)] = static_cast<double>(i + 1) / M;
  return curve;
}

struct NamedDesign {
  std::string name;
  Design design;
};

struct ComparisonRow {
  std::string design;
  double d_value = kInfinity;
  double i_value = kInfinity;
  double fds_min = kInfinity;
  double fds_median = kInfinity;
  double fds_max = kInfinity;
};

inline std::vector<ComparisonRow> compare_designs(const ModelSpec& spec, std::span<const NamedDesign> designs,
                                                  std::span<const ParameterVector> draws, int M, std::uint64_t seed,
                                                  const MomentsMatrix* W = nullptr) {
  std::set<std::string> seen;
  for (const auto& d : designs)
    if (!seen.insert(d.name).second) throw std::invalid_argument("duplicate design name '" + d.name + "'");
  std::optional<MomentsMatrix> own_w;
  if (W == nullptr) {
    own_w.emplace(spec);
    W = &*own_w;
  }
  std::vector<ComparisonRow> rows;
  rows.reserve(designs.size());
  for (const auto& d : designs) {
    ComparisonRow row;
    row.design = d.name;
    row.d_value = bayesian_criterion(spec, d.design, draws, CriterionKind::D).value;
    row.i_value = bayesian_criterion(spec, d.design, draws, CriterionKind::I, W).value;
    const FdsCurve curve = fds_curve(spec, d.design, draws, M, seed);
    row.fds_min = curve.min();
    row.fds_median = curve.median();
    row.fds_max = curve.max();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mixchoice
