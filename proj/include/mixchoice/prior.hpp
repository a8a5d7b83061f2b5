#pragma once

// Prior specification, the identification transform, and deterministic
// Halton draws from a multivariate normal prior.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <boost/rational.hpp>
#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mixchoice/design_model.hpp"
#include "mixchoice/errors.hpp"
#include "mixchoice/mnl.hpp"

namespace mixchoice {

enum class PriorKind { Point, Normal };

struct PriorSpec {
  PriorKind kind = PriorKind::Point;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // normal only
  int draws = 1;
  std::uint64_t skip = 0;

  static PriorSpec point(Eigen::VectorXd mean) {
    PriorSpec p;
    p.kind = PriorKind::Point;
    p.mean = std::move(mean);
    return p;
  }

  static PriorSpec normal(Eigen::VectorXd mean, Eigen::MatrixXd covariance, int draws, std::uint64_t skip = 0) {
    PriorSpec p;
    p.kind = PriorKind::Normal;
    p.mean = std::move(mean);
    p.covariance = std::move(covariance);
    p.draws = draws;
    p.skip = skip;
    return p;
  }

  int dim() const { return static_cast<int>(mean.size()); }

  void validate() const {
    if (mean.size() == 0) throw std::invalid_argument("prior mean is empty");
    if (!mean.allFinite()) throw std::invalid_argument("prior mean has non-finite entries");
    if (kind == PriorKind::Point) {
      if (draws != 1) throw std::invalid_argument("point prior must use exactly one draw");
      return;
    }
    if (draws < 1) throw std::invalid_argument("normal prior needs at least one draw");
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
      throw std::invalid_argument("prior covariance dimension does not match the mean");
    if (!covariance.allFinite()) throw InvalidCovariance("prior covariance has non-finite entries");
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10)
      throw InvalidCovariance("prior covariance is not symmetric");
  }
};

/// Prior over the m+1 coefficients in which all q first-order mixture
/// effects appear (the last one is absorbed by the utility constant).
struct UnidentifiedPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Linear map T (m x (m+1)): gamma_i - gamma_q for i < q, gamma_q dropped, the rest passed through.
inline Eigen::MatrixXd identification_map(int q, int m) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m + 1);
  for (int i = 0; i < q - 1; ++i) {
    T(i, i) = 1.0;
    T(i, q - 1) = -1.0;
  }
  for (int k = q - 1; k < m; ++k) T(k, k + 1) = 1.0;
  return T;
}

inline PriorSpec identify_prior(const UnidentifiedPrior& u, int q) {
  if (q < 2) throw std::invalid_argument("identify_prior: need q >= 2");
  const auto full = u.mean.size();
  int m = -1;
  for (int r = 0; r <= 64; ++r) {
    const int candidate = param_count(q, r);
    if (candidate + 1 == full) m = candidate;
    if (candidate + 1 >= full) break;
  }
  if (m < 0)
    throw std::invalid_argument("identify_prior: " + std::to_string(full) +
                                " coefficients is not m+1 for any process-variable count with q=" + std::to_string(q));
  if (u.covariance.rows() != full || u.covariance.cols() != full)
    throw std::invalid_argument("identify_prior: covariance dimension does not match the mean");
  const Eigen::MatrixXd T = identification_map(q, m);
  return PriorSpec::normal(T * u.mean, T * u.covariance * T.transpose(), 1);
}

inline constexpr std::array<int, 50> kHaltonPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,  59,
    61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131, 137, 139,
    149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229};

/// Radical inverse of n in the given base as an exact fraction.
inline boost::rational<std::int64_t> radical_inverse_fraction(std::uint64_t n, int base) {
  std::int64_t num = 0;
  std::int64_t den = 1;
  while (n > 0) {
    const auto digit = static_cast<std::int64_t>(n % static_cast<std::uint64_t>(base));
    if (den > std::numeric_limits<std::int64_t>::max() / base) throw std::overflow_error("radical inverse overflow");
    num = num * base + digit;
    den *= base;
    n /= static_cast<std::uint64_t>(base);
  }
  return {num, den};
}

inline double radical_inverse(std::uint64_t n, int base) {
  const auto f = radical_inverse_fraction(n, base);
  return static_cast<double>(f.numerator()) / static_cast<double>(f.denominator());
}

/// R x dim matrix; column d holds base prime(d) radical inverses of skip+1 .. skip+R.
inline Eigen::MatrixXd halton_sequence(int dim, int R, std::uint64_t skip = 0) {
  if (dim < 1 || R < 1) throw std::invalid_argument("halton_sequence: need dim >= 1 and R >= 1");
  if (dim > static_cast<int>(kHaltonPrimes.size()))
    throw UnsupportedDimension("halton_sequence: dimension " + std::to_string(dim) + " exceeds the " +
                               std::to_string(kHaltonPrimes.size()) + "-prime table");
  Eigen::MatrixXd h(R, dim);
  for (int i = 0; i < R; ++i)
    for (int d = 0; d < dim; ++d) h(i, d) = radical_inverse(skip + 1 + static_cast<std::uint64_t>(i), kHaltonPrimes[d]);
  return h;
}

/// Standard normal quantile (Wichura, AS 241).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = p - 0.5;
  double r;
  double val;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    val = q *
          (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
               45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
            133.14166789178437745) * r + 3.387132872796366608) /
          (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
               21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
            42.313330701600911252) * r + 1.0);
    return val;
  }
  r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

/// Square-root factor C with C C^T = covariance: Cholesky when positive
/// definite, eigendecomposition for positive semidefinite input.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& covariance) {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
  if (eig.info() != Eigen::Success) throw InvalidCovariance("eigendecomposition of the prior covariance failed");
  const double floor = -1e-8 * std::abs(covariance.trace());
  if (eig.eigenvalues().minCoeff() < floor) throw InvalidCovariance("prior covariance is not positive semidefinite");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

/// theta_i = mean + C * Phi^{-1}(h_i) with h_i the i-th Halton row.
inline std::vector<ParameterVector> normal_draws(const PriorSpec& prior, std::uint64_t skip) {
  if (prior.kind != PriorKind::Normal) throw std::invalid_argument("normal_draws: prior is not normal");
  prior.validate();
  const Eigen::MatrixXd C = covariance_factor(prior.covariance);
  const Eigen::MatrixXd h = halton_sequence(prior.dim(), prior.draws, skip);
  std::vector<ParameterVector> out;
  out.reserve(static_cast<std::size_t>(prior.draws));
  Eigen::VectorXd u(prior.dim());
  for (int i = 0; i < prior.draws; ++i) {
    for (int d = 0; d < prior.dim(); ++d) u[d] = normal_quantile(h(i, d));
    out.emplace_back(prior.mean + C * u);
  }
  return out;
}

/// The draw set a criterion averages over: the mean for a point prior,
/// Halton draws (from the prior's own skip) for a normal prior.
inline std::vector<ParameterVector> prior_draws(const PriorSpec& prior) {
  prior.validate();
  if (prior.kind == PriorKind::Point) return {prior.mean};
  return normal_draws(prior, prior.skip);
}

}  // namespace mixchoice
