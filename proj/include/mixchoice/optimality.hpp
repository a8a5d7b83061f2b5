#pragma once

// Region moments matrix (exact rational), D- and I-criteria, and their
// average over prior draws.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>
#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mixchoice/design_model.hpp"
#include "mixchoice/mnl.hpp"

namespace mixchoice {

using Rational = boost::rational<std::int64_t>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

namespace detail {

inline std::int64_t factorial(int n) {
  if (n < 0) throw std::invalid_argument("factorial of a negative number");
  if (n > 20) throw std::overflow_error("factorial " + std::to_string(n) + "! exceeds the 64-bit rational range");
  std::int64_t out = 1;
  for (int k = 2; k <= n; ++k) out *= k;
  return out;
}

}  // namespace detail

/// Integral of prod x_k^{n_k} over the (q-1)-simplex: prod n_k! / (q - 1 + sum n_k)!.
inline Rational simplex_moment(std::span<const int> exponents) {
  const int q = static_cast<int>(exponents.size());
  if (q < 2) throw std::invalid_argument("simplex_moment: need q >= 2");
  int total = 0;
  Rational num(1);
  for (int n : exponents) {
    if (n < 0) throw std::invalid_argument("simplex_moment: negative exponent");
    total += n;
    num *= detail::factorial(n);
  }
  return num / Rational(detail::factorial(q - 1 + total));
}

/// Integral of prod z_l^{m_l} over [-1, 1]^r; zero whenever some m_l is odd.
inline Rational box_moment(std::span<const int> exponents) {
  Rational out(1);
  for (int e : exponents) {
    if (e < 0) throw std::invalid_argument("box_moment: negative exponent");
    if (e % 2 != 0) return Rational(0);
    out *= Rational(2, e + 1);
  }
  return out;
}

class MomentsMatrix {
 public:
  explicit MomentsMatrix(const ModelSpec& spec) : m_(spec.m()), exact_(static_cast<std::size_t>(m_ * m_)) {
    const auto& terms = spec.terms();
    values_.resize(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (int j = i; j < m_; ++j) {
        const Term product = terms[i] * terms[j];
        const Rational w = box_moment(product.process) * simplex_moment(product.mixture);
        exact_[idx(i, j)] = w;
        exact_[idx(j, i)] = w;
        values_(i, j) = values_(j, i) = boost::rational_cast<double>(w);
      }
  }

  int m() const noexcept { return m_; }
  const Rational& exact(int i, int j) const { return exact_[idx(i, j)]; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i * m_ + j); }

  int m_;
  std::vector<Rational> exact_;
  Eigen::MatrixXd values_;
};

inline MomentsMatrix moments_matrix(const ModelSpec& spec) { return MomentsMatrix(spec); }

enum class CriterionKind { D, I };

inline const char* to_string(CriterionKind kind) { return kind == CriterionKind::D ? "D" : "I"; }

struct CriterionValue {
  double value = kInfinity;  // lower is better; +inf flags a singular design
  CriterionKind kind = CriterionKind::D;
  bool bayesian = false;
  int draws_used = 0;

  bool singular() const { return std::isinf(value); }
};

/// det(I^{-1})^{1/m} from the Cholesky log-determinant; +inf when singular.
inline double d_value(const InfoMatrix& info, int m) {
  if (info.rows() != m || info.cols() != m) throw std::invalid_argument("d_value: information matrix is not m x m");
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factorize_spd(info, llt)) return kInfinity;
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return std::exp(-logdet / m);
}

/// tr(I^{-1} W); +inf when singular.
inline double i_value(const InfoMatrix& info, const MomentsMatrix& W) {
  if (info.rows() != W.m() || info.cols() != W.m())
    throw std::invalid_argument("i_value: information and moments matrices differ in size");
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factorize_spd(info, llt)) return kInfinity;
  return llt.solve(W.values()).trace();
}

/// (1/R) sum over draws of the local criterion. Draws are reduced in order.
inline CriterionValue bayesian_criterion(const ModelSpec& spec, const Design& design,
                                         std::span<const ParameterVector> draws, CriterionKind kind,
                                         const MomentsMatrix* W = nullptr) {
  if (draws.empty()) throw std::invalid_argument("bayesian_criterion: no prior draws");
  if (kind == CriterionKind::I && W == nullptr) throw std::invalid_argument("I-criterion requires a moments matrix");
  CriterionValue out;
  out.kind = kind;
  out.bayesian = draws.size() > 1;
  out.draws_used = static_cast<int>(draws.size());
  double sum = 0.0;
  for (const auto& theta : draws) {
    const InfoMatrix info = information_matrix(spec, theta, design);
    const double v = kind == CriterionKind::D ? d_value(info, spec.m()) : i_value(info, *W);
    if (std::isinf(v)) {
      out.value = kInfinity;
      return out;
    }
    sum += v;
  }
  out.value = sum / static_cast<double>(draws.size());
  return out;
}

}  // namespace mixchoice
