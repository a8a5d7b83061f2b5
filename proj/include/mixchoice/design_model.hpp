#pragma once

// Experimental region (simplex x hypercube), the identified model expansion
// of the mixture-process compromise model, pseudocomponents and Cox moves.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixchoice/errors.hpp"

namespace mixchoice {

inline constexpr double kSimplexTolerance = 1e-10;
inline constexpr double kRenormalizeTolerance = 1e-6;

/// Number of identified parameters: q + q(q-1)/2 + qr + r(r-1)/2 + r - 1.
inline int param_count(int q, int r) {
  if (q < 2) throw std::invalid_argument("param_count: need q >= 2, got " + std::to_string(q));
  if (r < 0) throw std::invalid_argument("param_count: need r >= 0, got " + std::to_string(r));
  return q + q * (q - 1) / 2 + q * r + r * (r - 1) / 2 + r - 1;
}

/// Monomial x_1^{n_1}..x_q^{n_q} z_1^{m_1}..z_r^{m_r}.
struct Term {
  std::vector<int> mixture;  // n_1..n_q
  std::vector<int> process;  // m_1..m_r

  Term operator*(const Term& other) const {
    Term out = *this;
    for (std::size_t k = 0; k < out.mixture.size(); ++k) out.mixture[k] += other.mixture[k];
    for (std::size_t l = 0; l < out.process.size(); ++l) out.process[l] += other.process[l];
    return out;
  }
  bool operator==(const Term&) const = default;
};

class ModelSpec {
 public:
  ModelSpec(int q, int r) : q_(q), r_(r), m_(param_count(q, r)) { build_terms(); }

  int q() const noexcept { return q_; }
  int r() const noexcept { return r_; }
  int m() const noexcept { return m_; }
  const std::vector<Term>& terms() const noexcept { return terms_; }

  bool operator==(const ModelSpec& o) const noexcept { return q_ == o.q_ && r_ == o.r_; }

 private:
  // x_1..x_{q-1}; x_i x_k (i<k); x_k z_i grouped by i then k; z_i z_k (i<k); z_i^2
  void build_terms() {
    auto blank = [&] { return Term{std::vector<int>(q_, 0), std::vector<int>(r_, 0)}; };
    terms_.reserve(static_cast<std::size_t>(m_));
    for (int i = 0; i < q_ - 1; ++i) {
      Term t = blank();
      t.mixture[i] = 1;
      terms_.push_back(std::move(t));
    }
    for (int i = 0; i < q_; ++i)
      for (int k = i + 1; k < q_; ++k) {
        Term t = blank();
        t.mixture[i] = 1;
        t.mixture[k] = 1;
        terms_.push_back(std::move(t));
      }
    for (int i = 0; i < r_; ++i)
      for (int k = 0; k < q_; ++k) {
        Term t = blank();
        t.mixture[k] = 1;
        t.process[i] = 1;
        terms_.push_back(std::move(t));
      }
    for (int i = 0; i < r_; ++i)
      for (int k = i + 1; k < r_; ++k) {
        Term t = blank();
        t.process[i] = 1;
        t.process[k] = 1;
        terms_.push_back(std::move(t));
      }
    for (int i = 0; i < r_; ++i) {
      Term t = blank();
      t.process[i] = 2;
      terms_.push_back(std::move(t));
    }
  }

  int q_;
  int r_;
  int m_;
  std::vector<Term> terms_;
};

struct DesignPoint {
  Eigen::VectorXd x;  // ingredient proportions
  Eigen::VectorXd z;  // process settings, coded to [-1, 1]
};

/// Throws RegionViolation unless p lies in the simplex x [-1,1]^r region of spec.
inline void validate_point(const ModelSpec& spec, const DesignPoint& p) {
  if (p.x.size() != spec.q() || p.z.size() != spec.r())
    throw std::invalid_argument("design point has " + std::to_string(p.x.size()) + " proportions and " +
                                std::to_string(p.z.size()) + " process settings; model expects " +
                                std::to_string(spec.q()) + " and " + std::to_string(spec.r()));
  if (!p.x.allFinite() || !p.z.allFinite()) throw RegionViolation("design point has non-finite coordinates");
  if ((p.x.array() < 0.0).any()) throw RegionViolation("negative ingredient proportion");
  if (std::abs(p.x.sum() - 1.0) > kSimplexTolerance) throw RegionViolation("ingredient proportions do not sum to one");
  if ((p.z.array().abs() > 1.0).any()) throw RegionViolation("process setting outside [-1, 1]");
}

/// Accepts proportions whose sum is off by less than 1e-6, dividing by the sum
/// when the deviation exceeds the 1e-10 simplex tolerance.
inline void normalize_mixture(Eigen::VectorXd& x) {
  const double sum = x.sum();
  const double dev = std::abs(sum - 1.0);
  if (!(dev < kRenormalizeTolerance))
    throw RegionViolation("ingredient proportions sum to " + std::to_string(sum));
  if (dev > kSimplexTolerance) x /= sum;
}

class Design {
 public:
  Design() = default;
  Design(int S, int J, std::vector<DesignPoint> points) : S_(S), J_(J), points_(std::move(points)) {
    if (S < 1 || J < 2) throw std::invalid_argument("design needs S >= 1 and J >= 2");
    if (points_.size() != static_cast<std::size_t>(S) * static_cast<std::size_t>(J))
      throw std::invalid_argument("design point count does not equal S*J");
  }

  int S() const noexcept { return S_; }
  int J() const noexcept { return J_; }

  const DesignPoint& at(int s, int j) const { return points_[index(s, j)]; }
  DesignPoint& at(int s, int j) { return points_[index(s, j)]; }

  std::span<const DesignPoint> choice_set(int s) const {
    return {points_.data() + index(s, 0), static_cast<std::size_t>(J_)};
  }
  const std::vector<DesignPoint>& points() const noexcept { return points_; }

  void validate(const ModelSpec& spec) const {
    for (const auto& p : points_) validate_point(spec, p);
  }

 private:
  std::size_t index(int s, int j) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(J_) + static_cast<std::size_t>(j);
  }

  int S_ = 0;
  int J_ = 0;
  std::vector<DesignPoint> points_;
};

/// Writes f(x, z) into out (length spec.m()) in term-table order, without allocating.
inline void model_expand_into(const ModelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& z, Eigen::Ref<Eigen::VectorXd> out) {
  const int q = spec.q();
  const int r = spec.r();
  int t = 0;
  for (int i = 0; i < q - 1; ++i) out[t++] = x[i];
  for (int i = 0; i < q; ++i)
    for (int k = i + 1; k < q; ++k) out[t++] = x[i] * x[k];
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < q; ++k) out[t++] = x[k] * z[i];
  for (int i = 0; i < r; ++i)
    for (int k = i + 1; k < r; ++k) out[t++] = z[i] * z[k];
  for (int i = 0; i < r; ++i) out[t++] = z[i] * z[i];
}

inline Eigen::VectorXd model_expand(const ModelSpec& spec, const DesignPoint& p) {
  if (p.x.size() != spec.q() || p.z.size() != spec.r())
    throw std::invalid_argument("model_expand: point dimensions do not match model (q=" + std::to_string(spec.q()) +
                                ", r=" + std::to_string(spec.r()) + ")");
  Eigen::VectorXd f(spec.m());
  model_expand_into(spec, p.x, p.z, f);
  return f;
}

struct IngredientBounds {
  Eigen::VectorXd lower;

  double total() const { return lower.sum(); }
  void validate() const {
    if ((lower.array() < 0.0).any()) throw std::invalid_argument("negative ingredient lower bound");
    if (total() >= 1.0) throw std::invalid_argument("ingredient lower bounds sum to 1 or more");
  }
};

/// x_i = (a_i - L_i) / (1 - L).
inline Eigen::VectorXd to_pseudocomponents(const Eigen::VectorXd& a, const IngredientBounds& bounds) {
  bounds.validate();
  if (a.size() != bounds.lower.size()) throw std::invalid_argument("to_pseudocomponents: dimension mismatch");
  if (std::abs(a.sum() - 1.0) > kSimplexTolerance) throw RegionViolation("true proportions do not sum to one");
  if (((a - bounds.lower).array() < 0.0).any()) throw RegionViolation("proportion below its lower bound");
  return (a - bounds.lower) / (1.0 - bounds.total());
}

inline Eigen::VectorXd from_pseudocomponents(const Eigen::VectorXd& x, const IngredientBounds& bounds) {
  bounds.validate();
  if (x.size() != bounds.lower.size()) throw std::invalid_argument("from_pseudocomponents: dimension mismatch");
  return bounds.lower + (1.0 - bounds.total()) * x;
}

/// Moves x_i to x_i + delta along the Cox direction; the other proportions
/// keep their ratios (or split the remainder equally when x_i = 1).
inline Eigen::VectorXd cox_move(const Eigen::VectorXd& x, int i, double delta) {
  const int q = static_cast<int>(x.size());
  if (i < 0 || i >= q) throw std::out_of_range("cox_move: ingredient index out of range");
  const double target = x[i] + delta;
  if (!(target >= 0.0 && target <= 1.0)) throw std::out_of_range("cox_move: x_i + delta outside [0, 1]");
  Eigen::VectorXd out(q);
  double rest = 0.0;
  for (int k = 0; k < q; ++k)
    if (k != i) rest += x[k];
  if (x[i] == 1.0 || !(rest > 0.0)) {
    out.setConstant((1.0 - target) / (q - 1));
  } else {
    // equals 1 - delta / (1 - x_i) on the simplex, without cancellation near x_i = 1
    out = x * ((1.0 - target) / rest);
  }
  out[i] = target;
  // rounding can leave -1e-17 residues on coordinates driven to zero
  for (int k = 0; k < q; ++k)
    if (out[k] < 0.0) out[k] = 0.0;
  return out;
}

}  // namespace mixchoice
