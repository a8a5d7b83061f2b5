#pragma once

// Multi-start coordinate-exchange search. Each ingredient proportion is
// optimized along the Cox direction and each process setting directly,
// both with Brent's univariate minimizer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mixchoice/design_model.hpp"
#include "mixchoice/errors.hpp"
#include "mixchoice/mnl.hpp"
#include "mixchoice/optimality.hpp"

namespace mixchoice {

struct OptimizerConfig {
  int n_starts = 10;
  int max_passes = 25;
  double rel_tol = 1e-6;
  double brent_tol = 1e-4;
  int brent_max_iter = 50;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_starts < 1) throw std::invalid_argument("optimizer: n_starts must be >= 1");
    if (max_passes < 1) throw std::invalid_argument("optimizer: max_passes must be >= 1");
    if (!(rel_tol > 0.0) || !(brent_tol > 0.0)) throw std::invalid_argument("optimizer: tolerances must be > 0");
    if (brent_max_iter < 1) throw std::invalid_argument("optimizer: brent_max_iter must be >= 1");
  }
};

struct StartResult {
  int start = 0;
  std::uint64_t seed = 0;
  double initial_value = kInfinity;
  double final_value = kInfinity;
  int passes = 0;
  int accepted_moves = 0;
  std::vector<double> trace;  // initial value followed by every accepted value
};

struct OptimizationReport {
  Design best_design;
  CriterionValue best_value;
  int best_start = -1;
  std::vector<StartResult> per_start;
  std::vector<double> trace;  // of the best start
};

/// SplitMix64 finalizer; decorrelates per-start seeds drawn from one config seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
inline double uniform_open01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform point on the simplex (normalized exponential spacings) and in [-1, 1]^r.
inline DesignPoint random_point(const ModelSpec& spec, std::mt19937_64& rng) {
  DesignPoint p{Eigen::VectorXd(spec.q()), Eigen::VectorXd(spec.r())};
  for (int k = 0; k < spec.q(); ++k) p.x[k] = -std::log(uniform_open01(rng));
  p.x /= p.x.sum();
  for (int l = 0; l < spec.r(); ++l) p.z[l] = 2.0 * uniform_open01(rng) - 1.0;
  return p;
}

inline Design random_design(const ModelSpec& spec, int S, int J, std::uint64_t seed) {
  if (S < 1 || J < 2) throw std::invalid_argument("random_design: need S >= 1 and J >= 2");
  std::mt19937_64 rng(seed);
  std::vector<DesignPoint> points;
  points.reserve(static_cast<std::size_t>(S) * static_cast<std::size_t>(J));
  for (int i = 0; i < S * J; ++i) points.push_back(random_point(spec, rng));
  return Design(S, J, std::move(points));
}

struct BrentResult {
  double x = 0.0;
  double value = kInfinity;
  int evaluations = 0;
};

/// Minimizes g on [lo, hi] by golden section with successive parabolic
/// interpolation, then compares against both endpoints. g may return +inf.
template <class F>
BrentResult brent_minimize(F&& g, double lo, double hi, double tol, int max_iter) {
  if (!(lo < hi)) throw std::invalid_argument("brent_minimize: need lo < hi");
  constexpr double kGolden = 0.3819660112501051;  // (3 - sqrt 5) / 2
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  BrentResult out;
  double a = lo;
  double b = hi;
  double x = a + kGolden * (b - a);
  double w = x;
  double v = x;
  double fx = g(x);
  ++out.evaluations;
  double fw = fx;
  double fv = fx;
  double d = 0.0;
  double e = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double mid = 0.5 * (a + b);
    const double tol1 = eps * std::abs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = x < mid ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x < mid ? b : a) - x;
      d = kGolden * e;
    }
    const double u = x + (std::abs(d) >= tol1 ? d : (d > 0.0 ? tol1 : -tol1));
    const double fu = g(u);
    ++out.evaluations;
    if (fu <= fx) {
      (u < x ? b : a) = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  out.x = x;
  out.value = fx;
  for (double end : {lo, hi}) {
    const double fe = g(end);
    ++out.evaluations;
    if (fe < out.value) {
      out.x = end;
      out.value = fe;
    }
  }
  return out;
}

/// Bayesian criterion of a design under incremental single-set updates.
/// Keeps, for every draw, each choice set's information contribution and
/// their sum, so a candidate change to one set costs one set update and
/// one factorization per draw.
class IncrementalObjective {
 public:
  IncrementalObjective(const ModelSpec& spec, std::span<const ParameterVector> draws, CriterionKind kind,
                       const MomentsMatrix* W = nullptr)
      : spec_(spec), draws_(draws.begin(), draws.end()), kind_(kind) {
    if (draws_.empty()) throw std::invalid_argument("objective needs at least one prior draw");
    for (const auto& t : draws_)
      if (t.size() != spec.m()) throw std::invalid_argument("prior draw length does not equal m");
    if (kind == CriterionKind::I) {
      if (W == nullptr || W->m() != spec.m()) throw std::invalid_argument("I-criterion requires a matching moments matrix");
      Eigen::LLT<Eigen::MatrixXd> wf(W->values());
      if (wf.info() != Eigen::Success) throw NumericalError("moments matrix is not positive definite");
      w_root_ = wf.matrixL();
    }
    const int m = spec.m();
    work_.resize(m, m);
    column_.resize(m);
  }

  CriterionKind kind() const noexcept { return kind_; }
  int draw_count() const noexcept { return static_cast<int>(draws_.size()); }
  double value() const noexcept { return value_; }

  /// Rebuilds all cached contributions from design and returns its criterion value.
  double reset(const Design& design) {
    S_ = design.S();
    const int m = spec_.m();
    const std::size_t R = draws_.size();
    contrib_.assign(R * static_cast<std::size_t>(S_), Eigen::MatrixXd());
    totals_.assign(R, Eigen::MatrixXd::Zero(m, m));
    for (int s = 0; s < S_; ++s) {
      const Eigen::MatrixXd X = set_model_matrix(spec_, design.choice_set(s));
      for (std::size_t r = 0; r < R; ++r) {
        Eigen::MatrixXd& c = contrib_[r * static_cast<std::size_t>(S_) + static_cast<std::size_t>(s)];
        c.setZero(m, m);
        accumulate_set_information(X, draws_[r], c, probs_, mean_row_);
        totals_[r] += c;
      }
    }
    double sum = 0.0;
    value_ = kInfinity;
    for (std::size_t r = 0; r < R; ++r) {
      work_ = totals_[r];
      const double v = local_value(work_);
      if (std::isinf(v)) return value_;
      sum += v;
    }
    value_ = sum / static_cast<double>(R);
    return value_;
  }

  /// Criterion value if choice set s were replaced by new_set. Does not modify state.
  double candidate(int s, std::span<const DesignPoint> new_set) {
    const Eigen::MatrixXd X = set_model_matrix(spec_, new_set);
    const Eigen::Index m = spec_.m();
    double sum = 0.0;
    for (std::size_t r = 0; r < draws_.size(); ++r) {
      const Eigen::MatrixXd& total = totals_[r];
      const Eigen::MatrixXd& old = contrib_[r * static_cast<std::size_t>(S_) + static_cast<std::size_t>(s)];
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = j; i < m; ++i) work_(i, j) = total(i, j) - old(i, j);
      add_set_lower(X, draws_[r], work_);
      const double v = local_value(work_);
      if (std::isinf(v)) return kInfinity;
      sum += v;
    }
    return sum / static_cast<double>(draws_.size());
  }

  /// Replaces choice set s by new_set; value is the candidate value already computed for it.
  void commit(int s, std::span<const DesignPoint> new_set, double value) {
    const Eigen::MatrixXd X = set_model_matrix(spec_, new_set);
    const int m = spec_.m();
    for (std::size_t r = 0; r < draws_.size(); ++r) {
      Eigen::MatrixXd& c = contrib_[r * static_cast<std::size_t>(S_) + static_cast<std::size_t>(s)];
      totals_[r] -= c;
      c.setZero(m, m);
      accumulate_set_information(X, draws_[r], c, probs_, mean_row_);
      totals_[r] += c;
    }
    value_ = value;
  }

 private:
  // Lower triangle of X^T (P - p p^T) X added into out, as sum_j p_j (f_j - fbar)(f_j - fbar)^T.
  void add_set_lower(const Eigen::MatrixXd& X, const ParameterVector& theta, Eigen::MatrixXd& out) {
    const Eigen::Index J = X.rows();
    const Eigen::Index m = X.cols();
    probs_.resize(J);
    probs_.noalias() = X * theta;
    const double top = probs_.maxCoeff();
    probs_ = (probs_.array() - top).exp();
    probs_ /= probs_.sum();
    mean_row_.noalias() = X.transpose() * probs_;
    centered_.resize(m);
    for (Eigen::Index a = 0; a < J; ++a) {
      const double p = probs_[a];
      for (Eigen::Index k = 0; k < m; ++k) centered_[k] = X(a, k) - mean_row_[k];
      for (Eigen::Index j = 0; j < m; ++j) {
        const double cj = p * centered_[j];
        double* col = &out(0, j);
        for (Eigen::Index i = j; i < m; ++i) col[i] += cj * centered_[i];
      }
    }
  }

  // In-place right-looking Cholesky on the lower triangle. False on a
  // non-positive pivot or when the pivot ratio flags a singular matrix.
  static bool cholesky_lower(Eigen::MatrixXd& a) {
    const Eigen::Index m = a.rows();
    for (Eigen::Index j = 0; j < m; ++j) {
      double* cj = &a(0, j);
      const double d = cj[j];
      if (!(d > 0.0)) return false;
      const double ljj = std::sqrt(d);
      cj[j] = ljj;
      const double inv = 1.0 / ljj;
      for (Eigen::Index i = j + 1; i < m; ++i) cj[i] *= inv;
      for (Eigen::Index k = j + 1; k < m; ++k) {
        double* ck = &a(0, k);
        const double lkj = cj[k];
        for (Eigen::Index i = k; i < m; ++i) ck[i] -= cj[i] * lkj;
      }
    }
    const double rc = cholesky_rcond(a);
    return std::isfinite(rc) && rc >= kSingularRcond;
  }

  double local_value(Eigen::MatrixXd& info) {
    if (!cholesky_lower(info)) return kInfinity;
    const Eigen::Index m = info.rows();
    if (kind_ == CriterionKind::D) {
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) logdet += std::log(info(i, i));
      return std::exp(-2.0 * logdet / static_cast<double>(m));
    }
    // tr(I^{-1} W) = ||L^{-1} U||_F^2 with I = L L^T, W = U U^T; column c of
    // U is zero above row c, so forward substitution starts at row c
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m; ++c) {
      for (Eigen::Index i = c; i < m; ++i) column_[i] = w_root_(i, c);
      for (Eigen::Index j = c; j < m; ++j) {
        const double yj = column_[j] / info(j, j);
        column_[j] = yj;
        sum += yj * yj;
        const double* lj = &info(0, j);
        for (Eigen::Index i = j + 1; i < m; ++i) column_[i] -= lj[i] * yj;
      }
    }
    return sum;
  }

  ModelSpec spec_;
  std::vector<ParameterVector> draws_;
  CriterionKind kind_;
  Eigen::MatrixXd w_root_;
  int S_ = 0;
  std::vector<Eigen::MatrixXd> contrib_;  // [draw * S + set]
  std::vector<Eigen::MatrixXd> totals_;
  double value_ = kInfinity;
  Eigen::MatrixXd work_;
  Eigen::VectorXd column_;
  Eigen::VectorXd centered_;
  Eigen::VectorXd probs_;
  Eigen::VectorXd mean_row_;
};

struct Coordinate {
  enum class Type { Mixture, Process };
  Type type;
  int index;

  static Coordinate mixture(int i) { return {Type::Mixture, i}; }
  static Coordinate process(int k) { return {Type::Process, k}; }
};

struct CoordinateSettings {
  double rel_tol = 1e-6;
  double brent_tol = 1e-4;
  int brent_max_iter = 50;
};

struct CoordinateResult {
  bool accepted = false;
  double value = kInfinity;
};

/// A strictly better value than current by more than rel_tol * |current|.
/// Any finite value improves on a singular (+inf) design.
inline bool improves(double candidate, double current, double rel_tol) {
  if (!std::isfinite(candidate)) return false;
  if (std::isinf(current)) return true;
  return current - candidate > rel_tol * std::abs(current);
}

/// Brent-optimizes one coordinate of alternative j in choice set s. The
/// design and objective are updated only when the move is accepted.
inline CoordinateResult optimize_coordinate(const ModelSpec& spec, Design& design, int s, int j, Coordinate coord,
                                            IncrementalObjective& objective, const CoordinateSettings& settings) {
  if (s < 0 || s >= design.S() || j < 0 || j >= design.J()) throw std::out_of_range("optimize_coordinate: bad index");
  const int limit = coord.type == Coordinate::Type::Mixture ? spec.q() : spec.r();
  if (coord.index < 0 || coord.index >= limit) throw std::out_of_range("optimize_coordinate: bad coordinate");

  const double current = objective.value();
  const auto set_view = design.choice_set(s);
  std::vector<DesignPoint> trial(set_view.begin(), set_view.end());
  const DesignPoint original = trial[static_cast<std::size_t>(j)];
  DesignPoint& moving = trial[static_cast<std::size_t>(j)];

  double lo = -1.0;
  double hi = 1.0;
  std::function<void(double)> place;
  if (coord.type == Coordinate::Type::Mixture) {
    const int i = coord.index;
    lo = -original.x[i];
    hi = 1.0 - original.x[i];
    place = [&, i](double delta) { moving.x = cox_move(original.x, i, std::clamp(delta, lo, hi)); };
  } else {
    const int k = coord.index;
    place = [&, k](double zk) { moving.z[k] = std::clamp(zk, -1.0, 1.0); };
  }

  auto g = [&](double t) {
    place(t);
    return objective.candidate(s, trial);
  };
  const BrentResult best = brent_minimize(g, lo, hi, settings.brent_tol, settings.brent_max_iter);

  CoordinateResult out{false, current};
  if (!improves(best.value, current, settings.rel_tol)) return out;
  place(best.x);
  design.at(s, j) = moving;
  objective.commit(s, trial, best.value);
  out.accepted = true;
  out.value = best.value;
  return out;
}

/// Runs one start of coordinate exchange in place on design.
inline StartResult exchange_from(const ModelSpec& spec, Design& design, std::span<const ParameterVector> draws,
                                 CriterionKind kind, const MomentsMatrix* W, const OptimizerConfig& config,
                                 IncrementalObjective& objective) {
  StartResult result;
  result.initial_value = bayesian_criterion(spec, design, draws, kind, W).value;
  result.trace.push_back(result.initial_value);
  const CoordinateSettings settings{config.rel_tol, config.brent_tol, config.brent_max_iter};
  for (int pass = 1; pass <= config.max_passes; ++pass) {
    // fresh sums each pass so rank updates do not accumulate rounding
    objective.reset(design);
    result.passes = pass;
    bool any = false;
    for (int s = 0; s < design.S(); ++s)
      for (int j = 0; j < design.J(); ++j) {
        for (int i = 0; i < spec.q(); ++i) {
          const auto res = optimize_coordinate(spec, design, s, j, Coordinate::mixture(i), objective, settings);
          if (res.accepted) {
            any = true;
            ++result.accepted_moves;
            result.trace.push_back(res.value);
          }
        }
        for (int k = 0; k < spec.r(); ++k) {
          const auto res = optimize_coordinate(spec, design, s, j, Coordinate::process(k), objective, settings);
          if (res.accepted) {
            any = true;
            ++result.accepted_moves;
            result.trace.push_back(res.value);
          }
        }
      }
    if (!any) break;
  }
  result.final_value = bayesian_criterion(spec, design, draws, kind, W).value;
  return result;
}

using StartCallback = std::function<void(const StartResult&)>;

inline OptimizationReport coordinate_exchange(const ModelSpec& spec, int S, int J,
                                              std::span<const ParameterVector> draws, CriterionKind kind,
                                              const OptimizerConfig& config, const MomentsMatrix* W = nullptr,
                                              const StartCallback& on_start = {}) {
  config.validate();
  std::optional<MomentsMatrix> own_w;
  if (kind == CriterionKind::I && W == nullptr) {
    own_w.emplace(spec);
    W = &*own_w;
  }
  IncrementalObjective objective(spec, draws, kind, W);
  OptimizationReport report;
  for (int k = 0; k < config.n_starts; ++k) {
    const std::uint64_t seed = mix_seed(config.seed, static_cast<std::uint64_t>(k));
    Design design = random_design(spec, S, J, seed);
    StartResult res = exchange_from(spec, design, draws, kind, W, config, objective);
    res.start = k;
    res.seed = seed;
    if (on_start) on_start(res);
    if (report.best_start < 0 || res.final_value < report.best_value.value) {
      report.best_start = k;
      report.best_design = design;
      report.best_value = CriterionValue{res.final_value, kind, draws.size() > 1, static_cast<int>(draws.size())};
      report.trace = res.trace;
    }
    report.per_start.push_back(std::move(res));
  }
  if (report.best_value.singular())
    throw AllStartsSingular("every start ended with a singular information matrix; increase the number of choice sets");
  return report;
}

}  // namespace mixchoice
