#pragma once

// Multinomial-logit choice probabilities, the design information matrix and
// pointwise prediction variance.

#include <cmath>
#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mixchoice/design_model.hpp"
#include "mixchoice/errors.hpp"

namespace mixchoice {

using ParameterVector = Eigen::VectorXd;
using InfoMatrix = Eigen::MatrixXd;

/// Reciprocal-condition floor below which an information matrix is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

/// Reciprocal condition estimate from a Cholesky factor: (min L_ii / max L_ii)^2.
template <class Derived>
double cholesky_rcond(const Eigen::MatrixBase<Derived>& L) {
  const auto d = L.diagonal().cwiseAbs();
  const double hi = d.maxCoeff();
  if (!(hi > 0.0)) return 0.0;
  const double ratio = d.minCoeff() / hi;
  return ratio * ratio;
}

/// Cholesky factorization that also rejects numerically singular input.
/// Returns false on failure; llt is left in an unspecified state.
inline bool factorize_spd(const Eigen::MatrixXd& a, Eigen::LLT<Eigen::MatrixXd>& llt) {
  if (a.rows() == 0) return false;
  llt.compute(a);
  if (llt.info() != Eigen::Success) return false;
  const double rc = cholesky_rcond(llt.matrixLLT());
  return std::isfinite(rc) && rc >= kSingularRcond;
}

/// Model matrix of one choice set: J rows f(a_j)^T.
inline Eigen::MatrixXd set_model_matrix(const ModelSpec& spec, std::span<const DesignPoint> set) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(set.size()), spec.m());
  Eigen::VectorXd f(spec.m());
  for (std::size_t j = 0; j < set.size(); ++j) {
    if (set[j].x.size() != spec.q() || set[j].z.size() != spec.r())
      throw std::invalid_argument("choice set point dimensions do not match model");
    model_expand_into(spec, set[j].x, set[j].z, f);
    X.row(static_cast<Eigen::Index>(j)) = f.transpose();
  }
  return X;
}

/// Softmax of utilities, shifted by their maximum.
inline void softmax_into(const Eigen::Ref<const Eigen::VectorXd>& utilities, Eigen::Ref<Eigen::VectorXd> p) {
  const double top = utilities.maxCoeff();
  p = (utilities.array() - top).exp();
  p /= p.sum();
}

inline Eigen::VectorXd choice_probabilities(const ModelSpec& spec, const ParameterVector& theta,
                                            std::span<const DesignPoint> set) {
  if (theta.size() != spec.m()) throw std::invalid_argument("parameter vector length does not equal m");
  const Eigen::MatrixXd X = set_model_matrix(spec, set);
  Eigen::VectorXd p(X.rows());
  softmax_into(X * theta, p);
  return p;
}

/// Accumulates X^T (P - p p^T) X for one choice set into out.
/// `probs` and `mean_row` are caller-provided scratch space.
inline void accumulate_set_information(const Eigen::Ref<const Eigen::MatrixXd>& X, const ParameterVector& theta,
                                       Eigen::Ref<Eigen::MatrixXd> out, Eigen::VectorXd& probs,
                                       Eigen::VectorXd& mean_row) {
  probs.resize(X.rows());
  probs.noalias() = X * theta;
  const double top = probs.maxCoeff();
  probs = (probs.array() - top).exp();
  probs /= probs.sum();
  mean_row.noalias() = X.transpose() * probs;
  for (Eigen::Index j = 0; j < X.rows(); ++j) out.noalias() += probs[j] * X.row(j).transpose() * X.row(j);
  out.noalias() -= mean_row * mean_row.transpose();
}

inline InfoMatrix information_matrix(const ModelSpec& spec, const ParameterVector& theta, const Design& design) {
  if (theta.size() != spec.m()) throw std::invalid_argument("parameter vector length does not equal m");
  InfoMatrix info = InfoMatrix::Zero(spec.m(), spec.m());
  Eigen::VectorXd probs, mean_row;
  for (int s = 0; s < design.S(); ++s) {
    const Eigen::MatrixXd X = set_model_matrix(spec, design.choice_set(s));
    accumulate_set_information(X, theta, info, probs, mean_row);
  }
  // exact symmetry; the two products round differently across the diagonal
  info = 0.5 * (info + info.transpose()).eval();
  return info;
}

/// f(p)^T I^{-1} f(p), solved through a Cholesky factorization.
inline double prediction_variance(const ModelSpec& spec, const InfoMatrix& info, const DesignPoint& p) {
  if (info.rows() != spec.m() || info.cols() != spec.m())
    throw std::invalid_argument("information matrix dimension does not equal m");
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factorize_spd(info, llt)) throw SingularInformation("information matrix is singular");
  const Eigen::VectorXd f = model_expand(spec, p);
  const Eigen::VectorXd half = llt.matrixL().solve(f);
  return half.squaredNorm();
}

}  // namespace mixchoice
