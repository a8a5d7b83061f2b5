#pragma once

#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mixchoice.hpp"

namespace testing_helpers {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

inline mixchoice::DesignPoint pt(std::initializer_list<double> x, std::initializer_list<double> z = {}) {
  return {vec(x), vec(z)};
}

// Monomial prod x_k^n_k prod z_l^m_l, independent of model_expand.
inline double monomial(const mixchoice::Term& t, const mixchoice::DesignPoint& p) {
  double v = 1.0;
  for (std::size_t k = 0; k < t.mixture.size(); ++k)
    for (int e = 0; e < t.mixture[k]; ++e) v *= p.x[static_cast<Eigen::Index>(k)];
  for (std::size_t l = 0; l < t.process.size(); ++l)
    for (int e = 0; e < t.process[l]; ++e) v *= p.z[static_cast<Eigen::Index>(l)];
  return v;
}

// Centered-form information: sum_s sum_j p_j (f_j - fbar)(f_j - fbar)^T.
inline Eigen::MatrixXd centered_information(const mixchoice::ModelSpec& spec, const Eigen::VectorXd& theta,
                                            const mixchoice::Design& d) {
  const int m = spec.m();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  for (int s = 0; s < d.S(); ++s) {
    std::vector<Eigen::VectorXd> f;
    std::vector<double> u;
    for (int j = 0; j < d.J(); ++j) {
      f.push_back(mixchoice::model_expand(spec, d.at(s, j)));
      u.push_back(f.back().dot(theta));
    }
    double denom = 0.0;
    for (double v : u) denom += std::exp(v);
    Eigen::VectorXd fbar = Eigen::VectorXd::Zero(m);
    std::vector<double> p;
    for (int j = 0; j < d.J(); ++j) {
      p.push_back(std::exp(u[static_cast<std::size_t>(j)]) / denom);
      fbar += p.back() * f[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < d.J(); ++j) {
      const Eigen::VectorXd c = f[static_cast<std::size_t>(j)] - fbar;
      out += p[static_cast<std::size_t>(j)] * c * c.transpose();
    }
  }
  return out;
}

inline Eigen::VectorXd cocktail_mean() { return vec({7.562, 0.907, 5.109, 14.573, 17.1806, 19.2705, 19.2705, 19.2705, 0}); }

}  // namespace testing_helpers
