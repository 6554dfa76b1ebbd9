#pragma once

// Independent reference computations for the tests. Each one follows the
// textbook definition directly (double loops, dense inverses, quadrature)
// and shares no code with the library.

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline std::vector<double> pairwise_distances(const Eigen::MatrixXd& rows) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < rows.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < rows.cols(); ++k) s += (rows(i, k) - rows(j, k)) * (rows(i, k) - rows(j, k));
      out.push_back(std::sqrt(s));
    }
  }
  return out;
}

/// Lower median via a full sort.
inline double lower_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

/// Empirical quantile as the ceil(q n)-th order statistic.
inline double order_statistic_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  k = std::clamp<std::size_t>(k, 1, v.size());
  return v[k - 1];
}

inline Eigen::MatrixXd gaussian(const Eigen::MatrixXd& x, double bw) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index f = 0; f < x.cols(); ++f) s += std::pow(x(i, f) - x(j, f), 2);
      k(i, j) = std::exp(-s / (2.0 * bw * bw));
    }
  }
  return k;
}

inline Eigen::MatrixXd ibs(const Eigen::MatrixXd& g) {
  const Eigen::Index n = g.rows();
  const double p = static_cast<double>(g.cols());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index f = 0; f < g.cols(); ++f) s += 2.0 - std::abs(g(i, f) - g(j, f));
      k(i, j) = s / (2.0 * p);
    }
  }
  return k;
}

/// ||Phi(x_i) - sum_a w_a Phi(x_a)||^2 expanded term by term.
inline double rkhs_sq_distance(const Eigen::MatrixXd& k, const Eigen::VectorXd& w, Eigen::Index i) {
  double cross = 0.0;
  double mean_norm = 0.0;
  for (Eigen::Index a = 0; a < k.rows(); ++a) {
    cross += w(a) * k(i, a);
    for (Eigen::Index b = 0; b < k.rows(); ++b) mean_norm += w(a) * w(b) * k(a, b);
  }
  return k(i, i) - 2.0 * cross + mean_norm;
}

/// (I - 1 w') K (I - 1 w')' by explicit matrix products.
inline Eigen::MatrixXd weighted_center(const Eigen::MatrixXd& k, const Eigen::VectorXd& w) {
  const Eigen::Index n = k.rows();
  const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n, n) - Eigen::VectorXd::Ones(n) * w.transpose();
  return c * k * c.transpose();
}

/// Restricted log-likelihood from dense inverses and LU determinants.
inline double reml_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::vector<Eigen::MatrixXd>& ks,
                          double sigma2, const Eigen::VectorXd& tau) {
  const Eigen::Index n = y.size();
  Eigen::MatrixXd sigma = sigma2 * Eigen::MatrixXd::Identity(n, n);
  for (std::size_t m = 0; m < ks.size(); ++m) sigma += tau(static_cast<Eigen::Index>(m)) * ks[m];
  const Eigen::MatrixXd si = sigma.inverse();
  const Eigen::MatrixXd xtsx = x.transpose() * si * x;
  const Eigen::MatrixXd p = si - si * x * xtsx.inverse() * x.transpose() * si;
  const double logdet_sigma = std::log(sigma.determinant());
  const double logdet_x = std::log(xtsx.determinant());
  return -0.5 * (logdet_sigma + logdet_x + y.dot(p * y));
}

/// Central difference of f along coordinate k of theta.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd theta,
                                 Eigen::Index k, double h) {
  const double base = theta(k);
  theta(k) = base + h;
  const double up = f(theta);
  theta(k) = base - h;
  const double down = f(theta);
  return (up - down) / (2.0 * h);
}

/// P(gamma * chi2_nu > s) by integrating the chi-square density over
/// (s/gamma, inf) in 50-digit arithmetic. The density is factored as
/// f(x) * exp(log f(x + u) - log f(x)) so deep tails keep full relative
/// precision.
inline double scaled_chisq_tail(double s, double gamma, double nu) {
  using big = boost::multiprecision::cpp_bin_float_50;
  const big x = big(s) / big(gamma);
  const big k = big(nu) / 2;
  const big log_norm = -k * log(big(2)) - boost::math::lgamma(k);
  const big log_fx = log_norm + (k - 1) * log(x) - x / 2;
  const auto ratio = [&](big u) -> big {
    return exp((k - 1) * log1p(u / x) - u / 2);
  };
  boost::math::quadrature::exp_sinh<big> integrator;
  const big integral = integrator.integrate(ratio, big(1e-40));
  return static_cast<double>(exp(log_fx) * integral);
}

/// Kolmogorov-Smirnov distance of a sample from Uniform(0, 1).
inline double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max({d, std::abs(p[i] - static_cast<double>(i) / n), std::abs(p[i] - static_cast<double>(i + 1) / n)});
  }
  return d;
}

}  // namespace oracle
