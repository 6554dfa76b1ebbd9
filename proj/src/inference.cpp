#include "robkmr/inference.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "robkmr/error.hpp"

namespace robkmr {

namespace {

TestResult finish(TestKind kind, double statistic, double mean, double variance) {
  TestResult r;
  r.kind = kind;
  r.statistic = statistic;
  r.mean = mean;
  r.variance = variance;
  const auto fit = satterthwaite(mean, variance);
  r.gamma = fit.gamma;
  r.nu = fit.nu;
  r.p_value = scaled_chisq_pvalue(statistic, fit.gamma, fit.nu);
  return r;
}

TestResult degenerate_result(TestKind kind, double statistic) {
  TestResult r;
  r.kind = kind;
  r.statistic = statistic;
  r.degenerate = true;
  r.p_value = 1.0;
  return r;
}

}  // namespace

std::string to_string(TestKind kind) { return kind == TestKind::Overall ? "overall" : "composite"; }

TestKind parse_test_kind(const std::string& name) {
  if (name == "overall") return TestKind::Overall;
  if (name == "composite") return TestKind::Composite;
  throw Error(ErrorCode::Parse, "unknown test kind '" + name + "' (expected overall|composite)");
}

Satterthwaite satterthwaite(double mean, double variance) {
  if (!(mean > 0.0) || !(variance > 0.0) || !std::isfinite(mean) || !std::isfinite(variance)) {
    throw Error(ErrorCode::InvalidArgument, "Satterthwaite moments must be positive and finite");
  }
  return Satterthwaite{variance / (2.0 * mean), 2.0 * mean * mean / variance};
}

double scaled_chisq_pvalue(double s, double gamma, double nu) {
  if (!(gamma > 0.0) || !(nu > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "scaled chi-square needs gamma > 0 and nu > 0");
  }
  if (!(s > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * nu, 0.5 * s / gamma);
}

TestResult overall_score_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                              const OverallOptions& options) {
  return overall_score_test(y, x, comps.sum(), options);
}

TestResult overall_score_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::MatrixXd& kernel,
                              const OverallOptions& options) {
  const Eigen::Index n = y.size();
  if (x.rows() != n || kernel.rows() != n || kernel.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "overall test: dimension mismatch");
  }
  require_full_rank(x);
  if (kernel.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::DegenerateTest, "overall test: kernel sum is zero");
  }

  // P0 = I - Q Q' with Q an orthonormal basis of span(X).
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, x.cols());
  const Eigen::VectorXd resid = y - q * (q.transpose() * y);
  const double dof = static_cast<double>(n - x.cols());
  const double sigma2 = resid.squaredNorm() / dof;
  if (!(sigma2 > 1e-14 * std::max(y.squaredNorm() / static_cast<double>(n), 1e-300))) {
    throw Error(ErrorCode::PerfectFit, "overall test: covariates fit y exactly");
  }

  const double statistic = resid.dot(kernel * resid) / (2.0 * sigma2);
  const Eigen::MatrixXd p0k = kernel - q * (q.transpose() * kernel);
  const double mean = 0.5 * p0k.trace();
  const double tr_a2 = trace_of_product(p0k, p0k);
  const double variance = options.plugin_variance
                              ? 0.5 * tr_a2
                              : (dof * tr_a2 - 4.0 * mean * mean) / (2.0 * (dof + 2.0));
  const double scale = kernel.diagonal().cwiseAbs().sum() + kernel.cwiseAbs().maxCoeff();
  if (!(mean > 1e-12 * scale) || !(variance > 1e-12 * scale * scale)) {
    return degenerate_result(TestKind::Overall, std::max(statistic, 0.0));
  }
  return finish(TestKind::Overall, statistic, mean, variance);
}

TestResult composite_score_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                                const MixedModelFit& null_fit, const CompositeOptions& options) {
  if (!null_fit.converged) throw Error(ErrorCode::NotConverged, "composite test: null fit did not converge");
  if (comps.size() < 1 || null_fit.tau.size() + 1 != static_cast<Eigen::Index>(comps.size())) {
    throw Error(ErrorCode::InvalidArgument, "composite test: null fit must omit exactly the last component");
  }
  const Eigen::Index n = y.size();
  if (x.rows() != n || comps.order() != n || null_fit.sigma.rows() != n) {
    throw Error(ErrorCode::InvalidArgument, "composite test: dimension mismatch");
  }

  const Eigen::MatrixXd b = reml_projection(null_fit.sigma, x);
  const Eigen::MatrixXd& k = comps.kernels.back().values();
  const Eigen::VectorXd by = b * y;
  double statistic = 0.5 * by.dot(k * by);
  // With B Sigma B = B the moments 1/2 tr(B K B Sigma) and
  // 1/2 tr((B K B Sigma)^2) reduce to 1/2 tr(BK) and 1/2 tr(BKBK).
  const Eigen::MatrixXd bk = b * k;
  double mean = 0.5 * bk.trace();
  double variance = 0.5 * trace_of_product(bk, bk);

  const double scale = k.diagonal().cwiseAbs().sum() * b.diagonal().cwiseAbs().maxCoeff();
  const bool degenerate = !(mean > 1e-12 * scale) || !(variance > 0.0);
  if (options.legacy_prefactor) {
    const double s2 = null_fit.sigma2;
    statistic /= s2;
    mean /= s2;
    variance /= s2 * s2;
  }
  if (degenerate) return degenerate_result(TestKind::Composite, std::max(statistic, 0.0));
  return finish(TestKind::Composite, statistic, mean, variance);
}

}  // namespace robkmr
