#include "robkmr/mixed_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "robkmr/error.hpp"

namespace robkmr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_inputs(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps) {
  if (y.size() != x.rows()) throw Error(ErrorCode::InvalidArgument, "y and X have different row counts");
  if (comps.size() > 0 && comps.order() != y.size()) {
    throw Error(ErrorCode::InvalidArgument, "kernel order differs from sample count");
  }
  if (!y.allFinite() || !x.allFinite()) throw Error(ErrorCode::InvalidArgument, "y or X has non-finite values");
}

Eigen::MatrixXd covariance(const ComponentSet& comps, const VarianceParams& params) {
  const Eigen::Index n = comps.order();
  Eigen::MatrixXd sigma = params.sigma2 * Eigen::MatrixXd::Identity(n, n);
  for (std::size_t m = 0; m < comps.size(); ++m) {
    const double tau = params.tau(static_cast<Eigen::Index>(m));
    if (tau != 0.0) sigma.noalias() += tau * comps.kernels[m].values();
  }
  return sigma;
}

// Everything the likelihood and its derivatives need at one parameter value.
struct RemlState {
  Eigen::MatrixXd p;
  Eigen::VectorXd py;
  Eigen::VectorXd beta;
  double loglik = 0.0;
};

// Cheap likelihood: one Cholesky plus O(n^2 q) triangular solves.
double loglik_only(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma) {
  const auto llt = jittered_cholesky(sigma);
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::VectorXd a = llt.matrixL().solve(y);
  const Eigen::MatrixXd b = llt.matrixL().solve(x);
  const Eigen::MatrixXd xtsx = b.transpose() * b;
  const Eigen::LLT<Eigen::MatrixXd> small(xtsx);
  if (small.info() != Eigen::Success) throw Error(ErrorCode::Numerical, "X' Sigma^-1 X is not positive definite");
  const Eigen::VectorXd bta = b.transpose() * a;
  const double ypy = a.squaredNorm() - bta.dot(small.solve(bta));
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
  double logdet_small = 0.0;
  const Eigen::MatrixXd ls = small.matrixL();
  for (Eigen::Index i = 0; i < ls.rows(); ++i) logdet_small += 2.0 * std::log(ls(i, i));
  const double value = -0.5 * (logdet + logdet_small + ypy);
  if (!std::isfinite(value)) throw Error(ErrorCode::Numerical, "non-finite restricted likelihood");
  return value;
}

RemlState full_state(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma) {
  const auto llt = jittered_cholesky(sigma);
  const Eigen::Index n = sigma.rows();
  const Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd sinv_x = sigma_inv * x;
  const Eigen::MatrixXd xtsx = x.transpose() * sinv_x;
  const Eigen::LLT<Eigen::MatrixXd> small(xtsx);
  if (small.info() != Eigen::Success) throw Error(ErrorCode::Numerical, "X' Sigma^-1 X is not positive definite");

  RemlState s;
  s.p = sigma_inv - sinv_x * small.solve(sinv_x.transpose());
  s.p = 0.5 * (s.p + s.p.transpose()).eval();
  s.py = s.p * y;
  s.beta = small.solve(sinv_x.transpose() * y);

  const Eigen::MatrixXd l = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(l(i, i));
  const Eigen::MatrixXd ls = small.matrixL();
  double logdet_small = 0.0;
  for (Eigen::Index i = 0; i < ls.rows(); ++i) logdet_small += 2.0 * std::log(ls(i, i));
  s.loglik = -0.5 * (logdet + logdet_small + y.dot(s.py));
  if (!std::isfinite(s.loglik)) throw Error(ErrorCode::Numerical, "non-finite restricted likelihood");
  return s;
}

struct Derivatives {
  Eigen::VectorXd score;
  Eigen::MatrixXd info;      ///< expected information
  Eigen::MatrixXd observed;  ///< negative Hessian
};

Derivatives derivatives(const RemlState& s, const ComponentSet& comps) {
  const std::size_t m = comps.size();
  const auto dim = static_cast<Eigen::Index>(m + 1);
  std::vector<Eigen::MatrixXd> pv(m + 1);
  pv[0] = s.p;
  for (std::size_t k = 0; k < m; ++k) pv[k + 1].noalias() = s.p * comps.kernels[k].values();

  Derivatives d;
  d.score.resize(dim);
  d.info.resize(dim, dim);
  d.score(0) = -0.5 * (s.p.trace() - s.py.squaredNorm());
  for (std::size_t k = 0; k < m; ++k) {
    const Eigen::MatrixXd& kv = comps.kernels[k].values();
    d.score(static_cast<Eigen::Index>(k + 1)) = -0.5 * (pv[k + 1].trace() - s.py.dot(kv * s.py));
  }
  // y'P V_a P V_b P y = (V_a P y)' P (V_b P y)
  Eigen::MatrixXd vpy(s.py.size(), dim);
  vpy.col(0) = s.py;
  for (std::size_t k = 0; k < m; ++k) vpy.col(static_cast<Eigen::Index>(k + 1)) = comps.kernels[k].values() * s.py;
  const Eigen::MatrixXd quad = vpy.transpose() * (s.p * vpy);
  d.observed.resize(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = a; b < dim; ++b) {
      const double v = 0.5 * trace_of_product(pv[static_cast<std::size_t>(a)], pv[static_cast<std::size_t>(b)]);
      d.info(a, b) = v;
      d.info(b, a) = v;
      const double o = 0.5 * (quad(a, b) + quad(b, a)) - v;
      d.observed(a, b) = o;
      d.observed(b, a) = o;
    }
  }
  return d;
}

// Pseudo-inverse solve; Fisher information is singular when kernels are
// confounded with each other or with the identity.
Eigen::VectorXd solve_psd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(lambda.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * b;
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(proj.size());
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    if (lambda(i) > cutoff) scaled(i) = proj(i) / lambda(i);
  }
  return eig.eigenvectors() * scaled;
}

double safe_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                   const Eigen::VectorXd& theta) {
  try {
    return loglik_only(y, x, covariance(comps, VarianceParams::unpack(theta)));
  } catch (const Error&) {
    return kNegInf;
  }
}

Eigen::VectorXd zero_floored(Eigen::VectorXd theta, double floor) {
  for (Eigen::Index i = 1; i < theta.size(); ++i) {
    if (theta(i) <= floor * (1.0 + 1e-9)) theta(i) = 0.0;
  }
  return theta;
}

StartOutcome run_start(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                       const VarianceParams& start, double floor, const RemlOptions& options) {
  StartOutcome out;
  out.start = start;
  Eigen::VectorXd theta = start.packed().cwiseMax(floor);
  double loglik = loglik_only(y, x, covariance(comps, VarianceParams::unpack(theta)));

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    out.iterations = iter;
    const RemlState state = full_state(y, x, covariance(comps, VarianceParams::unpack(theta)));
    const Derivatives d = derivatives(state, comps);

    // Active set: parameters sitting on the floor and pushing outward stay put.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const bool on_floor = theta(i) <= floor * (1.0 + 1e-9);
      if (!on_floor || d.score(i) > 0.0) free.push_back(i);
    }
    if (free.empty()) {
      out.converged = true;
      break;
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd info_ff(nf, nf);
    Eigen::MatrixXd observed_ff(nf, nf);
    Eigen::VectorXd score_f(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto fa = free[static_cast<std::size_t>(a)];
      score_f(a) = d.score(fa);
      for (Eigen::Index b = 0; b < nf; ++b) {
        const auto fb = free[static_cast<std::size_t>(b)];
        info_ff(a, b) = d.info(fa, fb);
        observed_ff(a, b) = d.observed(fa, fb);
      }
    }
    // Newton step where the likelihood is locally concave, scoring otherwise.
    const Eigen::LLT<Eigen::MatrixXd> newton(observed_ff);
    const Eigen::VectorXd step_f =
        newton.info() == Eigen::Success ? Eigen::VectorXd(newton.solve(score_f)) : solve_psd(info_ff, score_f);
    Eigen::VectorXd step = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index a = 0; a < nf; ++a) step(free[static_cast<std::size_t>(a)]) = step_f(a);

    double scale = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    double candidate_loglik = kNegInf;
    for (int h = 0; h <= options.max_halvings; ++h) {
      candidate = (theta + scale * step).cwiseMax(floor);
      candidate_loglik = safe_loglik(y, x, comps, candidate);
      if (candidate_loglik >= loglik - 1e-12 * (1.0 + std::abs(loglik))) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) {
      // No ascent direction left at working precision.
      out.converged = true;
      break;
    }
    // Judge convergence on the full step so a heavily halved one cannot stop the fit.
    const double change = ((theta + step).cwiseMax(floor) - theta).cwiseAbs().maxCoeff();
    theta = candidate;
    loglik = candidate_loglik;
    if (change <= options.step_tol * theta.cwiseAbs().maxCoeff()) {
      out.converged = true;
      break;
    }
  }

  const Eigen::VectorXd reported = zero_floored(theta, floor);
  out.end = VarianceParams::unpack(reported);
  out.reml_loglik = loglik_only(y, x, covariance(comps, out.end));
  return out;
}

}  // namespace

ComponentSet ComponentSet::without_last() const {
  if (kernels.empty()) throw Error(ErrorCode::InvalidArgument, "empty component set");
  ComponentSet out;
  out.kernels.assign(kernels.begin(), kernels.end() - 1);
  out.labels.assign(labels.begin(), labels.end() - 1);
  return out;
}

Eigen::MatrixXd ComponentSet::sum() const {
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(order(), order());
  for (const auto& k : kernels) total += k.values();
  return total;
}

ComponentSet make_components(std::vector<GramMatrix> kernels, std::vector<std::string> labels) {
  if (kernels.empty()) throw Error(ErrorCode::InvalidArgument, "component set needs at least one kernel");
  if (labels.size() != kernels.size()) {
    labels.clear();
    for (std::size_t i = 0; i < kernels.size(); ++i) labels.push_back("K" + std::to_string(i + 1));
  }
  for (const auto& k : kernels) {
    if (k.order() != kernels.front().order()) {
      throw Error(ErrorCode::InvalidArgument, "component kernels differ in order");
    }
  }
  return ComponentSet{std::move(kernels), std::move(labels)};
}

ComponentSet assemble_components(const GramMatrix& k1, const GramMatrix& k2, const GramMatrix& k3) {
  if (k1.order() != k2.order() || k1.order() != k3.order()) {
    throw Error(ErrorCode::InvalidArgument, "view kernels differ in order");
  }
  GramMatrix k12 = hadamard(k1, k2);
  GramMatrix k13 = hadamard(k1, k3);
  GramMatrix k23 = hadamard(k2, k3);
  GramMatrix k123 = hadamard(k12, k3);
  return ComponentSet{{k1, k2, k3, std::move(k12), std::move(k13), std::move(k23), std::move(k123)},
                      {"1", "2", "3", "1x2", "1x3", "2x3", "1x2x3"}};
}

Eigen::VectorXd VarianceParams::packed() const {
  Eigen::VectorXd theta(tau.size() + 1);
  theta(0) = sigma2;
  theta.tail(tau.size()) = tau;
  return theta;
}

VarianceParams VarianceParams::unpack(const Eigen::VectorXd& theta) {
  return VarianceParams{theta(0), theta.tail(theta.size() - 1)};
}

void require_full_rank(const Eigen::MatrixXd& x) {
  if (x.rows() <= x.cols()) throw Error(ErrorCode::RankDeficient, "need more samples than covariates");
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) throw Error(ErrorCode::RankDeficient, "covariate matrix is rank deficient");
}

double ols_residual_variance(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
  require_full_rank(x);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::VectorXd resid = y - x * qr.solve(y);
  return resid.squaredNorm() / static_cast<double>(x.rows() - x.cols());
}

Eigen::LLT<Eigen::MatrixXd> jittered_cholesky(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  const double mean_diag = std::max(m.diagonal().mean(), std::numeric_limits<double>::min());
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0000001; jitter *= 10.0) {
    Eigen::MatrixXd shifted = m;
    shifted.diagonal().array() += jitter * mean_diag;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw Error(ErrorCode::Numerical, "covariance matrix is not positive definite after jitter");
}

Eigen::MatrixXd reml_projection(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& x) {
  const auto llt = jittered_cholesky(sigma);
  const Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
  const Eigen::MatrixXd sinv_x = sigma_inv * x;
  const Eigen::LLT<Eigen::MatrixXd> small(x.transpose() * sinv_x);
  if (small.info() != Eigen::Success) throw Error(ErrorCode::Numerical, "X' Sigma^-1 X is not positive definite");
  Eigen::MatrixXd p = sigma_inv - sinv_x * small.solve(sinv_x.transpose());
  return 0.5 * (p + p.transpose());
}

double reml_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                   const VarianceParams& params) {
  check_inputs(y, x, comps);
  if (!(params.sigma2 > 0.0) || (params.tau.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "variance parameters must be nonnegative with sigma2 > 0");
  }
  return loglik_only(y, x, covariance(comps, params));
}

Eigen::VectorXd reml_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                           const VarianceParams& params) {
  check_inputs(y, x, comps);
  return derivatives(full_state(y, x, covariance(comps, params)), comps).score;
}

Eigen::MatrixXd reml_fisher_information(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                        const ComponentSet& comps, const VarianceParams& params) {
  check_inputs(y, x, comps);
  return derivatives(full_state(y, x, covariance(comps, params)), comps).info;
}

std::vector<VarianceParams> default_init_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                              std::size_t components, const RemlOptions& options) {
  const double s0 = ols_residual_variance(y, x);
  const auto m = static_cast<Eigen::Index>(components);
  std::vector<VarianceParams> grid;
  for (double f : options.grid_fractions) {
    grid.push_back(VarianceParams{s0, Eigen::VectorXd::Constant(m, f * s0)});
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < options.random_starts; ++r) {
    VarianceParams p;
    p.sigma2 = s0 * std::max(unit(rng), 1e-3);
    p.tau.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) p.tau(i) = s0 * unit(rng);
    grid.push_back(std::move(p));
  }
  return grid;
}

MixedModelFit reml_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                       const RemlOptions& options) {
  check_inputs(y, x, comps);
  require_full_rank(x);
  const double s0 = ols_residual_variance(y, x);
  if (!(s0 > 1e-14 * std::max(y.squaredNorm() / static_cast<double>(y.size()), 1e-300))) {
    throw Error(ErrorCode::PerfectFit, "covariates fit y exactly");
  }
  const double floor = options.boundary * s0;

  std::vector<VarianceParams> grid =
      options.init_grid.empty() ? default_init_grid(y, x, comps.size(), options) : options.init_grid;
  for (const auto& p : grid) {
    if (p.tau.size() != static_cast<Eigen::Index>(comps.size())) {
      throw Error(ErrorCode::InvalidArgument, "starting point has the wrong number of components");
    }
  }

  std::vector<StartOutcome> outcomes(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      outcomes[i] = run_start(y, x, comps, grid[i], floor, options);
    } catch (const Error& e) {
      outcomes[i].start = grid[i];
      outcomes[i].failure = e.what();
      outcomes[i].reml_loglik = kNegInf;
    }
  }

  // Highest likelihood among converged starts; ties go to the earlier start.
  std::size_t best = outcomes.size();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].converged || !outcomes[i].failure.empty()) continue;
    if (best == outcomes.size() || outcomes[i].reml_loglik > outcomes[best].reml_loglik) best = i;
  }
  if (best == outcomes.size()) {
    throw Error(ErrorCode::NotConverged, "no ReML start converged");
  }

  const StartOutcome& win = outcomes[best];
  MixedModelFit fit;
  fit.sigma2 = win.end.sigma2;
  fit.tau = win.end.tau;
  fit.converged = true;
  fit.n_iter = win.iterations;
  fit.best_start = best;
  fit.sigma = covariance(comps, win.end);
  const RemlState state = full_state(y, x, fit.sigma);
  fit.beta = state.beta;
  fit.reml_loglik = win.reml_loglik;
  const Derivatives d = derivatives(state, comps);
  fit.score = d.score;
  fit.fisher_information = d.info;
  for (Eigen::Index m = 0; m < fit.tau.size(); ++m) fit.at_boundary.push_back(fit.tau(m) == 0.0);
  for (std::size_t m = 0; m < comps.size(); ++m) {
    const double tau = fit.tau(static_cast<Eigen::Index>(m));
    fit.alpha.push_back(tau * state.py);
    fit.blups.push_back(tau * (comps.kernels[m].values() * state.py));
  }
  fit.starts = std::move(outcomes);
  return fit;
}

std::vector<Eigen::VectorXd> blup(const MixedModelFit& fit, const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                  const ComponentSet& comps) {
  check_inputs(y, x, comps);
  const auto llt = jittered_cholesky(fit.sigma);
  const Eigen::VectorXd weighted = llt.solve(y - x * fit.beta);
  std::vector<Eigen::VectorXd> out;
  for (std::size_t m = 0; m < comps.size(); ++m) {
    out.push_back(fit.tau(static_cast<Eigen::Index>(m)) * (comps.kernels[m].values() * weighted));
  }
  return out;
}

}  // namespace robkmr
