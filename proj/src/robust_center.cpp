#include "robkmr/robust_center.hpp"

#include <cmath>
#include <span>

#include "robkmr/error.hpp"

namespace robkmr {

namespace {

void require_simplex(const Eigen::VectorXd& w, Eigen::Index n) {
  if (w.size() != n) throw Error(ErrorCode::InvalidArgument, "weight vector length differs from Gram order");
  if ((w.array() < 0.0).any() || !w.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
  }
  if (std::abs(w.sum() - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "weights must sum to one");
}

Eigen::VectorXd normalized_weights(const Eigen::VectorXd& eps, const RobustLoss& loss) {
  Eigen::VectorXd w(eps.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) w(i) = weight(loss, eps(i));
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorCode::DegenerateWeights, "every sample received zero weight");
  }
  return w / total;
}

double mean_loss(const Eigen::VectorXd& eps, const RobustLoss& loss) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < eps.size(); ++i) acc += rho(loss, eps(i));
  return acc / static_cast<double>(eps.size());
}

RobustLoss retuned(const RobustLoss& loss, const Eigen::VectorXd& eps) {
  return tune_constants(loss, std::span<const double>(eps.data(), static_cast<std::size_t>(eps.size())));
}

}  // namespace

Eigen::VectorXd rkhs_distances(const GramMatrix& k, const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd& kv = k.values();
  const Eigen::VectorXd kw = kv * weights;
  const double wkw = weights.dot(kw);
  Eigen::VectorXd eps(kv.rows());
  for (Eigen::Index i = 0; i < kv.rows(); ++i) {
    const double sq = kv(i, i) - 2.0 * kw(i) + wkw;
    eps(i) = sq > 0.0 ? std::sqrt(sq) : 0.0;
  }
  return eps;
}

double kirwls_objective(const GramMatrix& k, const RobustLoss& loss, const Eigen::VectorXd& weights) {
  require_simplex(weights, k.order());
  return mean_loss(rkhs_distances(k, weights), loss);
}

GramMatrix robust_center(const GramMatrix& k, const Eigen::VectorXd& weights) {
  require_simplex(weights, k.order());
  const Eigen::MatrixXd& kv = k.values();
  const Eigen::Index n = kv.rows();
  const Eigen::VectorXd kw = kv * weights;
  const double wkw = weights.dot(kw);
  // (C K C')_ij = K_ij - (Kw)_i - (Kw)_j + w'Kw
  Eigen::MatrixXd out(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = kv(i, j) - kw(i) - kw(j) + wkw;
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return GramMatrix(std::move(out));
}

RobustCentering kirwls_weights(const GramMatrix& k, const RobustLoss& loss, const KirwlsOptions& options) {
  loss.validate();
  const Eigen::Index n = k.order();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "empty Gram matrix");
  if (options.max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be positive");

  const bool tuning = loss.policy == TuningPolicy::Quantile;
  RobustCentering out;
  out.threshold = options.threshold;
  out.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

  Eigen::VectorXd eps = rkhs_distances(k, out.weights);
  out.loss = tuning ? retuned(loss, eps) : loss;
  int retunes_left = tuning ? options.retune_count : 0;

  double objective = mean_loss(eps, out.loss);
  out.objective_trace.push_back(objective);
  if (objective == 0.0 && retunes_left == 0) {
    out.converged = true;
  }

  while (!out.converged && out.iterations < options.max_iter) {
    out.weights = normalized_weights(eps, out.loss);
    eps = rkhs_distances(k, out.weights);
    ++out.iterations;

    if (retunes_left > 0) {
      // The objective changes with the constants; restart the trace.
      out.loss = retuned(out.loss, eps);
      --retunes_left;
      objective = mean_loss(eps, out.loss);
      out.objective_trace.assign(1, objective);
      if (objective == 0.0 && retunes_left == 0) out.converged = true;
      continue;
    }

    const double next = mean_loss(eps, out.loss);
    out.objective_trace.push_back(next);
    if (objective == 0.0 || std::abs(next - objective) / objective < options.threshold) {
      out.converged = true;
    }
    objective = next;
  }

  out.centered = robust_center(k, out.weights);
  return out;
}

}  // namespace robkmr
