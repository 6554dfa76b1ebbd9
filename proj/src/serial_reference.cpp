#include "robkmr/serial_reference.hpp"

#include <cmath>

#include "robkmr/error.hpp"

namespace robkmr::serial {

Eigen::MatrixXd pairwise_sq_distances(const Eigen::MatrixXd& rows) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index p = rows.cols();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index s = 0; s < p; ++s) {
        const double diff = rows(i, s) - rows(j, s);
        acc += diff * diff;
      }
      d(i, j) = acc;
      d(j, i) = acc;
    }
  }
  return d;
}

GramMatrix gaussian_gram(const DataView& view, double bandwidth) {
  if (!(bandwidth > 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian bandwidth must be positive");
  Eigen::MatrixXd k = pairwise_sq_distances(view.values);
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) k(i, j) = i == j ? 1.0 : std::exp(scale * k(i, j));
  }
  return GramMatrix(std::move(k));
}

GramMatrix ibs_gram(const DataView& view) {
  view.validate();
  const Eigen::Index n = view.samples();
  const Eigen::Index p = view.features();
  const double norm = 1.0 / (2.0 * static_cast<double>(p));
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double shared = 0.0;
      for (Eigen::Index s = 0; s < p; ++s) shared += 2.0 - std::abs(view.values(i, s) - view.values(j, s));
      k(i, j) = shared * norm;
      k(j, i) = k(i, j);
    }
  }
  return GramMatrix(std::move(k));
}

GramMatrix hadamard(const GramMatrix& a, const GramMatrix& b) {
  if (a.order() != b.order()) throw Error(ErrorCode::InvalidArgument, "order mismatch");
  return GramMatrix(a.values().cwiseProduct(b.values()));
}

GramMatrix robust_center(const GramMatrix& k, const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd& kv = k.values();
  const Eigen::Index n = kv.rows();
  const Eigen::VectorXd kw = kv * weights;
  const double wkw = weights.dot(kw);
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      out(i, j) = kv(i, j) - kw(i) - kw(j) + wkw;
      out(j, i) = out(i, j);
    }
  }
  return GramMatrix(std::move(out));
}

double trace_of_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) acc += a(i, j) * b(j, i);
    total += acc;
  }
  return total;
}

}  // namespace robkmr::serial
