#include "robkmr/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "robkmr/error.hpp"

namespace robkmr {

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "gaussian") return KernelKind::Gaussian;
  if (name == "ibs") return KernelKind::Ibs;
  if (name == "linear") return KernelKind::Linear;
  throw Error(ErrorCode::Parse, "unknown kernel '" + name + "' (expected gaussian|ibs|linear)");
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Gaussian: return "gaussian";
    case KernelKind::Ibs: return "ibs";
    case KernelKind::Linear: return "linear";
  }
  return "unknown";
}

ViewKind parse_view_kind(const std::string& name) {
  if (name == "genotype") return ViewKind::Genotype;
  if (name == "continuous") return ViewKind::Continuous;
  throw Error(ErrorCode::Parse, "unknown view kind '" + name + "' (expected genotype|continuous)");
}

std::string to_string(ViewKind kind) {
  return kind == ViewKind::Genotype ? "genotype" : "continuous";
}

void DataView::validate() const {
  if (samples() < 3) throw Error(ErrorCode::InvalidArgument, "a view needs at least 3 samples");
  if (features() < 1) throw Error(ErrorCode::InvalidArgument, "a view needs at least 1 feature");
  if (!feature_ids.empty() && static_cast<Eigen::Index>(feature_ids.size()) != features()) {
    throw Error(ErrorCode::InvalidArgument, "feature label count does not match view width");
  }
  if (!values.allFinite()) throw Error(ErrorCode::InvalidArgument, "view contains non-finite values");
  if (kind == ViewKind::Genotype) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      for (Eigen::Index i = 0; i < values.rows(); ++i) {
        const double g = values(i, j);
        if (g != 0.0 && g != 1.0 && g != 2.0) {
          throw Error(ErrorCode::Domain, "genotype value " + std::to_string(g) +
                                             " outside {0,1,2}");
        }
      }
    }
  }
}

GramMatrix::GramMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) {
    throw Error(ErrorCode::InvalidArgument, "Gram matrix must be square");
  }
  if (!values_.allFinite()) throw Error(ErrorCode::InvalidArgument, "Gram matrix has non-finite entries");
  const double scale = std::max(1.0, values_.cwiseAbs().maxCoeff());
  if (values_.size() > 0 && asymmetry(values_) > 1e-10 * scale) {
    throw Error(ErrorCode::InvalidArgument, "Gram matrix is not symmetric");
  }
}

GramMatrix GramMatrix::identity(Eigen::Index n) {
  return GramMatrix(Eigen::MatrixXd::Identity(n, n));
}

GramMatrix GramMatrix::ones(Eigen::Index n) {
  return GramMatrix(Eigen::MatrixXd::Ones(n, n));
}

double asymmetry(const Eigen::MatrixXd& m) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
  }
  return worst;
}

Eigen::MatrixXd pairwise_sq_distances(const Eigen::MatrixXd& rows) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index p = rows.cols();
  // Row-major copy keeps each sample contiguous in the inner loop.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x = rows;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* xi = x.data() + i * p;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* xj = x.data() + j * p;
      double acc = 0.0;
      for (Eigen::Index s = 0; s < p; ++s) {
        const double diff = xi[s] - xj[s];
        acc += diff * diff;
      }
      d(i, j) = acc;
      d(j, i) = acc;
    }
  }
  return d;
}

double median_bandwidth(const DataView& view) {
  const Eigen::Index n = view.samples();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "median bandwidth needs two samples");
  const Eigen::MatrixXd d2 = pairwise_sq_distances(view.values);
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 1; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) dist.push_back(std::sqrt(d2(i, j)));
  }
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>((dist.size() - 1) / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (!(*mid > 0.0)) {
    throw Error(ErrorCode::DegenerateScale, "median pairwise distance is zero");
  }
  return *mid;
}

GramMatrix gaussian_gram(const DataView& view, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorCode::InvalidArgument, "gaussian bandwidth must be positive");
  }
  Eigen::MatrixXd k = pairwise_sq_distances(view.values);
  const Eigen::Index n = k.rows();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) k(i, j) = i == j ? 1.0 : std::exp(scale * k(i, j));
  }
  return GramMatrix(std::move(k));
}

GramMatrix ibs_gram(const DataView& view) {
  if (view.kind != ViewKind::Genotype) {
    throw Error(ErrorCode::InvalidArgument, "IBS kernel requires a genotype view");
  }
  view.validate();
  const Eigen::Index n = view.samples();
  const Eigen::Index p = view.features();
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> g = view.values;
  const double norm = 1.0 / (2.0 * static_cast<double>(p));
  Eigen::MatrixXd k(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* gi = g.data() + i * p;
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* gj = g.data() + j * p;
      double shared = 0.0;
      for (Eigen::Index s = 0; s < p; ++s) shared += 2.0 - std::abs(gi[s] - gj[s]);
      k(i, j) = shared * norm;
      k(j, i) = k(i, j);
    }
  }
  return GramMatrix(std::move(k));
}

GramMatrix linear_gram(const DataView& view) {
  Eigen::MatrixXd k = view.values * view.values.transpose();
  k = 0.5 * (k + k.transpose()).eval();
  return GramMatrix(std::move(k));
}

GramMatrix build_gram(const DataView& view, KernelKind kind, double bandwidth) {
  switch (kind) {
    case KernelKind::Gaussian:
      return gaussian_gram(view, bandwidth > 0.0 ? bandwidth : median_bandwidth(view));
    case KernelKind::Ibs:
      return ibs_gram(view);
    case KernelKind::Linear:
      return linear_gram(view);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown kernel kind");
}

GramMatrix hadamard(const GramMatrix& a, const GramMatrix& b) {
  if (a.order() != b.order()) {
    throw Error(ErrorCode::InvalidArgument, "hadamard product of matrices with different order");
  }
  const Eigen::Index n = a.order();
  Eigen::MatrixXd out(n, n);
  const Eigen::MatrixXd& av = a.values();
  const Eigen::MatrixXd& bv = b.values();
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = av(i, j) * bv(i, j);
  }
  return GramMatrix(std::move(out));
}

GramMatrix classical_center(const GramMatrix& k) {
  const Eigen::Index n = k.order();
  const Eigen::MatrixXd h =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd out = h * k.values() * h;
  out = 0.5 * (out + out.transpose()).eval();
  return GramMatrix(std::move(out));
}

double trace_of_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  // tr(AB) = sum_ij A_ij B_ji. Per-column partials summed in index order keep
  // the result independent of the thread count.
  const Eigen::Index n = a.rows();
  std::vector<double> partial(static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += a(i, j) * b(j, i);
    partial[static_cast<std::size_t>(j)] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace robkmr
