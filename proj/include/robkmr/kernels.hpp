#pragma once

// Gram-matrix construction per data view.
//
// The pairwise kernels are OpenMP-parallel over row blocks. Each entry is
// computed independently on the upper triangle and mirrored, so results are
// bit-identical for every thread count and match robkmr::serial exactly.

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace robkmr {

enum class ViewKind { Genotype, Continuous };

enum class KernelKind { Gaussian, Ibs, Linear };

KernelKind parse_kernel_kind(const std::string& name);
std::string to_string(KernelKind kind);
ViewKind parse_view_kind(const std::string& name);
std::string to_string(ViewKind kind);

/// One omics view: n samples (rows) by p features (columns).
struct DataView {
  Eigen::MatrixXd values;
  ViewKind kind = ViewKind::Continuous;
  std::vector<std::string> feature_ids;

  Eigen::Index samples() const { return values.rows(); }
  Eigen::Index features() const { return values.cols(); }

  /// Checks n >= 3, finite entries, genotype coding and label count.
  void validate() const;
};

/// Symmetric n x n kernel matrix.
class GramMatrix {
 public:
  GramMatrix() = default;
  /// Throws if `values` is not square, not finite or not symmetric to 1e-10
  /// (relative to its largest entry).
  explicit GramMatrix(Eigen::MatrixXd values);

  static GramMatrix identity(Eigen::Index n);
  static GramMatrix ones(Eigen::Index n);

  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::Index order() const { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

 private:
  Eigen::MatrixXd values_;
};

/// Squared Euclidean distances between sample rows.
Eigen::MatrixXd pairwise_sq_distances(const Eigen::MatrixXd& rows);

/// Lower median of the n(n-1)/2 pairwise Euclidean distances.
double median_bandwidth(const DataView& view);

/// exp(-|x_i - x_j|^2 / (2 bandwidth^2)).
GramMatrix gaussian_gram(const DataView& view, double bandwidth);

/// Identity-by-state: (1 / 2p) sum_s (2 - |g_is - g_js|).
GramMatrix ibs_gram(const DataView& view);

GramMatrix linear_gram(const DataView& view);

/// Kernel for a view by kind; Gaussian uses the median heuristic when
/// bandwidth <= 0.
GramMatrix build_gram(const DataView& view, KernelKind kind, double bandwidth = 0.0);

GramMatrix hadamard(const GramMatrix& a, const GramMatrix& b);

/// H K H with H = I - 11'/n, formed by explicit matrix products.
GramMatrix classical_center(const GramMatrix& k);

/// Largest |K_ij - K_ji|.
double asymmetry(const Eigen::MatrixXd& m);

/// tr(A B) for square A, B of equal order, without forming A B.
double trace_of_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace robkmr
