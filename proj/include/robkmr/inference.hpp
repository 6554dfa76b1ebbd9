#pragma once

// Variance-component score tests with Satterthwaite p-values.
//
// Both statistics are quadratic forms in y. Matching the null mean and
// variance to a scaled chi-square gamma * chi2_nu gives
//   gamma = Var / (2 E),   nu = 2 E^2 / Var.

#include <Eigen/Dense>

#include "robkmr/mixed_model.hpp"

namespace robkmr {

enum class TestKind { Overall, Composite };

std::string to_string(TestKind kind);
TestKind parse_test_kind(const std::string& name);

struct TestResult {
  TestKind kind = TestKind::Overall;
  double statistic = 0.0;
  double gamma = 0.0;
  double nu = 0.0;
  double p_value = 1.0;
  double mean = 0.0;      ///< E[S] under the null
  double variance = 0.0;  ///< Var[S] under the null
  /// Null moments vanished (kernel lies in the span of X); p = 1 and
  /// gamma = nu = 0.
  bool degenerate = false;
};

struct Satterthwaite {
  double gamma = 0.0;
  double nu = 0.0;
};

Satterthwaite satterthwaite(double mean, double variance);

/// P(gamma * chi2_nu >= s).
double scaled_chisq_pvalue(double s, double gamma, double nu);

struct OverallOptions {
  /// Use Var[S] = tr(P0 K P0 K) / 2, which treats s0 as known. The default
  /// is the exact variance of S given that s0 is estimated,
  /// (d tr(A^2) - tr(A)^2) / (2 (d + 2)) with A = P0 K and d = n - q.
  bool plugin_variance = false;
};

/// S = (y - X b)' K (y - X b) / (2 s0) with K the sum of the components,
/// b and s0 = RSS / (n - q) from the covariate-only model.
TestResult overall_score_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                              const OverallOptions& options = {});
TestResult overall_score_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::MatrixXd& kernel,
                              const OverallOptions& options = {});

struct CompositeOptions {
  /// Divide S and its moments by the null residual variance as well. The
  /// p-value is unchanged; only the statistic's scale differs.
  bool legacy_prefactor = false;
};

/// S = 1/2 y' B K B y for the highest-order kernel K, with B the ReML
/// projection of the null fit (all lower-order components).
TestResult composite_score_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                                const MixedModelFit& null_fit, const CompositeOptions& options = {});

}  // namespace robkmr
