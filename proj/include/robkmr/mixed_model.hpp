#pragma once

// Multi-kernel linear mixed model
//
//   y = X beta + sum_m h_m + e,   h_m ~ N(0, tau_m K_m),   e ~ N(0, sigma2 I)
//
// fit by restricted maximum likelihood with Fisher scoring. Parameters are
// ordered theta = (sigma2, tau_1, ..., tau_M); the covariance of y is
// Sigma = sigma2 I + sum_m tau_m K_m.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "robkmr/kernels.hpp"

namespace robkmr {

inline constexpr std::size_t kComponentCount = 7;

/// Ordered random-effect kernels sharing one order n.
struct ComponentSet {
  std::vector<GramMatrix> kernels;
  std::vector<std::string> labels;

  std::size_t size() const { return kernels.size(); }
  Eigen::Index order() const { return kernels.empty() ? 0 : kernels.front().order(); }
  /// All but the last kernel: the null model of the composite test.
  ComponentSet without_last() const;
  /// Sum of all kernels.
  Eigen::MatrixXd sum() const;
};

ComponentSet make_components(std::vector<GramMatrix> kernels, std::vector<std::string> labels);

/// [K1, K2, K3, K1*K2, K1*K3, K2*K3, K1*K2*K3] with * the Hadamard product.
ComponentSet assemble_components(const GramMatrix& k1, const GramMatrix& k2, const GramMatrix& k3);

struct VarianceParams {
  double sigma2 = 1.0;
  Eigen::VectorXd tau;

  Eigen::VectorXd packed() const;
  static VarianceParams unpack(const Eigen::VectorXd& theta);
};

struct RemlOptions {
  int max_iter = 100;
  /// Converged when |delta theta|_inf <= step_tol * |theta|_inf.
  double step_tol = 1e-6;
  int max_halvings = 10;
  /// tau floor as a fraction of the OLS residual variance; floored
  /// components at the end are reported as exactly zero.
  double boundary = 1e-8;
  /// Explicit starting points. Empty means the default grid.
  std::vector<VarianceParams> init_grid;
  std::vector<double> grid_fractions{0.1, 0.5, 0.9};
  int random_starts = 2;
  std::uint64_t seed = 0x2f6b9c1d4e3a5871ULL;
};

struct StartOutcome {
  VarianceParams start;
  VarianceParams end;
  double reml_loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string failure;  ///< non-empty when the start threw
};

struct MixedModelFit {
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
  Eigen::VectorXd tau;
  std::vector<Eigen::VectorXd> blups;
  std::vector<Eigen::VectorXd> alpha;  ///< dual coefficients, h_m = K_m alpha_m
  double reml_loglik = 0.0;
  bool converged = false;
  int n_iter = 0;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd score;               ///< gradient at the reported estimate
  Eigen::MatrixXd fisher_information;  ///< at the reported estimate
  std::vector<bool> at_boundary;       ///< per tau component
  std::size_t best_start = 0;
  std::vector<StartOutcome> starts;
};

/// Restricted log-likelihood up to an additive constant:
///   -1/2 [log|Sigma| + log|X' Sigma^-1 X| + y' P y].
double reml_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                   const VarianceParams& params);

/// Gradient of reml_loglik over (sigma2, tau).
Eigen::VectorXd reml_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                           const VarianceParams& params);

/// Expected information 1/2 tr(P V_a P V_b) with V_0 = I, V_m = K_m.
Eigen::MatrixXd reml_fisher_information(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                        const ComponentSet& comps, const VarianceParams& params);

std::vector<VarianceParams> default_init_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                              std::size_t components, const RemlOptions& options);

MixedModelFit reml_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps,
                       const RemlOptions& options = {});

/// h_m = tau_m K_m Sigma^-1 (y - X beta).
std::vector<Eigen::VectorXd> blup(const MixedModelFit& fit, const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                  const ComponentSet& comps);

/// Ordinary least squares residual variance RSS / (n - q). Throws on
/// rank-deficient X or n <= q.
double ols_residual_variance(const Eigen::VectorXd& y, const Eigen::MatrixXd& x);

/// Throws RankDeficient unless X has full column rank and n > q.
void require_full_rank(const Eigen::MatrixXd& x);

/// Cholesky of a symmetric positive definite matrix with diagonal jitter
/// escalation: 1e-10, 1e-9, ..., 1e-6 times the mean diagonal.
Eigen::LLT<Eigen::MatrixXd> jittered_cholesky(const Eigen::MatrixXd& m);

/// P = S^-1 - S^-1 X (X' S^-1 X)^-1 X' S^-1 for covariance S.
Eigen::MatrixXd reml_projection(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& x);

}  // namespace robkmr
