#pragma once

// Robust kernel mean element by kernelized IRWLS (KIRWLS) and the Gram matrix
// centered on it.
//
// Given weights w on the simplex, the robust mean is f = sum_a w_a Phi(X_a)
// and the RKHS distance of sample i to it is
//   eps_i = sqrt(K_ii - 2 (K w)_i + w'K w).
// Each iteration sets w_i proportional to weight(eps_i), which majorizes the
// objective J(w) = (1/n) sum_i rho(eps_i), so J never increases.

#include <Eigen/Dense>
#include <vector>

#include "robkmr/kernels.hpp"
#include "robkmr/loss.hpp"

namespace robkmr {

struct KirwlsOptions {
  double threshold = 1e-8;  ///< relative change in J that stops the loop
  int max_iter = 200;
  /// Extra re-tunings of quantile-policy constants after the initial tuning,
  /// one per iteration starting with the first. Constants are frozen after.
  int retune_count = 1;
};

struct RobustCentering {
  Eigen::VectorXd weights;
  GramMatrix centered;
  int iterations = 0;
  /// J after constants are frozen, one entry per iteration.
  std::vector<double> objective_trace;
  bool converged = false;
  double threshold = 0.0;
  /// The loss with the constants actually used.
  RobustLoss loss;
};

/// eps_i for every sample, radicand clamped at zero.
Eigen::VectorXd rkhs_distances(const GramMatrix& k, const Eigen::VectorXd& weights);

double kirwls_objective(const GramMatrix& k, const RobustLoss& loss, const Eigen::VectorXd& weights);

/// (I - 1w') K (I - 1w')'. The w-weighted mean of the centered features is 0.
GramMatrix robust_center(const GramMatrix& k, const Eigen::VectorXd& weights);

/// Runs KIRWLS from uniform weights. Non-convergence is reported through
/// `converged`; an all-zero weight vector throws DegenerateWeights.
RobustCentering kirwls_weights(const GramMatrix& k, const RobustLoss& loss,
                               const KirwlsOptions& options = {});

}  // namespace robkmr
