#pragma once

// Synthetic three-view data and the power / ROC experiments.
//
// Generative model, per replicate (fully determined by seed and rep index):
//   view 1: genotypes, feature j ~ Binomial(2, maf_j), maf_j ~ U(0.1, 0.4)
//   views 2, 3: independent N(0, 1) features
//   X = [1, age ~ U(40, 90), weight ~ N(70, 10^2)]
//   s_v = centered sum of the first two features of view v
//   y = X b0 + a1 z(s1) + a2 [z(s1 s2) + z(s2 s3)] + a3 z(s1 s2 s3) + e,  e ~ N(0, 1)
// where z() standardizes to zero mean and unit empirical variance, so the
// alphas are effect sizes. Contamination replaces ceil(f n) randomly chosen
// responses with magnitude * Cauchy draws, optionally together with the
// samples' continuous features.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "robkmr/inference.hpp"
#include "robkmr/kernels.hpp"
#include "robkmr/loss.hpp"
#include "robkmr/mixed_model.hpp"
#include "robkmr/pipeline.hpp"
#include "robkmr/robust_center.hpp"

namespace robkmr {

/// What contamination corrupts in the chosen samples: the response, the
/// continuous-view features (views 2 and 3), or both.
enum class ContaminationTarget { Response, Features, Both };

std::string to_string(ContaminationTarget target);
ContaminationTarget parse_contamination_target(const std::string& name);

struct Contamination {
  double fraction = 0.0;
  double magnitude = 10.0;
  ContaminationTarget target = ContaminationTarget::Response;
};

struct SimConfig {
  int n = 300;
  std::array<double, 3> alphas{0.0, 0.0, 0.0};
  std::array<int, 3> features{5, 5, 5};
  int reps = 200;
  std::uint64_t seed = 1;
  double alpha_level = 0.05;
  RobustLoss loss = RobustLoss::tuned(LossKind::Hampel);
  Contamination contamination;
  TestKind test = TestKind::Composite;
  KirwlsOptions kirwls;
  RemlOptions reml;
  OverallOptions overall;
  CompositeOptions composite;

  void validate() const;
};

struct SimDataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::array<DataView, 3> views;
  std::vector<Eigen::Index> contaminated;
};

/// Counter-based stream seed: a SplitMix64 mix of (seed, stream).
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t stream);

SimDataset simulate_dataset(const SimConfig& config, std::uint64_t rep_index);

/// Kernels used by the simulator: IBS for view 1, median-bandwidth Gaussian
/// for views 2 and 3.
std::array<ViewKernelSpec, 3> simulation_kernels();

struct ReplicateOutcome {
  bool ok = false;
  double statistic = 0.0;
  /// statistic / E[statistic] under the null; free of the scale of y.
  double standardized = 0.0;
  double p_value = 1.0;
  std::string failure;
};

/// Full pipeline on one dataset: kernels, robust centering, components, test.
ReplicateOutcome run_replicate(const SimConfig& config, const SimDataset& data, TestKind kind);

struct PowerRow {
  std::array<double, 3> alphas{};
  double rejection_rate = 0.0;
  int reps = 0;  ///< replicates that produced a p-value
  double standard_error = 0.0;
  int excluded = 0;
  double mean_statistic = 0.0;
  double mean_standardized = 0.0;
};

/// Rejection rate of config.test at config.alpha_level over config.reps
/// replicates. Throws if more than 5% of replicates fail.
PowerRow estimate_power(const SimConfig& config);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  int null_reps = 0;
  int alt_reps = 0;
};

/// Sweeps thresholds 0, step, 2 step, ..., 1. A replicate is called positive
/// at threshold t when p < t; at t = 1 every replicate is positive.
RocCurve roc_from_pvalues(const std::vector<double>& null_p, const std::vector<double>& alt_p, double step = 1e-4);

/// Trapezoidal area under the (fpr, tpr) points.
double roc_auc(const std::vector<RocPoint>& points);

/// Null replicates use alphas (0, 0, 0); alternatives fix a1 = 1 and draw a
/// shared a2 = a3 that is 0 with probability 1/2 and U(0, 1) otherwise.
/// Both sets have config.reps replicates and use config.test.
RocCurve roc_curve(const SimConfig& config, double step = 1e-4);

}  // namespace robkmr
