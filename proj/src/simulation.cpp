#include "robkmr/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "robkmr/error.hpp"

namespace robkmr {

namespace {

constexpr std::uint64_t kAltStreamOffset = 1ULL << 40;
constexpr std::uint64_t kAlphaDrawTag = 0xa1fa5eedc0ffee11ULL;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::VectorXd standardized(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const Eigen::VectorXd centered = v.array() - mean;
  const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(v.size()));
  if (!(sd > 0.0)) return Eigen::VectorXd::Zero(v.size());
  return centered / sd;
}

Eigen::VectorXd view_score(const DataView& view) {
  Eigen::VectorXd s = view.values.col(0);
  if (view.features() > 1) s += view.values.col(1);
  return s.array() - s.mean();
}

std::vector<std::string> labels(const std::string& prefix, int p) {
  std::vector<std::string> out;
  for (int j = 0; j < p; ++j) out.push_back(prefix + std::to_string(j + 1));
  return out;
}

}  // namespace

std::string to_string(ContaminationTarget target) {
  switch (target) {
    case ContaminationTarget::Response: return "response";
    case ContaminationTarget::Features: return "features";
    case ContaminationTarget::Both: return "both";
  }
  return "response";
}

ContaminationTarget parse_contamination_target(const std::string& name) {
  if (name == "response") return ContaminationTarget::Response;
  if (name == "features") return ContaminationTarget::Features;
  if (name == "both") return ContaminationTarget::Both;
  throw Error(ErrorCode::Parse, "unknown contamination target '" + name + "' (expected response|features|both)");
}

void SimConfig::validate() const {
  if (n < 10) throw Error(ErrorCode::InvalidArgument, "simulation needs n >= 10");
  if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be at least 1");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha_level must lie in (0, 1)");
  }
  if (!(contamination.fraction >= 0.0 && contamination.fraction < 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "contamination fraction must lie in [0, 0.5)");
  }
  for (int p : features) {
    if (p < 1) throw Error(ErrorCode::InvalidArgument, "each view needs at least one feature");
  }
  loss.validate();
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

SimDataset simulate_dataset(const SimConfig& config, std::uint64_t rep_index) {
  config.validate();
  std::mt19937_64 rng(replicate_seed(config.seed, rep_index));
  const int n = config.n;
  SimDataset data;

  // View 1: genotypes.
  {
    const int p = config.features[0];
    DataView view;
    view.kind = ViewKind::Genotype;
    view.feature_ids = labels("snp", p);
    view.values.resize(n, p);
    std::uniform_real_distribution<double> maf_dist(0.1, 0.4);
    for (int j = 0; j < p; ++j) {
      std::binomial_distribution<int> allele(2, maf_dist(rng));
      for (int i = 0; i < n; ++i) view.values(i, j) = allele(rng);
    }
    data.views[0] = std::move(view);
  }
  // Views 2 and 3: standard normal features.
  for (std::size_t v = 1; v < 3; ++v) {
    const int p = config.features[v];
    DataView view;
    view.kind = ViewKind::Continuous;
    view.feature_ids = labels(v == 1 ? "cpg" : "expr", p);
    view.values.resize(n, p);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int j = 0; j < p; ++j) {
      for (int i = 0; i < n; ++i) view.values(i, j) = normal(rng);
    }
    data.views[v] = std::move(view);
  }

  data.x.resize(n, 3);
  {
    std::uniform_real_distribution<double> age(40.0, 90.0);
    std::normal_distribution<double> weight(70.0, 10.0);
    for (int i = 0; i < n; ++i) {
      data.x(i, 0) = 1.0;
      data.x(i, 1) = age(rng);
      data.x(i, 2) = weight(rng);
    }
  }

  const Eigen::VectorXd s1 = view_score(data.views[0]);
  const Eigen::VectorXd s2 = view_score(data.views[1]);
  const Eigen::VectorXd s3 = view_score(data.views[2]);
  const auto [a1, a2, a3] = config.alphas;
  const Eigen::Vector3d beta0(1.0, 0.01, 0.01);

  data.y = data.x * beta0;
  if (a1 != 0.0) data.y += a1 * standardized(s1);
  if (a2 != 0.0) {
    data.y += a2 * (standardized(s1.cwiseProduct(s2)) + standardized(s2.cwiseProduct(s3)));
  }
  if (a3 != 0.0) data.y += a3 * standardized(s1.cwiseProduct(s2).cwiseProduct(s3));
  {
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < n; ++i) data.y(i) += noise(rng);
  }

  if (config.contamination.fraction > 0.0) {
    const auto count = static_cast<int>(std::ceil(config.contamination.fraction * n));
    const ContaminationTarget target = config.contamination.target;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::cauchy_distribution<double> heavy(0.0, 1.0);
    for (int k = 0; k < count; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(pick(rng))]);
      const Eigen::Index i = order[static_cast<std::size_t>(k)];
      if (target != ContaminationTarget::Features) data.y(i) = config.contamination.magnitude * heavy(rng);
      data.contaminated.push_back(i);
    }
    if (target != ContaminationTarget::Response) {
      for (int k = 0; k < count; ++k) {
        const Eigen::Index i = order[static_cast<std::size_t>(k)];
        for (std::size_t v = 1; v < 3; ++v) {
          for (Eigen::Index j = 0; j < data.views[v].features(); ++j) {
            data.views[v].values(i, j) = config.contamination.magnitude * heavy(rng);
          }
        }
      }
    }
    std::sort(data.contaminated.begin(), data.contaminated.end());
  }
  return data;
}

std::array<ViewKernelSpec, 3> simulation_kernels() {
  return {ViewKernelSpec{KernelKind::Ibs, 0.0}, ViewKernelSpec{KernelKind::Gaussian, 0.0},
          ViewKernelSpec{KernelKind::Gaussian, 0.0}};
}

ReplicateOutcome run_replicate(const SimConfig& config, const SimDataset& data, TestKind kind) {
  ReplicateOutcome out;
  try {
    const auto centered = centered_components({&data.views[0], &data.views[1], &data.views[2]},
                                              simulation_kernels(), config.loss, config.kirwls);
    TestResult result;
    if (kind == TestKind::Overall) {
      result = overall_score_test(data.y, data.x, centered.components, config.overall);
    } else {
      const ComponentSet null_set = centered.components.without_last();
      const MixedModelFit null_fit = reml_fit(data.y, data.x, null_set, config.reml);
      result = composite_score_test(data.y, data.x, centered.components, null_fit, config.composite);
    }
    out.ok = true;
    out.statistic = result.statistic;
    out.standardized = result.degenerate ? 0.0 : result.statistic / result.mean;
    out.p_value = result.p_value;
  } catch (const Error& e) {
    out.failure = std::string(to_string(e.code())) + ": " + e.what();
  }
  return out;
}

PowerRow estimate_power(const SimConfig& config) {
  config.validate();
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(config.reps));
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < config.reps; ++r) {
    const SimDataset data = simulate_dataset(config, static_cast<std::uint64_t>(r));
    outcomes[static_cast<std::size_t>(r)] = run_replicate(config, data, config.test);
  }

  PowerRow row;
  row.alphas = config.alphas;
  int rejected = 0;
  double stat_sum = 0.0;
  double standardized_sum = 0.0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++row.excluded;
      continue;
    }
    ++row.reps;
    stat_sum += o.statistic;
    standardized_sum += o.standardized;
    if (o.p_value <= config.alpha_level) ++rejected;
  }
  if (row.excluded > 0.05 * config.reps || row.reps == 0) {
    throw Error(ErrorCode::Numerical, std::to_string(row.excluded) + " of " + std::to_string(config.reps) +
                                          " replicates failed (limit 5%)");
  }
  row.rejection_rate = static_cast<double>(rejected) / row.reps;
  row.standard_error = std::sqrt(row.rejection_rate * (1.0 - row.rejection_rate) / row.reps);
  row.mean_statistic = stat_sum / row.reps;
  row.mean_standardized = standardized_sum / row.reps;
  return row;
}

RocCurve roc_from_pvalues(const std::vector<double>& null_p, const std::vector<double>& alt_p, double step) {
  if (null_p.empty() || alt_p.empty()) throw Error(ErrorCode::InvalidArgument, "ROC needs null and alternative p-values");
  if (!(step > 0.0 && step <= 1.0)) throw Error(ErrorCode::InvalidArgument, "ROC step must lie in (0, 1]");
  std::vector<double> np = null_p;
  std::vector<double> ap = alt_p;
  std::sort(np.begin(), np.end());
  std::sort(ap.begin(), ap.end());
  const auto below = [](const std::vector<double>& sorted, double t) {
    return static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin()) /
           static_cast<double>(sorted.size());
  };

  RocCurve curve;
  curve.null_reps = static_cast<int>(np.size());
  curve.alt_reps = static_cast<int>(ap.size());
  const auto steps = static_cast<long>(std::llround(1.0 / step));
  for (long k = 0; k <= steps; ++k) {
    const double t = k == steps ? 1.0 : static_cast<double>(k) * step;
    RocPoint pt{t, below(np, t), below(ap, t)};
    if (k == steps) pt.fpr = pt.tpr = 1.0;
    curve.points.push_back(pt);
  }
  curve.auc = roc_auc(curve.points);
  return curve;
}

double roc_auc(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * 0.5 * (points[i].tpr + points[i - 1].tpr);
  }
  return area;
}

RocCurve roc_curve(const SimConfig& config, double step) {
  config.validate();
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<ReplicateOutcome> null_out(reps);
  std::vector<ReplicateOutcome> alt_out(reps);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t r = 0; r < 2 * reps; ++r) {
    const bool alternative = r >= reps;
    const std::size_t i = alternative ? r - reps : r;
    SimConfig cfg = config;
    if (!alternative) {
      cfg.alphas = {0.0, 0.0, 0.0};
      null_out[i] = run_replicate(cfg, simulate_dataset(cfg, i), cfg.test);
    } else {
      std::mt19937_64 rng(replicate_seed(config.seed ^ kAlphaDrawTag, i));
      std::bernoulli_distribution nonzero(0.5);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double a = nonzero(rng) ? unit(rng) : 0.0;
      cfg.alphas = {1.0, a, a};
      alt_out[i] = run_replicate(cfg, simulate_dataset(cfg, kAltStreamOffset + i), cfg.test);
    }
  }

  std::vector<double> null_p;
  std::vector<double> alt_p;
  std::size_t failures = 0;
  for (const auto& o : null_out) o.ok ? null_p.push_back(o.p_value) : void(++failures);
  for (const auto& o : alt_out) o.ok ? alt_p.push_back(o.p_value) : void(++failures);
  if (static_cast<double>(failures) > 0.05 * 2.0 * static_cast<double>(reps)) {
    throw Error(ErrorCode::Numerical, std::to_string(failures) + " ROC replicates failed (limit 5%)");
  }
  return roc_from_pvalues(null_p, alt_p, step);
}

}  // namespace robkmr
