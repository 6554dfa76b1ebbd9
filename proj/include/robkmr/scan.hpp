#pragma once

// Gene-triplet scan over three omics views.
//
// Input layout:
//   view TSV     header "feature_id<TAB>sample...", one feature per row
//   gene map     header "feature_id<TAB>gene"
//   phenotype    header "sample_id<TAB>name", one sample per row
//   covariates   header "sample_id<TAB>cov...", optional
// Samples are intersected across all files and sorted. Each gene's features
// in a view form the data for that view's kernel.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "robkmr/config.hpp"
#include "robkmr/kernels.hpp"

namespace robkmr {

inline constexpr const char* kVersion = "0.1.0";

struct BundlePaths {
  std::array<std::string, 3> views;
  std::array<std::string, 3> gene_maps;
  std::string phenotype;
  std::string covariates;  ///< may be empty
};

struct OmicsBundle {
  std::vector<std::string> sample_ids;
  std::array<DataView, 3> views;
  /// feature_id -> gene, restricted to features present in the view.
  std::array<std::map<std::string, std::string>, 3> gene_maps;
  std::string phenotype_name = "y";
  Eigen::VectorXd y;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  ///< samples x covariates, may have no columns
  std::vector<std::string> log;  ///< dropped features and samples
};

OmicsBundle load_bundle(const BundlePaths& paths, const std::array<ViewKind, 3>& kinds, NaPolicy na_policy);

/// Writes the bundle in the layout load_bundle reads. Covariates are written
/// only when paths.covariates is non-empty.
void save_bundle(const OmicsBundle& bundle, const BundlePaths& paths);

struct GeneBlock {
  std::string gene;
  std::vector<Eigen::Index> columns;
};

/// Genes of one view in sorted order with their feature columns.
std::vector<GeneBlock> gene_blocks(const OmicsBundle& bundle, std::size_t view);

/// Design matrix: optional intercept followed by the covariates.
Eigen::MatrixXd design_matrix(const OmicsBundle& bundle, bool intercept);

struct ScanRecord {
  std::uint64_t index = 0;
  std::array<std::string, 3> genes;
  std::string status = "ok";
  std::string message;
  double sigma2 = 0.0;
  std::array<double, kComponentCount> tau{};
  double overall_stat = 0.0;
  double overall_p = 0.0;
  double composite_stat = 0.0;
  double composite_p = 0.0;
  double reml_loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  std::array<int, 3> kirwls_iterations{};
  std::array<bool, 3> kirwls_converged{};

  bool ok() const { return status == "ok"; }
};

struct ScanPlan {
  std::array<std::vector<GeneBlock>, 3> blocks;
  Eigen::MatrixXd x;

  std::uint64_t size() const;
  std::array<std::size_t, 3> unravel(std::uint64_t index) const;
};

ScanPlan plan_scan(const OmicsBundle& bundle, const RunConfig& cfg);

/// One triplet. Errors are captured in the record, never thrown.
ScanRecord scan_triplet(const OmicsBundle& bundle, const ScanPlan& plan, std::uint64_t index, const RunConfig& cfg);

/// All triplets, in index order (lexicographic gene order).
std::vector<ScanRecord> triplet_scan(const OmicsBundle& bundle, const RunConfig& cfg);

std::string scan_header();
std::string format_record(const ScanRecord& r);
ScanRecord parse_record(std::string_view line);

inline constexpr std::array<double, 6> kThresholdLadder{0.05, 0.01, 0.001, 1e-4, 1e-5, 1e-6};

/// -log10(p) for the manhattan table, using the p-value as printed.
double manhattan_value(double p);

struct ScanOutputs {
  std::string scan_tsv;
  std::string manhattan_tsv;
  nlohmann::json manifest;
};

/// Formats the three output files. `context` is merged into the manifest.
ScanOutputs format_outputs(const std::vector<ScanRecord>& records, const nlohmann::json& context);

/// Writes scan.tsv, manhattan.tsv and manifest.json into out_dir.
nlohmann::json write_outputs(const std::vector<ScanRecord>& records, const std::string& out_dir,
                             const nlohmann::json& context = nlohmann::json::object());

struct ScanRunOptions {
  std::string out_dir;
  bool resume = false;
  /// Identity of the run (config hash, input hashes); a resumed run must match.
  nlohmann::json context = nlohmann::json::object();
  std::function<void(std::uint64_t done, std::uint64_t total)> progress;
};

/// Full scan with checkpoints to out_dir/scan.partial.tsv every
/// cfg.checkpoint_every triplets, then the final outputs.
std::vector<ScanRecord> run_scan(const OmicsBundle& bundle, const RunConfig& cfg, const ScanRunOptions& options);

}  // namespace robkmr
