#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "robkmr/kernels.hpp"
#include "robkmr/scan.hpp"
#include "robkmr/tsv.hpp"

namespace fixture {

inline Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = z(rng);
  }
  return m;
}

/// A A' / p for a random n x p matrix A.
inline robkmr::GramMatrix random_psd(Eigen::Index n, std::mt19937_64& rng, Eigen::Index p = 0) {
  if (p == 0) p = n;
  const Eigen::MatrixXd a = normal_matrix(n, p, rng);
  Eigen::MatrixXd k = a * a.transpose() / static_cast<double>(p);
  k = 0.5 * (k + k.transpose()).eval();
  return robkmr::GramMatrix(k);
}

inline robkmr::DataView continuous_view(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  robkmr::DataView v;
  v.kind = robkmr::ViewKind::Continuous;
  v.values = normal_matrix(n, p, rng);
  for (Eigen::Index j = 0; j < p; ++j) v.feature_ids.push_back("f" + std::to_string(j));
  return v;
}

inline robkmr::DataView genotype_view(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  robkmr::DataView v;
  v.kind = robkmr::ViewKind::Genotype;
  v.values.resize(n, p);
  std::uniform_real_distribution<double> maf(0.1, 0.5);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::binomial_distribution<int> g(2, maf(rng));
    for (Eigen::Index i = 0; i < n; ++i) v.values(i, j) = g(rng);
    v.feature_ids.push_back("snp" + std::to_string(j));
  }
  return v;
}

inline robkmr::GramMatrix gaussian_kernel(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  const auto v = continuous_view(n, p, rng);
  return robkmr::gaussian_gram(v, robkmr::median_bandwidth(v));
}

/// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("robkmr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

struct ToyOptions {
  std::array<int, 3> genes{5, 4, 3};
  int samples = 40;
  int features_per_gene = 2;
  std::uint64_t seed = 7;
  bool shuffle_samples = false;  ///< write sample columns in a permuted order
  std::uint64_t shuffle_seed = 99;
};

/// Writes a synthetic three-view bundle and returns its paths.
inline robkmr::BundlePaths write_toy_bundle(const std::string& dir, const ToyOptions& opt = {}) {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(opt.seed);
  const int n = opt.samples;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%03d", i + 1);
    ids.emplace_back(buf);
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  if (opt.shuffle_samples) {
    std::mt19937_64 srng(opt.shuffle_seed);
    std::shuffle(order.begin(), order.end(), srng);
  }

  robkmr::BundlePaths paths;
  const char* prefixes[3] = {"snp", "cpg", "expr"};
  std::array<Eigen::MatrixXd, 3> data;
  for (std::size_t v = 0; v < 3; ++v) {
    const int p = opt.genes[v] * opt.features_per_gene;
    const auto view = v == 0 ? genotype_view(n, p, rng) : continuous_view(n, p, rng);
    data[v] = view.values;
    std::string tsv = "feature_id";
    for (int i : order) tsv += "\t" + ids[static_cast<std::size_t>(i)];
    tsv += "\n";
    std::string map = "feature_id\tgene\n";
    for (int j = 0; j < p; ++j) {
      const std::string fid = std::string(prefixes[v]) + std::to_string(j + 1);
      tsv += fid;
      for (int i : order) tsv += "\t" + robkmr::format_roundtrip(view.values(i, j));
      tsv += "\n";
      map += fid + "\tG" + std::to_string(v + 1) + "_" + std::to_string(j / opt.features_per_gene + 1) + "\n";
    }
    paths.views[v] = (fs::path(dir) / ("view" + std::to_string(v + 1) + ".tsv")).string();
    paths.gene_maps[v] = (fs::path(dir) / ("view" + std::to_string(v + 1) + ".map")).string();
    robkmr::write_text_atomic(paths.views[v], tsv);
    robkmr::write_text_atomic(paths.gene_maps[v], map);
  }

  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> age(40.0, 90.0);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd cov(n, 2);
  for (int i = 0; i < n; ++i) {
    cov(i, 0) = age(rng);
    cov(i, 1) = z(rng);
    y(i) = 0.02 * cov(i, 0) + 0.5 * data[0](i, 0) * data[1](i, 0) + z(rng);
  }
  std::string pheno = "sample_id\tbmd\n";
  std::string covar = "sample_id\tage\tweight_z\n";
  for (int i : order) {
    const auto& id = ids[static_cast<std::size_t>(i)];
    pheno += id + "\t" + robkmr::format_roundtrip(y(i)) + "\n";
    covar += id + "\t" + robkmr::format_roundtrip(cov(i, 0)) + "\t" + robkmr::format_roundtrip(cov(i, 1)) + "\n";
  }
  paths.phenotype = (fs::path(dir) / "pheno.tsv").string();
  paths.covariates = (fs::path(dir) / "covar.tsv").string();
  robkmr::write_text_atomic(paths.phenotype, pheno);
  robkmr::write_text_atomic(paths.covariates, covar);
  return paths;
}

}  // namespace fixture
