#pragma once

// Run configuration files (TOML or JSON) for the scan and simulate commands.
//
// Both formats map onto the same JSON document; unknown keys are errors.
// See README.md for the schema and defaults.

#include <array>
#include <json.hpp>
#include <string>
#include <vector>

#include "robkmr/inference.hpp"
#include "robkmr/kernels.hpp"
#include "robkmr/loss.hpp"
#include "robkmr/mixed_model.hpp"
#include "robkmr/pipeline.hpp"
#include "robkmr/robust_center.hpp"
#include "robkmr/simulation.hpp"

namespace robkmr {

enum class NaPolicy { Fail, DropFeature, MeanImpute };

std::string to_string(NaPolicy policy);
NaPolicy parse_na_policy(const std::string& name);

struct RunConfig {
  RobustLoss loss = RobustLoss::tuned(LossKind::Hampel);
  std::array<ViewKernelSpec, 3> kernels{ViewKernelSpec{KernelKind::Ibs, 0.0}, ViewKernelSpec{KernelKind::Gaussian, 0.0},
                                        ViewKernelSpec{KernelKind::Gaussian, 0.0}};
  KirwlsOptions kirwls;
  RemlOptions reml;
  OverallOptions overall;
  CompositeOptions composite;
  std::array<ViewKind, 3> view_kinds{ViewKind::Genotype, ViewKind::Continuous, ViewKind::Continuous};
  NaPolicy na_policy = NaPolicy::Fail;
  bool intercept = true;
  int checkpoint_every = 1000;
};

struct SimulateConfig {
  SimConfig base;
  std::vector<std::array<double, 3>> alpha_grid{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.5}, {0.0, 0.0, 1.0}};
  bool roc = false;
  double roc_step = 1e-4;
};

/// Reads a .toml or .json file (other extensions: JSON, then TOML) into JSON.
nlohmann::json load_config_document(const std::string& path);
nlohmann::json toml_to_json(const std::string& toml_text, const std::string& source = "config");

nlohmann::json loss_to_json(const RobustLoss& loss);
RobustLoss loss_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SimulateConfig& cfg);
SimulateConfig simulate_config_from_json(const nlohmann::json& j);

/// FNV-1a of the compact, key-sorted JSON dump.
std::string config_hash(const nlohmann::json& canonical);

}  // namespace robkmr
