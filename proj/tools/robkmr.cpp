// robkmr: command-line front end (center, fit, test, simulate, scan).

#include <omp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "robkmr/config.hpp"
#include "robkmr/error.hpp"
#include "robkmr/inference.hpp"
#include "robkmr/mixed_model.hpp"
#include "robkmr/robust_center.hpp"
#include "robkmr/scan.hpp"
#include "robkmr/simulation.hpp"
#include "robkmr/tsv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace robkmr;

namespace {

constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void emit_json(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + '\n';
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text_atomic(out, text);
  }
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

void apply_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("ROBKMR_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) omp_set_num_threads(threads);
}

RunConfig load_run_config(const std::string& path) {
  return path.empty() ? RunConfig{} : run_config_from_json(load_config_document(path));
}

Eigen::VectorXd read_vector(const std::string& path) {
  const Eigen::MatrixXd m = read_numeric_tsv(path);
  if (m.cols() != 1) throw Error(ErrorCode::Parse, path + ": expected a single column");
  return m.col(0);
}

ComponentSet read_components(const std::vector<std::string>& paths) {
  std::vector<GramMatrix> kernels;
  for (const auto& p : paths) kernels.emplace_back(read_numeric_tsv(p));
  return make_components(std::move(kernels), {});
}

json fit_json(const MixedModelFit& fit, const ComponentSet& comps) {
  json blups = json::object();
  for (std::size_t m = 0; m < comps.size(); ++m) blups[comps.labels[m]] = vec_json(fit.blups[m]);
  return {{"beta", vec_json(fit.beta)},
          {"sigma2", fit.sigma2},
          {"tau", vec_json(fit.tau)},
          {"labels", comps.labels},
          {"reml_loglik", fit.reml_loglik},
          {"converged", fit.converged},
          {"iterations", fit.n_iter},
          {"score", vec_json(fit.score)},
          {"at_boundary", fit.at_boundary},
          {"blups", blups}};
}

json test_json(const TestResult& t) {
  return {{"kind", to_string(t.kind)}, {"statistic", t.statistic}, {"gamma", t.gamma},
          {"nu", t.nu},                {"p_value", t.p_value},     {"mean", t.mean},
          {"variance", t.variance},    {"degenerate", t.degenerate}};
}

json file_identity(const std::string& role, const std::string& path) {
  return {{"role", role}, {"file", fs::path(path).filename().string()}, {"fnv1a64", hex64(fnv1a64(read_text(path)))}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust kernel machine regression toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // center
  auto* center = app.add_subcommand("center", "Robustly center a Gram matrix (KIRWLS)");
  std::string center_gram, center_out, center_config, center_loss;
  center->add_option("--gram", center_gram, "Gram matrix TSV (n x n, no header)")->required();
  center->add_option("--out", center_out, "Output directory")->required();
  center->add_option("--config", center_config, "Run config (uses [loss] and [kirwls])");
  center->add_option("--loss", center_loss, "Loss kind with default quantile tuning (overrides config)");

  // fit
  auto* fit = app.add_subcommand("fit", "ReML fit of the kernel mixed model");
  std::string fit_y, fit_x, fit_kernels, fit_config, fit_out;
  fit->add_option("--y", fit_y, "Response TSV (one column)")->required();
  fit->add_option("--x", fit_x, "Covariate design TSV (include an intercept column)")->required();
  fit->add_option("--kernels", fit_kernels, "Comma-separated kernel TSVs")->required();
  fit->add_option("--config", fit_config, "Run config (uses [reml])");
  fit->add_option("--out", fit_out, "Output JSON (default stdout)");

  // test
  auto* test = app.add_subcommand("test", "Variance-component score test");
  std::string test_y, test_x, test_kernels, test_kind = "overall", test_config, test_out;
  bool legacy = false, plugin = false;
  test->add_option("--y", test_y, "Response TSV (one column)")->required();
  test->add_option("--x", test_x, "Covariate design TSV")->required();
  test->add_option("--kernels", test_kernels, "Comma-separated kernel TSVs; composite tests the last one")
      ->required();
  test->add_option("--kind", test_kind, "overall|composite")->check(CLI::IsMember({"overall", "composite"}));
  test->add_flag("--legacy-prefactor", legacy, "Composite: divide S by the null residual variance");
  test->add_flag("--plugin-variance", plugin, "Overall: variance formula treating the residual variance as known");
  test->add_option("--config", test_config, "Run config (uses [reml] and [test])");
  test->add_option("--out", test_out, "Output JSON (default stdout)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Power table and ROC curve on synthetic data");
  std::string sim_config, sim_out;
  int sim_reps = 0, sim_threads = 0;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  simulate->add_option("--config", sim_config, "Simulation config (TOML or JSON)");
  simulate->add_option("--out", sim_out, "Output directory")->required();
  simulate->add_option("--reps", sim_reps, "Override replicate count");
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "Override base seed");
  simulate->add_option("--threads", sim_threads, "Worker threads (env ROBKMR_THREADS)");

  // scan
  auto* scan = app.add_subcommand("scan", "Gene-triplet scan over three omics views");
  std::string scan_views, scan_maps, scan_pheno, scan_covar, scan_config, scan_out;
  bool scan_resume = false, scan_quiet = false;
  int scan_threads = 0;
  scan->add_option("--views", scan_views, "Three view TSVs: genotype,methylation,expression")->required();
  scan->add_option("--genemap", scan_maps, "Three feature-to-gene maps")->required();
  scan->add_option("--pheno", scan_pheno, "Phenotype TSV")->required();
  scan->add_option("--covar", scan_covar, "Covariate TSV (intercept added unless disabled)");
  scan->add_option("--config", scan_config, "Run config (TOML or JSON)");
  scan->add_option("--out", scan_out, "Output directory")->required();
  scan->add_flag("--resume", scan_resume, "Continue from the checkpoint in the output directory");
  scan->add_option("--threads", scan_threads, "Worker threads (env ROBKMR_THREADS)");
  scan->add_flag("--quiet", scan_quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitFatal;
  }
  sim_seed_set = seed_opt->count() > 0;

  try {
    if (*center) {
      RunConfig cfg = load_run_config(center_config);
      if (!center_loss.empty()) cfg.loss = RobustLoss::tuned(parse_loss_kind(center_loss));
      const GramMatrix k(read_numeric_tsv(center_gram));
      const RobustCentering rc = kirwls_weights(k, cfg.loss, cfg.kirwls);
      fs::create_directories(center_out);
      const fs::path dir(center_out);
      write_text_atomic((dir / "weights.tsv").string(), format_numeric_tsv(rc.weights));
      write_text_atomic((dir / "centered.tsv").string(), format_numeric_tsv(rc.centered.values()));
      emit_json({{"converged", rc.converged},
                 {"iterations", rc.iterations},
                 {"threshold", rc.threshold},
                 {"objective_trace", rc.objective_trace},
                 {"loss", loss_to_json(rc.loss)}},
                (dir / "report.json").string());
      return 0;
    }
    if (*fit) {
      const RunConfig cfg = load_run_config(fit_config);
      const Eigen::VectorXd y = read_vector(fit_y);
      const Eigen::MatrixXd x = read_numeric_tsv(fit_x);
      const ComponentSet comps = read_components(split_commas(fit_kernels));
      const MixedModelFit f = reml_fit(y, x, comps, cfg.reml);
      emit_json(fit_json(f, comps), fit_out);
      return 0;
    }
    if (*test) {
      RunConfig cfg = load_run_config(test_config);
      if (legacy) cfg.composite.legacy_prefactor = true;
      if (plugin) cfg.overall.plugin_variance = true;
      const Eigen::VectorXd y = read_vector(test_y);
      const Eigen::MatrixXd x = read_numeric_tsv(test_x);
      const ComponentSet comps = read_components(split_commas(test_kernels));
      json out;
      if (parse_test_kind(test_kind) == TestKind::Overall) {
        out = test_json(overall_score_test(y, x, comps, cfg.overall));
      } else {
        if (comps.size() < 2) throw Error(ErrorCode::InvalidArgument, "composite test needs at least two kernels");
        const MixedModelFit null_fit = reml_fit(y, x, comps.without_last(), cfg.reml);
        out = test_json(composite_score_test(y, x, comps, null_fit, cfg.composite));
        out["null_fit"] = fit_json(null_fit, comps.without_last());
      }
      emit_json(out, test_out);
      return 0;
    }
    if (*simulate) {
      apply_threads(sim_threads);
      SimulateConfig cfg = sim_config.empty() ? SimulateConfig{} : simulate_config_from_json(load_config_document(sim_config));
      if (sim_reps > 0) cfg.base.reps = sim_reps;
      if (sim_seed_set) cfg.base.seed = sim_seed;
      cfg.base.validate();
      const json canonical = to_json(cfg);
      fs::create_directories(sim_out);
      const fs::path dir(sim_out);

      std::string power = "alpha1\talpha2\talpha3\trejection_rate\tstandard_error\treps\texcluded\tmean_statistic\tmean_standardized\n";
      for (const auto& alphas : cfg.alpha_grid) {
        SimConfig c = cfg.base;
        c.alphas = alphas;
        const PowerRow row = estimate_power(c);
        power += format_roundtrip(alphas[0]) + '\t' + format_roundtrip(alphas[1]) + '\t' + format_roundtrip(alphas[2]) +
                 '\t' + format_sig(row.rejection_rate) + '\t' + format_sig(row.standard_error) + '\t' +
                 std::to_string(row.reps) + '\t' + std::to_string(row.excluded) + '\t' +
                 format_sig(row.mean_statistic) + '\t' + format_sig(row.mean_standardized) + '\n';
        std::cerr << "alphas (" << alphas[0] << ", " << alphas[1] << ", " << alphas[2]
                  << "): rejection rate " << row.rejection_rate << '\n';
      }
      write_text_atomic((dir / "power.tsv").string(), power);

      json manifest = {{"tool", "robkmr"},
                       {"version", kVersion},
                       {"config_hash", config_hash(canonical)},
                       {"config", canonical},
                       {"seed", cfg.base.seed},
                       {"seeding", "replicate r uses SplitMix64(seed, r); ROC alternatives use r + 2^40"}};
      if (cfg.roc) {
        const RocCurve curve = roc_curve(cfg.base, cfg.roc_step);
        std::string roc = "threshold\tfpr\ttpr\n";
        for (const auto& p : curve.points) {
          roc += format_sig(p.threshold) + '\t' + format_sig(p.fpr) + '\t' + format_sig(p.tpr) + '\n';
        }
        write_text_atomic((dir / "roc.tsv").string(), roc);
        manifest["roc"] = {{"auc", curve.auc}, {"null_reps", curve.null_reps}, {"alt_reps", curve.alt_reps}};
      }
      emit_json(manifest, (dir / "manifest.json").string());
      return 0;
    }
    if (*scan) {
      apply_threads(scan_threads);
      const auto views = split_commas(scan_views);
      const auto maps = split_commas(scan_maps);
      if (views.size() != 3 || maps.size() != 3) {
        throw Error(ErrorCode::InvalidArgument, "--views and --genemap each need exactly three comma-separated paths");
      }
      const RunConfig cfg = load_run_config(scan_config);
      BundlePaths paths;
      std::copy(views.begin(), views.end(), paths.views.begin());
      std::copy(maps.begin(), maps.end(), paths.gene_maps.begin());
      paths.phenotype = scan_pheno;
      paths.covariates = scan_covar;
      const OmicsBundle bundle = load_bundle(paths, cfg.view_kinds, cfg.na_policy);
      if (!scan_quiet) {
        for (const auto& line : bundle.log) std::cerr << line << '\n';
      }

      const json canonical = to_json(cfg);
      json inputs = json::array();
      for (std::size_t v = 0; v < 3; ++v) {
        inputs.push_back(file_identity("view" + std::to_string(v + 1), paths.views[v]));
        inputs.push_back(file_identity("genemap" + std::to_string(v + 1), paths.gene_maps[v]));
      }
      inputs.push_back(file_identity("phenotype", paths.phenotype));
      if (!paths.covariates.empty()) inputs.push_back(file_identity("covariates", paths.covariates));
      json genes = json::array();
      for (std::size_t v = 0; v < 3; ++v) genes.push_back(gene_blocks(bundle, v).size());

      ScanRunOptions options;
      options.out_dir = scan_out;
      options.resume = scan_resume;
      options.context = {{"config_hash", config_hash(canonical)},
                         {"config", canonical},
                         {"inputs", inputs},
                         {"samples", bundle.sample_ids.size()},
                         {"genes", genes},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                       "." + std::to_string(EIGEN_MINOR_VERSION)}};
      if (!scan_quiet) {
        options.progress = [](std::uint64_t done, std::uint64_t total) {
          std::cerr << "scanned " << done << " / " << total << " triplets\n";
        };
      }
      const auto records = run_scan(bundle, cfg, options);
      const auto failures = std::count_if(records.begin(), records.end(), [](const ScanRecord& r) { return !r.ok(); });
      if (failures > 0) {
        std::cerr << failures << " of " << records.size() << " triplets failed; see the status column of scan.tsv\n";
        return kExitPartial;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "robkmr: " << to_string(e.code()) << ": " << e.what() << '\n';
    return kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "robkmr: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitFatal;
}
