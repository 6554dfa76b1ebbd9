#include "robkmr/scan.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <unordered_map>

#include "robkmr/error.hpp"
#include "robkmr/inference.hpp"
#include "robkmr/mixed_model.hpp"
#include "robkmr/pipeline.hpp"
#include "robkmr/tsv.hpp"

namespace robkmr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kPartialTsv = "scan.partial.tsv";
constexpr const char* kPartialState = "scan.partial.json";

void require_unique(const std::vector<std::string>& ids, const std::string& what, const std::string& path) {
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (id.empty()) throw Error(ErrorCode::Parse, path + ": empty " + what);
    if (!seen.insert(id).second) throw Error(ErrorCode::Parse, path + ": duplicated " + what + " '" + id + "'");
  }
}

std::unordered_map<std::string, Eigen::Index> index_of(const std::vector<std::string>& ids) {
  std::unordered_map<std::string, Eigen::Index> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], static_cast<Eigen::Index>(i));
  return out;
}

// Samples x columns table (phenotype or covariates), checked for NA under
// the given policy. Returns the set of samples with complete rows.
std::set<std::string> complete_samples(const LabeledMatrix& m, const std::string& path, NaPolicy policy,
                                       std::vector<std::string>& log) {
  std::set<std::string> out;
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    const auto& id = m.row_ids[static_cast<std::size_t>(i)];
    if (m.values.row(i).array().isNaN().any()) {
      if (policy == NaPolicy::Fail) throw Error(ErrorCode::Parse, path + ": missing value for sample '" + id + "'");
      log.push_back("dropped sample " + id + " (missing value in " + path + ")");
      continue;
    }
    out.insert(id);
  }
  return out;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string flag(bool b) { return b ? "1" : "0"; }

bool parse_flag(const std::string& s) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw Error(ErrorCode::Parse, "expected 0 or 1, found '" + s + "'");
}

double printed(double value) { return std::isnan(value) ? kNaN : parse_number(format_sig(value)); }

DataView slice(const DataView& view, const std::vector<Eigen::Index>& columns) {
  DataView out;
  out.kind = view.kind;
  out.values.resize(view.samples(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.values.col(static_cast<Eigen::Index>(j)) = view.values.col(columns[j]);
    out.feature_ids.push_back(view.feature_ids[static_cast<std::size_t>(columns[j])]);
  }
  return out;
}

void note_failure(ScanRecord& r, const std::string& stage, const std::string& code, const std::string& what) {
  if (r.status == "ok") r.status = code;
  if (!r.message.empty()) r.message += "; ";
  r.message += stage + ": " + what;
}

// Runs `body`, recording any exception against the record.
template <class F>
bool guarded(ScanRecord& r, const std::string& stage, F&& body) {
  try {
    body();
    return true;
  } catch (const Error& e) {
    note_failure(r, stage, std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    note_failure(r, stage, "internal", e.what());
  }
  return false;
}

}  // namespace

OmicsBundle load_bundle(const BundlePaths& paths, const std::array<ViewKind, 3>& kinds, NaPolicy na_policy) {
  OmicsBundle b;
  std::array<LabeledMatrix, 3> raw;
  for (std::size_t v = 0; v < 3; ++v) {
    raw[v] = read_labeled_tsv(paths.views[v]);
    require_unique(raw[v].row_ids, "feature id", paths.views[v]);
    require_unique(raw[v].col_ids, "sample id", paths.views[v]);
  }
  std::string pheno_name;
  LabeledMatrix pheno = read_labeled_tsv(paths.phenotype);
  if (pheno.values.cols() != 1) throw Error(ErrorCode::Parse, paths.phenotype + ": expected exactly one phenotype column");
  require_unique(pheno.row_ids, "sample id", paths.phenotype);
  std::optional<LabeledMatrix> covar;
  if (!paths.covariates.empty()) {
    covar = read_labeled_tsv(paths.covariates);
    require_unique(covar->row_ids, "sample id", paths.covariates);
    require_unique(covar->col_ids, "covariate name", paths.covariates);
  }

  // Sample intersection.
  std::set<std::string> common(raw[0].col_ids.begin(), raw[0].col_ids.end());
  std::string sizes = "view1 has " + std::to_string(raw[0].col_ids.size());
  const auto intersect = [&common](const std::set<std::string>& other) {
    std::set<std::string> next;
    std::set_intersection(common.begin(), common.end(), other.begin(), other.end(), std::inserter(next, next.begin()));
    common = std::move(next);
  };
  for (std::size_t v = 1; v < 3; ++v) {
    intersect(std::set<std::string>(raw[v].col_ids.begin(), raw[v].col_ids.end()));
    sizes += ", view" + std::to_string(v + 1) + " has " + std::to_string(raw[v].col_ids.size());
  }
  intersect(complete_samples(pheno, paths.phenotype, na_policy, b.log));
  sizes += ", phenotype has " + std::to_string(pheno.row_ids.size());
  if (covar) {
    intersect(complete_samples(*covar, paths.covariates, na_policy, b.log));
    sizes += ", covariates has " + std::to_string(covar->row_ids.size());
  }
  if (common.empty()) throw Error(ErrorCode::InvalidArgument, "no samples shared by all inputs (" + sizes + ")");
  b.sample_ids.assign(common.begin(), common.end());
  const auto n = static_cast<Eigen::Index>(b.sample_ids.size());

  for (std::size_t v = 0; v < 3; ++v) {
    const auto col = index_of(raw[v].col_ids);
    DataView& view = b.views[v];
    view.kind = kinds[v];
    std::vector<Eigen::VectorXd> kept;
    for (Eigen::Index f = 0; f < raw[v].values.rows(); ++f) {
      const std::string& fid = raw[v].row_ids[static_cast<std::size_t>(f)];
      Eigen::VectorXd x(n);
      for (Eigen::Index i = 0; i < n; ++i) x(i) = raw[v].values(f, col.at(b.sample_ids[static_cast<std::size_t>(i)]));
      const auto missing = x.array().isNaN();
      if (missing.any()) {
        if (na_policy == NaPolicy::Fail) {
          throw Error(ErrorCode::Parse, paths.views[v] + ": missing value in feature '" + fid + "'");
        }
        if (na_policy == NaPolicy::MeanImpute && kinds[v] == ViewKind::Genotype) {
          throw Error(ErrorCode::InvalidArgument,
                      paths.views[v] + ": mean_impute applies to continuous views only (feature '" + fid + "')");
        }
        const Eigen::Index observed = n - missing.count();
        if (na_policy == NaPolicy::DropFeature || observed == 0) {
          b.log.push_back("dropped feature " + fid + " from view" + std::to_string(v + 1) + " (missing values)");
          continue;
        }
        const double mean = missing.select(0.0, x).sum() / static_cast<double>(observed);
        x = missing.select(mean, x);
      }
      if (kinds[v] == ViewKind::Genotype) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (x(i) != 0.0 && x(i) != 1.0 && x(i) != 2.0) {
            throw Error(ErrorCode::Parse, paths.views[v] + ": genotype '" + fid + "' has value " +
                                              format_roundtrip(x(i)) + " (expected 0, 1 or 2)");
          }
        }
      }
      view.feature_ids.push_back(fid);
      kept.push_back(std::move(x));
    }
    view.values.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) view.values.col(static_cast<Eigen::Index>(j)) = kept[j];

    const std::set<std::string> present(view.feature_ids.begin(), view.feature_ids.end());
    std::set<std::string> mapped;
    for (auto& [fid, gene] : read_pairs_tsv(paths.gene_maps[v])) {
      if (!mapped.insert(fid).second) {
        throw Error(ErrorCode::Parse, paths.gene_maps[v] + ": feature '" + fid + "' mapped twice");
      }
      if (gene.empty()) throw Error(ErrorCode::Parse, paths.gene_maps[v] + ": empty gene for '" + fid + "'");
      if (present.count(fid)) b.gene_maps[v].emplace(fid, gene);
    }
  }

  const auto prow = index_of(pheno.row_ids);
  b.phenotype_name = pheno.col_ids[0];
  b.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) b.y(i) = pheno.values(prow.at(b.sample_ids[static_cast<std::size_t>(i)]), 0);
  if (covar) {
    const auto crow = index_of(covar->row_ids);
    b.covariate_names = covar->col_ids;
    b.covariates.resize(n, covar->values.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      b.covariates.row(i) = covar->values.row(crow.at(b.sample_ids[static_cast<std::size_t>(i)]));
    }
  } else {
    b.covariates.resize(n, 0);
  }
  return b;
}

void save_bundle(const OmicsBundle& bundle, const BundlePaths& paths) {
  for (std::size_t v = 0; v < 3; ++v) {
    const DataView& view = bundle.views[v];
    LabeledMatrix m{"feature_id", view.feature_ids, bundle.sample_ids, view.values.transpose()};
    write_text_atomic(paths.views[v], format_labeled_tsv(m));
    std::string map = "feature_id\tgene\n";
    for (const auto& fid : view.feature_ids) {
      const auto it = bundle.gene_maps[v].find(fid);
      if (it != bundle.gene_maps[v].end()) map += fid + '\t' + it->second + '\n';
    }
    write_text_atomic(paths.gene_maps[v], map);
  }
  write_text_atomic(paths.phenotype,
                    format_labeled_tsv({"sample_id", bundle.sample_ids, {bundle.phenotype_name}, bundle.y}));
  if (!paths.covariates.empty()) {
    write_text_atomic(paths.covariates,
                      format_labeled_tsv({"sample_id", bundle.sample_ids, bundle.covariate_names, bundle.covariates}));
  }
}

std::vector<GeneBlock> gene_blocks(const OmicsBundle& bundle, std::size_t view) {
  std::map<std::string, std::vector<Eigen::Index>> groups;
  const auto& ids = bundle.views[view].feature_ids;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto it = bundle.gene_maps[view].find(ids[j]);
    if (it != bundle.gene_maps[view].end()) groups[it->second].push_back(static_cast<Eigen::Index>(j));
  }
  std::vector<GeneBlock> out;
  for (auto& [gene, cols] : groups) out.push_back(GeneBlock{gene, std::move(cols)});
  return out;
}

Eigen::MatrixXd design_matrix(const OmicsBundle& bundle, bool intercept) {
  const Eigen::Index n = bundle.y.size();
  const Eigen::Index offset = intercept ? 1 : 0;
  Eigen::MatrixXd x(n, offset + bundle.covariates.cols());
  if (intercept) x.col(0).setOnes();
  x.rightCols(bundle.covariates.cols()) = bundle.covariates;
  if (x.cols() == 0) throw Error(ErrorCode::InvalidArgument, "design matrix has no columns");
  return x;
}

std::uint64_t ScanPlan::size() const {
  return static_cast<std::uint64_t>(blocks[0].size()) * blocks[1].size() * blocks[2].size();
}

std::array<std::size_t, 3> ScanPlan::unravel(std::uint64_t index) const {
  const std::uint64_t g2 = blocks[1].size();
  const std::uint64_t g3 = blocks[2].size();
  return {static_cast<std::size_t>(index / (g2 * g3)), static_cast<std::size_t>((index / g3) % g2),
          static_cast<std::size_t>(index % g3)};
}

ScanPlan plan_scan(const OmicsBundle& bundle, const RunConfig& cfg) {
  ScanPlan plan;
  for (std::size_t v = 0; v < 3; ++v) plan.blocks[v] = gene_blocks(bundle, v);
  plan.x = design_matrix(bundle, cfg.intercept);
  require_full_rank(plan.x);
  return plan;
}

ScanRecord scan_triplet(const OmicsBundle& bundle, const ScanPlan& plan, std::uint64_t index, const RunConfig& cfg) {
  ScanRecord r;
  r.index = index;
  r.sigma2 = r.overall_stat = r.overall_p = r.composite_stat = r.composite_p = r.reml_loglik = kNaN;
  r.tau.fill(kNaN);
  const auto pos = plan.unravel(index);
  for (std::size_t v = 0; v < 3; ++v) r.genes[v] = plan.blocks[v][pos[v]].gene;

  CenteredComponents cc;
  const bool centered = guarded(r, "centering", [&] {
    std::array<DataView, 3> views;
    for (std::size_t v = 0; v < 3; ++v) views[v] = slice(bundle.views[v], plan.blocks[v][pos[v]].columns);
    cc = centered_components({&views[0], &views[1], &views[2]}, cfg.kernels, cfg.loss, cfg.kirwls);
    for (std::size_t v = 0; v < 3; ++v) {
      r.kirwls_iterations[v] = cc.centering[v].iterations;
      r.kirwls_converged[v] = cc.centering[v].converged;
    }
  });
  if (!centered) return r;

  guarded(r, "overall", [&] {
    const TestResult t = overall_score_test(bundle.y, plan.x, cc.components, cfg.overall);
    r.overall_stat = t.statistic;
    r.overall_p = t.p_value;
  });
  guarded(r, "composite", [&] {
    const MixedModelFit null_fit = reml_fit(bundle.y, plan.x, cc.components.without_last(), cfg.reml);
    const TestResult t = composite_score_test(bundle.y, plan.x, cc.components, null_fit, cfg.composite);
    r.composite_stat = t.statistic;
    r.composite_p = t.p_value;
  });
  guarded(r, "full_fit", [&] {
    const MixedModelFit fit = reml_fit(bundle.y, plan.x, cc.components, cfg.reml);
    r.sigma2 = fit.sigma2;
    for (std::size_t m = 0; m < kComponentCount; ++m) r.tau[m] = fit.tau(static_cast<Eigen::Index>(m));
    r.reml_loglik = fit.reml_loglik;
    r.converged = fit.converged;
    r.iterations = fit.n_iter;
  });
  return r;
}

std::vector<ScanRecord> triplet_scan(const OmicsBundle& bundle, const RunConfig& cfg) {
  const ScanPlan plan = plan_scan(bundle, cfg);
  std::vector<ScanRecord> out(static_cast<std::size_t>(plan.size()));
  const auto total = static_cast<std::int64_t>(plan.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < total; ++i) {
    out[static_cast<std::size_t>(i)] = scan_triplet(bundle, plan, static_cast<std::uint64_t>(i), cfg);
  }
  return out;
}

std::string scan_header() {
  return "triplet_index\tgene1\tgene2\tgene3\tstatus\tsigma2\ttau_1\ttau_2\ttau_3\ttau_12\ttau_13\ttau_23\ttau_123\t"
         "overall_stat\toverall_p\tcomposite_stat\tcomposite_p\treml_loglik\tconverged\titerations\t"
         "kirwls_iter_1\tkirwls_iter_2\tkirwls_iter_3\tkirwls_converged_1\tkirwls_converged_2\tkirwls_converged_3\t"
         "message";
}

std::string format_record(const ScanRecord& r) {
  std::string s = std::to_string(r.index);
  for (const auto& g : r.genes) s += '\t' + sanitize(g);
  s += '\t' + r.status;
  s += '\t' + format_sig(r.sigma2);
  for (double t : r.tau) s += '\t' + format_sig(t);
  for (double v : {r.overall_stat, r.overall_p, r.composite_stat, r.composite_p, r.reml_loglik}) {
    s += '\t' + format_sig(v);
  }
  s += '\t' + flag(r.converged) + '\t' + std::to_string(r.iterations);
  for (int it : r.kirwls_iterations) s += '\t' + std::to_string(it);
  for (bool c : r.kirwls_converged) s += '\t' + flag(c);
  s += '\t' + sanitize(r.message);
  return s;
}

ScanRecord parse_record(std::string_view line) {
  const auto f = split_tabs(line);
  constexpr std::size_t kFields = 27;
  if (f.size() != kFields) {
    throw Error(ErrorCode::Parse, "scan record has " + std::to_string(f.size()) + " fields, expected 27");
  }
  ScanRecord r;
  std::size_t k = 0;
  try {
    r.index = std::stoull(f[k++]);
    for (auto& g : r.genes) g = f[k++];
    r.status = f[k++];
    r.sigma2 = parse_number(f[k++]);
    for (double& t : r.tau) t = parse_number(f[k++]);
    for (double* v : {&r.overall_stat, &r.overall_p, &r.composite_stat, &r.composite_p, &r.reml_loglik}) {
      *v = parse_number(f[k++]);
    }
    r.converged = parse_flag(f[k++]);
    r.iterations = std::stoi(f[k++]);
    for (int& it : r.kirwls_iterations) it = std::stoi(f[k++]);
    for (bool& c : r.kirwls_converged) c = parse_flag(f[k++]);
    r.message = f[k++];
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::Parse, "bad scan record field " + std::to_string(k) + ": " + e.what());
  }
  return r;
}

double manhattan_value(double p) {
  const double q = printed(p);
  if (std::isnan(q)) return kNaN;
  return -std::log10(std::max(q, std::numeric_limits<double>::denorm_min()));
}

ScanOutputs format_outputs(const std::vector<ScanRecord>& records, const json& context) {
  ScanOutputs out;
  out.scan_tsv = scan_header() + '\n';
  out.manhattan_tsv = "triplet_index\tneg_log10_overall_p\tneg_log10_composite_p\n";
  std::array<std::uint64_t, kThresholdLadder.size()> overall{};
  std::array<std::uint64_t, kThresholdLadder.size()> composite{};
  std::uint64_t failures = 0;
  for (const auto& r : records) {
    out.scan_tsv += format_record(r) + '\n';
    out.manhattan_tsv += std::to_string(r.index) + '\t' + format_sig(manhattan_value(r.overall_p)) + '\t' +
                         format_sig(manhattan_value(r.composite_p)) + '\n';
    if (!r.ok()) ++failures;
    const double po = printed(r.overall_p);
    const double pc = printed(r.composite_p);
    for (std::size_t t = 0; t < kThresholdLadder.size(); ++t) {
      if (po <= kThresholdLadder[t]) ++overall[t];
      if (pc <= kThresholdLadder[t]) ++composite[t];
    }
  }
  json ladder = json::array();
  for (std::size_t t = 0; t < kThresholdLadder.size(); ++t) {
    ladder.push_back({{"threshold", kThresholdLadder[t]}, {"overall", overall[t]}, {"composite", composite[t]}});
  }
  out.manifest = context.is_object() ? context : json::object();
  out.manifest["tool"] = "robkmr";
  out.manifest["version"] = kVersion;
  out.manifest["records"] = records.size();
  out.manifest["failures"] = failures;
  out.manifest["threshold_counts"] = ladder;
  return out;
}

json write_outputs(const std::vector<ScanRecord>& records, const std::string& out_dir, const json& context) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + out_dir + "': " + ec.message());
  const ScanOutputs out = format_outputs(records, context);
  const fs::path dir(out_dir);
  write_text_atomic((dir / "scan.tsv").string(), out.scan_tsv);
  write_text_atomic((dir / "manhattan.tsv").string(), out.manhattan_tsv);
  write_text_atomic((dir / "manifest.json").string(), out.manifest.dump(2) + '\n');
  return out.manifest;
}

std::vector<ScanRecord> run_scan(const OmicsBundle& bundle, const RunConfig& cfg, const ScanRunOptions& options) {
  const ScanPlan plan = plan_scan(bundle, cfg);
  const std::uint64_t total = plan.size();
  const fs::path dir(options.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + options.out_dir + "': " + ec.message());
  const std::string partial_path = (dir / kPartialTsv).string();
  const std::string state_path = (dir / kPartialState).string();
  const json state = {{"context", options.context}, {"triplets", total}};

  std::vector<std::optional<ScanRecord>> done(static_cast<std::size_t>(total));
  std::uint64_t completed = 0;
  if (options.resume && fs::exists(partial_path) && fs::exists(state_path)) {
    json saved;
    try {
      saved = json::parse(read_text(state_path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Parse, state_path + ": " + e.what());
    }
    if (saved != state) {
      throw Error(ErrorCode::InvalidArgument, "cannot resume: checkpoint was written for a different configuration or input");
    }
    const std::string text = read_text(partial_path);
    std::size_t start = text.find('\n');
    if (start == std::string::npos || text.substr(0, start) != scan_header()) {
      throw Error(ErrorCode::Parse, partial_path + ": unexpected header");
    }
    ++start;
    while (start < text.size()) {
      const auto nl = text.find('\n', start);
      if (nl == std::string::npos) break;  // torn final line
      ScanRecord r = parse_record(std::string_view(text).substr(start, nl - start));
      if (r.index >= total) throw Error(ErrorCode::Parse, partial_path + ": triplet index out of range");
      if (!done[r.index]) ++completed;
      done[r.index] = std::move(r);
      start = nl + 1;
    }
  } else {
    write_text_atomic(state_path, state.dump() + '\n');
    write_text_atomic(partial_path, scan_header() + '\n');
  }

  std::vector<std::uint64_t> pending;
  for (std::uint64_t i = 0; i < total; ++i) {
    if (!done[i]) pending.push_back(i);
  }
  std::ofstream partial(partial_path, std::ios::binary | std::ios::app);
  if (!partial) throw Error(ErrorCode::Io, "cannot open '" + partial_path + "' for appending");
  if (options.progress) options.progress(completed, total);

  const auto chunk = static_cast<std::size_t>(cfg.checkpoint_every);
  for (std::size_t begin = 0; begin < pending.size(); begin += chunk) {
    const std::size_t end = std::min(pending.size(), begin + chunk);
    const auto count = static_cast<std::int64_t>(end - begin);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t k = 0; k < count; ++k) {
      const std::uint64_t idx = pending[begin + static_cast<std::size_t>(k)];
      done[idx] = scan_triplet(bundle, plan, idx, cfg);
    }
    std::string block;
    for (std::size_t k = begin; k < end; ++k) block += format_record(*done[pending[k]]) + '\n';
    partial << block;
    partial.flush();
    if (!partial) throw Error(ErrorCode::Io, "write failed for '" + partial_path + "'");
    completed += end - begin;
    if (options.progress) options.progress(completed, total);
  }
  partial.close();

  std::vector<ScanRecord> records;
  records.reserve(static_cast<std::size_t>(total));
  for (auto& r : done) records.push_back(std::move(*r));
  write_outputs(records, options.out_dir, options.context);
  fs::remove(partial_path, ec);
  fs::remove(state_path, ec);
  return records;
}

}  // namespace robkmr
