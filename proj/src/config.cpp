#include "robkmr/config.hpp"

#include <filesystem>
#include <set>
#include <toml.hpp>

#include "robkmr/error.hpp"
#include "robkmr/tsv.hpp"

namespace robkmr {

namespace {

using nlohmann::json;

// Strict view of one JSON object: every key must be consumed by a getter.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(ErrorCode::Parse, "[" + name_ + "] must be a table/object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, "[" + name_ + "] " + key + ": " + e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw Error(ErrorCode::Parse, "[" + name_ + "] unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

json toml_node_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_node_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_node_to_json(v));
    return out;
  }
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  throw Error(ErrorCode::Parse, "unsupported TOML value type (dates and times are not accepted)");
}

template <std::size_t N, class T>
std::array<T, N> fixed_array(const std::vector<T>& v, const std::string& what) {
  if (v.size() != N) throw Error(ErrorCode::Parse, what + " needs exactly " + std::to_string(N) + " entries");
  std::array<T, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

json kirwls_to_json(const KirwlsOptions& k) {
  return {{"threshold", k.threshold}, {"max_iter", k.max_iter}, {"retune_count", k.retune_count}};
}

void kirwls_from_json(const json& j, KirwlsOptions& k) {
  Section s(j, "kirwls");
  s.get("threshold", k.threshold);
  s.get("max_iter", k.max_iter);
  s.get("retune_count", k.retune_count);
  s.finish();
  if (!(k.threshold > 0.0) || k.max_iter < 1 || k.retune_count < 0) {
    throw Error(ErrorCode::InvalidArgument, "[kirwls] needs threshold > 0, max_iter >= 1, retune_count >= 0");
  }
}

json reml_to_json(const RemlOptions& r) {
  return {{"max_iter", r.max_iter},     {"step_tol", r.step_tol},           {"max_halvings", r.max_halvings},
          {"boundary", r.boundary},     {"grid_fractions", r.grid_fractions}, {"random_starts", r.random_starts},
          {"seed", r.seed}};
}

void reml_from_json(const json& j, RemlOptions& r) {
  Section s(j, "reml");
  s.get("max_iter", r.max_iter);
  s.get("step_tol", r.step_tol);
  s.get("max_halvings", r.max_halvings);
  s.get("boundary", r.boundary);
  s.get("grid_fractions", r.grid_fractions);
  s.get("random_starts", r.random_starts);
  s.get("seed", r.seed);
  s.finish();
  if (r.max_iter < 1 || !(r.step_tol > 0.0) || r.max_halvings < 0 || !(r.boundary > 0.0) || r.random_starts < 0 ||
      (r.grid_fractions.empty() && r.random_starts == 0)) {
    throw Error(ErrorCode::InvalidArgument, "[reml] options out of range");
  }
}

json test_to_json(const OverallOptions& o, const CompositeOptions& c) {
  return {{"plugin_variance", o.plugin_variance}, {"legacy_prefactor", c.legacy_prefactor}};
}

}  // namespace

std::string to_string(NaPolicy policy) {
  switch (policy) {
    case NaPolicy::Fail: return "fail";
    case NaPolicy::DropFeature: return "drop_feature";
    case NaPolicy::MeanImpute: return "mean_impute";
  }
  return "fail";
}

NaPolicy parse_na_policy(const std::string& name) {
  if (name == "fail") return NaPolicy::Fail;
  if (name == "drop_feature") return NaPolicy::DropFeature;
  if (name == "mean_impute") return NaPolicy::MeanImpute;
  throw Error(ErrorCode::Parse, "unknown NA policy '" + name + "' (expected fail|drop_feature|mean_impute)");
}

json toml_to_json(const std::string& toml_text, const std::string& source) {
  try {
    const toml::table table = toml::parse(toml_text, source);
    return toml_node_to_json(table);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string(source) + ": " + std::string(e.description()));
  }
}

json load_config_document(const std::string& path) {
  const std::string text = read_text(path);
  const std::string ext = std::filesystem::path(path).extension().string();
  const auto as_json = [&] {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Parse, path + ": " + e.what());
    }
  };
  if (ext == ".toml") return toml_to_json(text, path);
  if (ext == ".json") return as_json();
  try {
    return as_json();
  } catch (const Error&) {
    return toml_to_json(text, path);
  }
}

json loss_to_json(const RobustLoss& loss) {
  return {{"kind", std::string(to_string(loss.kind))},
          {"policy", loss.policy == TuningPolicy::Quantile ? "quantile" : "fixed"},
          {"c", loss.c},
          {"hampel", loss.hampel},
          {"scale", loss.scale},
          {"quantiles", loss.quantiles}};
}

RobustLoss loss_from_json(const json& j) {
  Section s(j, "loss");
  std::string kind_name = "hampel";
  s.get("kind", kind_name);
  const LossKind kind = parse_loss_kind(kind_name);
  RobustLoss loss = RobustLoss::tuned(kind);

  std::string policy;
  s.get("policy", policy);
  if (policy.empty()) policy = (s.has("c") || s.has("hampel")) ? "fixed" : "quantile";
  if (policy == "fixed") {
    loss.policy = TuningPolicy::Fixed;
  } else if (policy != "quantile") {
    throw Error(ErrorCode::Parse, "[loss] policy must be fixed or quantile");
  }
  s.get("c", loss.c);
  s.get("hampel", loss.hampel);
  s.get("scale", loss.scale);
  if (const json* q = s.child("quantiles")) {
    std::vector<double> levels;
    try {
      levels = q->get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, std::string("[loss] quantiles: ") + e.what());
    }
    if (levels.size() == 1) {
      loss.quantiles[0] = levels[0];
    } else {
      loss.quantiles = fixed_array<3>(levels, "[loss] quantiles");
    }
  }
  s.finish();
  loss.validate();
  return loss;
}

json to_json(const RunConfig& cfg) {
  json kernels = {{"kinds", json::array()}, {"bandwidths", json::array()}};
  json views = json::array();
  for (std::size_t v = 0; v < 3; ++v) {
    kernels["kinds"].push_back(to_string(cfg.kernels[v].kernel));
    kernels["bandwidths"].push_back(cfg.kernels[v].bandwidth);
    views.push_back(to_string(cfg.view_kinds[v]));
  }
  return {{"loss", loss_to_json(cfg.loss)},
          {"kernels", kernels},
          {"kirwls", kirwls_to_json(cfg.kirwls)},
          {"reml", reml_to_json(cfg.reml)},
          {"test", test_to_json(cfg.overall, cfg.composite)},
          {"scan",
           {{"view_kinds", views},
            {"na_policy", to_string(cfg.na_policy)},
            {"intercept", cfg.intercept},
            {"checkpoint_every", cfg.checkpoint_every}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  Section root(j, "root");
  if (const json* l = root.child("loss")) cfg.loss = loss_from_json(*l);
  if (const json* k = root.child("kernels")) {
    Section s(*k, "kernels");
    std::vector<std::string> kinds;
    std::vector<double> bandwidths;
    s.get("kinds", kinds);
    s.get("bandwidths", bandwidths);
    s.finish();
    if (!kinds.empty()) {
      const auto a = fixed_array<3>(kinds, "[kernels] kinds");
      for (std::size_t v = 0; v < 3; ++v) cfg.kernels[v].kernel = parse_kernel_kind(a[v]);
    }
    if (!bandwidths.empty()) {
      const auto a = fixed_array<3>(bandwidths, "[kernels] bandwidths");
      for (std::size_t v = 0; v < 3; ++v) cfg.kernels[v].bandwidth = a[v];
    }
  }
  if (const json* k = root.child("kirwls")) kirwls_from_json(*k, cfg.kirwls);
  if (const json* r = root.child("reml")) reml_from_json(*r, cfg.reml);
  if (const json* t = root.child("test")) {
    Section s(*t, "test");
    s.get("plugin_variance", cfg.overall.plugin_variance);
    s.get("legacy_prefactor", cfg.composite.legacy_prefactor);
    s.finish();
  }
  if (const json* sc = root.child("scan")) {
    Section s(*sc, "scan");
    std::vector<std::string> views;
    std::string na;
    s.get("view_kinds", views);
    s.get("na_policy", na);
    s.get("intercept", cfg.intercept);
    s.get("checkpoint_every", cfg.checkpoint_every);
    s.finish();
    if (!views.empty()) {
      const auto a = fixed_array<3>(views, "[scan] view_kinds");
      for (std::size_t v = 0; v < 3; ++v) cfg.view_kinds[v] = parse_view_kind(a[v]);
    }
    if (!na.empty()) cfg.na_policy = parse_na_policy(na);
    if (cfg.checkpoint_every < 1) throw Error(ErrorCode::InvalidArgument, "[scan] checkpoint_every must be >= 1");
  }
  root.finish();
  for (std::size_t v = 0; v < 3; ++v) {
    if (cfg.kernels[v].kernel == KernelKind::Ibs && cfg.view_kinds[v] != ViewKind::Genotype) {
      throw Error(ErrorCode::InvalidArgument, "IBS kernel requires a genotype view (view " + std::to_string(v + 1) + ")");
    }
  }
  return cfg;
}

json to_json(const SimulateConfig& cfg) {
  const SimConfig& b = cfg.base;
  return {{"n", b.n},
          {"reps", b.reps},
          {"seed", b.seed},
          {"alpha_level", b.alpha_level},
          {"features", b.features},
          {"alpha_grid", cfg.alpha_grid},
          {"loss", loss_to_json(b.loss)},
          {"contamination",
           {{"fraction", b.contamination.fraction},
            {"magnitude", b.contamination.magnitude},
            {"target", to_string(b.contamination.target)}}},
          {"kirwls", kirwls_to_json(b.kirwls)},
          {"reml", reml_to_json(b.reml)},
          {"test",
           {{"kind", to_string(b.test)},
            {"plugin_variance", b.overall.plugin_variance},
            {"legacy_prefactor", b.composite.legacy_prefactor}}},
          {"roc", {{"enabled", cfg.roc}, {"step", cfg.roc_step}}}};
}

SimulateConfig simulate_config_from_json(const json& j) {
  SimulateConfig cfg;
  SimConfig& b = cfg.base;
  Section root(j, "root");
  root.get("n", b.n);
  root.get("reps", b.reps);
  root.get("seed", b.seed);
  root.get("alpha_level", b.alpha_level);
  root.get("features", b.features);
  root.get("alpha_grid", cfg.alpha_grid);
  if (const json* l = root.child("loss")) b.loss = loss_from_json(*l);
  if (const json* c = root.child("contamination")) {
    Section s(*c, "contamination");
    s.get("fraction", b.contamination.fraction);
    s.get("magnitude", b.contamination.magnitude);
    std::string target;
    s.get("target", target);
    s.finish();
    if (!target.empty()) b.contamination.target = parse_contamination_target(target);
  }
  if (const json* k = root.child("kirwls")) kirwls_from_json(*k, b.kirwls);
  if (const json* r = root.child("reml")) reml_from_json(*r, b.reml);
  if (const json* t = root.child("test")) {
    Section s(*t, "test");
    std::string kind;
    s.get("kind", kind);
    s.get("plugin_variance", b.overall.plugin_variance);
    s.get("legacy_prefactor", b.composite.legacy_prefactor);
    s.finish();
    if (!kind.empty()) b.test = parse_test_kind(kind);
  }
  if (const json* r = root.child("roc")) {
    Section s(*r, "roc");
    s.get("enabled", cfg.roc);
    s.get("step", cfg.roc_step);
    s.finish();
  }
  root.finish();
  if (cfg.alpha_grid.empty()) throw Error(ErrorCode::InvalidArgument, "alpha_grid must not be empty");
  b.validate();
  return cfg;
}

std::string config_hash(const json& canonical) { return hex64(fnv1a64(canonical.dump())); }

}  // namespace robkmr
