#pragma once

#include "recourse/simulation.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>
#include <toml.hpp>

namespace recourse {

/// Invalid configuration. The message starts with the offending field path.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class DataSource { synthetic, csv };

struct DataConfig {
  std::string name;
  DataSource source = DataSource::synthetic;
  // synthetic
  SyntheticKind synthetic = SyntheticKind::overlapping;
  Index n = 1000;
  std::optional<double> noise;
  // csv
  std::string path;
  std::string target;
  std::vector<std::string> columns;
  std::vector<std::string> exclude;
  char delimiter = ',';
  bool binarize_target = false;
  std::optional<std::size_t> per_class;
  // common
  std::uint64_t seed = 0;  // generation / undersampling
  double test_fraction = 0.3;
  bool standardize = true;
  std::optional<bool> real_world;

  bool is_real_world() const { return real_world.value_or(source == DataSource::csv); }
  double effective_noise() const { return noise.value_or(default_noise(synthetic)); }
  std::size_t effective_per_class() const { return per_class.value_or(2500); }
  Index latent_dim() const { return is_real_world() ? 8 : 2; }

  std::string label() const {
    if (!name.empty()) return name;
    if (source == DataSource::synthetic) return to_string(synthetic);
    return std::filesystem::path(path).stem().string();
  }
};

struct OutputConfig {
  std::string dir = "results";
  bool checkpoints = true;
  bool snapshots = true;
};

struct RunConfig {
  std::vector<DataConfig> data;
  std::vector<ModelEntry> models;
  std::vector<GeneratorSpec> generators;
  ExperimentConfig experiment;
  std::uint64_t split_seed = 7;
  OutputConfig output;
};

namespace detail {

using json = nlohmann::json;

/// Typed field access with path-qualified errors and unknown-key detection.
class FieldReader {
 public:
  FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a table");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  template <class T>
  std::optional<T> get(const std::string& key) {
    const json* v = raw(key);
    if (v == nullptr) return std::nullopt;
    return convert<T>(*v, field(key));
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (auto v = get<T>(key)) out = *v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown field");
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(where + ": expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (v.is_number_unsigned()) return v.get<std::uint64_t>();
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return std::uint64_t(v.get<std::int64_t>());
      throw ConfigError(where + ": expected a nonnegative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::int64_t(std::numeric_limits<T>::min()) || std::uint64_t(x) > std::uint64_t(std::numeric_limits<T>::max()))
        throw ConfigError(where + ": integer out of range");
      return T(x);
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) throw ConfigError(where + ": expected an array of strings");
      std::vector<std::string> out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<std::string>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void validated(const std::string& where, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

/// Sections may be a single table or an array of tables.
inline std::vector<std::pair<const json*, std::string>> section_items(const json& root, const std::string& key) {
  std::vector<std::pair<const json*, std::string>> out;
  auto it = root.find(key);
  if (it == root.end() || it->is_null()) return out;
  if (it->is_object()) {
    out.emplace_back(&*it, key);
  } else if (it->is_array()) {
    for (std::size_t i = 0; i < it->size(); ++i) out.emplace_back(&(*it)[i], key + "[" + std::to_string(i) + "]");
  } else {
    throw ConfigError(key + ": expected a table or an array of tables");
  }
  return out;
}

inline DataConfig parse_data(const json& j, const std::string& path) {
  FieldReader r(j, path);
  DataConfig d;
  r.read("name", d.name);
  const auto source = r.get<std::string>("source").value_or("synthetic");
  if (source == "synthetic") d.source = DataSource::synthetic;
  else if (source == "csv") d.source = DataSource::csv;
  else throw ConfigError(r.field("source") + ": unknown source '" + source + "' (valid: synthetic, csv)");
  if (auto k = r.get<std::string>("kind")) {
    auto parsed = parse_synthetic_kind(*k);
    if (!parsed)
      throw ConfigError(r.field("kind") + ": unknown synthetic kind '" + *k +
                        "' (valid: overlapping, linearly_separable, circles, moons)");
    d.synthetic = *parsed;
  }
  r.read("n", d.n);
  d.noise = r.get<double>("noise");
  r.read("path", d.path);
  r.read("target", d.target);
  r.read("columns", d.columns);
  r.read("exclude", d.exclude);
  if (auto s = r.get<std::string>("delimiter")) {
    if (s->size() != 1) throw ConfigError(r.field("delimiter") + ": must be a single character");
    d.delimiter = (*s)[0];
  }
  r.read("binarize_target", d.binarize_target);
  d.per_class = r.get<std::size_t>("per_class");
  r.read("seed", d.seed);
  r.read("test_fraction", d.test_fraction);
  r.read("standardize", d.standardize);
  d.real_world = r.get<bool>("real_world");
  if (auto latent = r.get<Index>("latent_dim"); latent && *latent != d.latent_dim())
    throw ConfigError(r.field("latent_dim") + ": must be " + std::to_string(d.latent_dim()) + " for " +
                      (d.is_real_world() ? "real-world" : "synthetic") + " data");
  r.finish();

  if (d.source == DataSource::synthetic) {
    if (d.n < 4 || d.n % 2 != 0) throw ConfigError(r.field("n") + ": must be even and at least 4");
    if (d.noise && !(*d.noise >= 0.0)) throw ConfigError(r.field("noise") + ": must be nonnegative");
  } else {
    if (d.path.empty()) throw ConfigError(r.field("path") + ": required for csv data");
    if (d.target.empty()) throw ConfigError(r.field("target") + ": required for csv data");
    if (d.per_class && *d.per_class < 2) throw ConfigError(r.field("per_class") + ": must be at least 2");
  }
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0))
    throw ConfigError(r.field("test_fraction") + ": must lie in (0,1)");
  return d;
}

inline ModelEntry parse_model(const json& j, const std::string& path) {
  FieldReader r(j, path);
  ModelEntry m;
  const auto kind = r.get<std::string>("kind");
  if (!kind) throw ConfigError(r.field("kind") + ": required (valid: logistic, mlp, ensemble)");
  auto parsed = parse_model_kind(*kind);
  if (!parsed) throw ConfigError(r.field("kind") + ": unknown model kind '" + *kind + "' (valid: logistic, mlp, ensemble)");
  m.kind = *parsed;
  r.read("name", m.name);
  m.hidden_dim = r.get<Index>("hidden_dim");
  m.hidden_layers = r.get<Index>("hidden_layers");
  m.dropout = r.get<double>("dropout");
  m.members = r.get<Index>("members");
  m.epochs = r.get<int>("epochs");
  m.batch_size = r.get<Index>("batch_size");
  m.learning_rate = r.get<double>("learning_rate");
  if (auto o = r.get<std::string>("optimizer")) {
    if (*o == "adam") m.optimizer = OptimizerKind::adam;
    else if (*o == "sgd") m.optimizer = OptimizerKind::sgd;
    else throw ConfigError(r.field("optimizer") + ": unknown optimizer '" + *o + "' (valid: adam, sgd)");
  }
  r.finish();
  if (m.hidden_dim && *m.hidden_dim < 1) throw ConfigError(r.field("hidden_dim") + ": must be positive");
  if (m.hidden_layers && *m.hidden_layers < 1) throw ConfigError(r.field("hidden_layers") + ": must be positive");
  if (m.dropout && !(*m.dropout >= 0.0 && *m.dropout < 1.0)) throw ConfigError(r.field("dropout") + ": must lie in [0,1)");
  if (m.members && *m.members < 1) throw ConfigError(r.field("members") + ": must be positive");
  if (m.epochs && *m.epochs < 0) throw ConfigError(r.field("epochs") + ": must be nonnegative");
  if (m.batch_size && *m.batch_size < 0) throw ConfigError(r.field("batch_size") + ": must be nonnegative");
  if (m.learning_rate && !(*m.learning_rate >= 0.0)) throw ConfigError(r.field("learning_rate") + ": must be nonnegative");
  return m;
}

inline GeneratorSpec parse_generator(const json& j, const std::string& path) {
  FieldReader r(j, path);
  GeneratorSpec g;
  const auto kind = r.get<std::string>("kind");
  if (!kind) throw ConfigError(r.field("kind") + ": required (valid kinds: " + std::string(kGeneratorKinds) + ")");
  auto parsed = parse_generator_kind(*kind);
  if (!parsed)
    throw ConfigError(r.field("kind") + ": unknown generator kind '" + *kind + "' (valid kinds: " +
                      std::string(kGeneratorKinds) + ")");
  g.kind = *parsed;
  r.read("name", g.name);
  r.read("lambda1", g.lambda1);
  r.read("lambda2", g.lambda2);
  r.read("gamma", g.gamma);
  r.read("k", g.k);
  r.read("diversity_weight", g.diversity_weight);
  r.read("max_iter", g.max_iter);
  r.read("step_size", g.step_size);
  r.read("greedy_delta", g.greedy_delta);
  r.read("greedy_max_steps_per_feature", g.greedy_max_steps_per_feature);
  r.read("init_jitter", g.init_jitter);
  if (auto s = r.get<std::string>("distance")) {
    if (*s == "l2sq") g.distance = Distance::l2sq;
    else if (*s == "l1") g.distance = Distance::l1;
    else throw ConfigError(r.field("distance") + ": unknown distance '" + *s + "' (valid: l2sq, l1)");
  }
  if (auto s = r.get<std::string>("latent_yloss")) {
    if (*s == "bce") g.latent_yloss = LatentYLoss::bce;
    else if (*s == "entropy") g.latent_yloss = LatentYLoss::entropy;
    else throw ConfigError(r.field("latent_yloss") + ": unknown yloss '" + *s + "' (valid: bce, entropy)");
  }
  if (auto s = r.get<std::string>("ext_cost")) {
    auto e = parse_ext_cost(*s);
    if (!e) throw ConfigError(r.field("ext_cost") + ": unknown external cost '" + *s + "' (valid: none, claproar, gravitational)");
    g.ext_cost = *e;
  }
  if (auto s = r.get<std::string>("optimizer")) {
    if (*s == "gd") g.optimizer = SearchOptimizer::gd;
    else if (*s == "adam") g.optimizer = SearchOptimizer::adam;
    else throw ConfigError(r.field("optimizer") + ": unknown optimizer '" + *s + "' (valid: gd, adam)");
  }
  r.finish();
  validated(path, [&] { g.validate(); });
  return g;
}

inline void parse_experiment(const json& j, RunConfig& c) {
  FieldReader r(j, "experiment");
  auto& e = c.experiment;
  r.read("rounds", e.rounds);
  r.read("batch_fraction", e.batch_fraction);
  r.read("retrain_epochs", e.retrain_epochs);
  r.read("eval_every", e.eval_every);
  r.read("n_folds", e.n_folds);
  r.read("seed", e.master_seed);
  r.read("split_seed", c.split_seed);
  r.read("retrain_vae", e.retrain_vae);
  r.read("n_permutations", e.metrics.n_permutations);
  r.read("pp_permutations", e.metrics.pp_permutations);
  r.read("kernel_length_scale", e.metrics.kernel.length_scale);
  r.read("mmd_sample_cap", e.metrics.mmd_sample_cap);
  r.read("grid_points", e.metrics.grid_points);
  if (auto s = r.get<std::string>("class_mmd_labels")) {
    if (*s == "current") e.metrics.class_labels = ClassMmdLabels::current;
    else if (*s == "initial") e.metrics.class_labels = ClassMmdLabels::initial;
    else throw ConfigError(r.field("class_mmd_labels") + ": unknown value '" + *s + "' (valid: current, initial)");
  }
  r.finish();
  auto check = [&](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) throw ConfigError(r.field(key) + ": " + msg);
  };
  check(e.rounds >= 0, "rounds", "must be nonnegative");
  check(e.batch_fraction > 0.0 && e.batch_fraction <= 1.0, "batch_fraction", "must lie in (0,1]");
  check(e.retrain_epochs >= 0, "retrain_epochs", "must be nonnegative");
  check(e.eval_every >= 1, "eval_every", "must be at least 1");
  check(e.n_folds >= 1, "n_folds", "must be at least 1");
  check(e.metrics.n_permutations >= 100, "n_permutations", "must be at least 100");
  check(e.metrics.pp_permutations >= 100, "pp_permutations", "must be at least 100");
  check(e.metrics.kernel.length_scale > 0.0, "kernel_length_scale", "must be positive");
  check(e.metrics.mmd_sample_cap >= 2, "mmd_sample_cap", "must be at least 2");
  check(e.metrics.grid_points >= 4, "grid_points", "must be at least 4");
}

inline void parse_output(const json& j, OutputConfig& o) {
  FieldReader r(j, "output");
  r.read("dir", o.dir);
  r.read("checkpoints", o.checkpoints);
  r.read("snapshots", o.snapshots);
  r.finish();
}

inline json toml_to_json(const toml::node& n) {
  if (auto t = n.as_table()) {
    json out = json::object();
    for (auto&& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (auto a = n.as_array()) {
    json out = json::array();
    for (auto&& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (auto v = n.as_string()) return v->get();
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_boolean()) return v->get();
  std::ostringstream where;
  where << n.source().begin;
  throw ConfigError("unsupported TOML value (dates and times are not accepted) at " + where.str());
}

}  // namespace detail

/// Parse and validate a configuration tree. Missing sections fall back to one
/// overlapping synthetic dataset, an MLP and the Wachter generator.
inline RunConfig parse_config(const nlohmann::json& root) {
  using namespace detail;
  if (!root.is_object()) throw ConfigError("config: expected a table at the top level");
  static const std::set<std::string> sections{"data", "model", "generators", "experiment", "output", "resolved_models"};
  for (auto it = root.begin(); it != root.end(); ++it)
    if (!sections.count(it.key())) throw ConfigError(it.key() + ": unknown section");
  RunConfig c;
  for (const auto& [node, path] : section_items(root, "data")) c.data.push_back(parse_data(*node, path));
  for (const auto& [node, path] : section_items(root, "model")) c.models.push_back(parse_model(*node, path));
  for (const auto& [node, path] : section_items(root, "generators")) c.generators.push_back(parse_generator(*node, path));
  if (auto it = root.find("experiment"); it != root.end() && !it->is_null()) parse_experiment(*it, c);
  if (auto it = root.find("output"); it != root.end() && !it->is_null()) parse_output(*it, c.output);
  if (c.data.empty()) c.data.push_back(DataConfig{});
  if (c.models.empty()) c.models.push_back(ModelEntry{});
  if (c.generators.empty()) c.generators.push_back(GeneratorSpec{});

  auto unique_labels = [](const auto& items, const std::string& section) {
    std::set<std::string> names;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (!names.insert(items[i].label()).second)
        throw ConfigError(section + "[" + std::to_string(i) + "].name: duplicate label '" + items[i].label() + "'");
  };
  unique_labels(c.data, "data");
  unique_labels(c.models, "model");
  unique_labels(c.generators, "generators");
  return c;
}

/// Parse TOML or JSON text; `format` is "toml" or "json".
inline RunConfig parse_config_text(const std::string& text, const std::string& format) {
  if (format == "json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return parse_config(j);
  }
  if (format == "toml") {
    toml::table t;
    try {
      t = toml::parse(text);
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << "config: malformed TOML: " << e.description() << " (at " << e.source().begin << ")";
      throw ConfigError(os.str());
    }
    return parse_config(detail::toml_to_json(t));
  }
  throw ConfigError("config: unknown format '" + format + "' (valid: toml, json)");
}

/// Format is chosen by extension: .json is JSON, anything else TOML.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto ext = std::filesystem::path(path).extension().string();
  return parse_config_text(buf.str(), ext == ".json" ? "json" : "toml");
}

inline nlohmann::json to_json(const DataConfig& d) {
  nlohmann::json j{{"name", d.label()},
                   {"source", d.source == DataSource::synthetic ? "synthetic" : "csv"},
                   {"seed", d.seed},
                   {"test_fraction", d.test_fraction},
                   {"standardize", d.standardize},
                   {"real_world", d.is_real_world()},
                   {"latent_dim", d.latent_dim()}};
  if (d.source == DataSource::synthetic) {
    j["kind"] = to_string(d.synthetic);
    j["n"] = d.n;
    j["noise"] = d.effective_noise();
  } else {
    j["path"] = d.path;
    j["target"] = d.target;
    j["columns"] = d.columns;
    j["exclude"] = d.exclude;
    j["delimiter"] = std::string(1, d.delimiter);
    j["binarize_target"] = d.binarize_target;
    j["per_class"] = d.effective_per_class();
  }
  return j;
}

inline nlohmann::json to_json(const ModelEntry& m) {
  nlohmann::json j{{"kind", to_string(m.kind)}, {"name", m.label()}};
  auto put = [&](const char* k, const auto& v) {
    if (v) j[k] = *v;
  };
  put("hidden_dim", m.hidden_dim);
  put("hidden_layers", m.hidden_layers);
  put("dropout", m.dropout);
  put("members", m.members);
  put("epochs", m.epochs);
  put("batch_size", m.batch_size);
  put("learning_rate", m.learning_rate);
  if (m.optimizer) j["optimizer"] = *m.optimizer == OptimizerKind::adam ? "adam" : "sgd";
  return j;
}

inline nlohmann::json to_json(const GeneratorSpec& g) {
  nlohmann::json j{{"kind", to_string(g.kind)},
                   {"name", g.label()},
                   {"lambda1", g.lambda1},
                   {"lambda2", g.lambda2},
                   {"gamma", g.gamma},
                   {"k", g.k},
                   {"diversity_weight", g.diversity_weight},
                   {"max_iter", g.max_iter},
                   {"step_size", g.step_size},
                   {"greedy_delta", g.greedy_delta},
                   {"greedy_max_steps_per_feature", g.greedy_max_steps_per_feature},
                   {"init_jitter", g.init_jitter},
                   {"distance", to_string(g.distance)},
                   {"latent_yloss", to_string(g.latent_yloss)},
                   {"optimizer", to_string(g.optimizer)}};
  if (g.ext_cost) j["ext_cost"] = to_string(*g.ext_cost);
  return j;
}

inline nlohmann::json resolved_json(const ResolvedModel& r) {
  return {{"hidden_dim", r.arch.hidden_dim},
          {"hidden_layers", r.arch.hidden_layers},
          {"dropout", r.arch.dropout},
          {"members", r.arch.members},
          {"epochs", r.train.epochs},
          {"batch_size", r.train.batch_size},
          {"learning_rate", r.train.learning_rate},
          {"optimizer", r.train.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
}

/// The resolved configuration with every default written out. Parsing the
/// result yields an equivalent RunConfig.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  const auto& e = c.experiment;
  j["experiment"] = {{"rounds", e.rounds},
                     {"batch_fraction", e.batch_fraction},
                     {"retrain_epochs", e.retrain_epochs},
                     {"eval_every", e.eval_every},
                     {"n_folds", e.n_folds},
                     {"seed", e.master_seed},
                     {"split_seed", c.split_seed},
                     {"retrain_vae", e.retrain_vae},
                     {"n_permutations", e.metrics.n_permutations},
                     {"pp_permutations", e.metrics.pp_permutations},
                     {"kernel_length_scale", e.metrics.kernel.length_scale},
                     {"mmd_sample_cap", e.metrics.mmd_sample_cap},
                     {"grid_points", e.metrics.grid_points},
                     {"class_mmd_labels", e.metrics.class_labels == ClassMmdLabels::current ? "current" : "initial"}};
  j["data"] = nlohmann::json::array();
  for (const auto& d : c.data) j["data"].push_back(to_json(d));
  j["model"] = nlohmann::json::array();
  for (const auto& m : c.models) j["model"].push_back(to_json(m));
  j["generators"] = nlohmann::json::array();
  for (const auto& g : c.generators) j["generators"].push_back(to_json(g));
  j["output"] = {{"dir", c.output.dir}, {"checkpoints", c.output.checkpoints}, {"snapshots", c.output.snapshots}};
  j["resolved_models"] = nlohmann::json::array();
  for (const auto& d : c.data)
    for (const auto& m : c.models) {
      auto r = resolved_json(resolve_model(m, d.is_real_world()));
      r["dataset"] = d.label();
      r["model"] = m.label();
      j["resolved_models"].push_back(std::move(r));
    }
  return j;
}

/// Generate or load, split with the shared split seed, and standardize with
/// training-split statistics.
inline DatasetEntry build_dataset(const DataConfig& c, std::uint64_t split_seed, std::size_t index = 0) {
  Dataset d = [&] {
    if (c.source == DataSource::synthetic) return make_synthetic(c.synthetic, c.n, c.effective_noise(), c.seed);
    CsvOptions opt;
    opt.delimiter = c.delimiter;
    opt.binarize_target = c.binarize_target;
    opt.exclude_columns = c.exclude;
    auto loaded = load_csv(c.path, c.target, c.columns, opt);
    return undersample_balance(loaded.dataset, c.effective_per_class(), c.seed);
  }();
  d.set_split(make_split(d, c.test_fraction, derive_seed(split_seed, 0x5B, index)));
  if (c.standardize) d = apply_standardizer(d, fit_standardizer(d));
  return {c.label(), std::move(d), c.is_real_world()};
}

}  // namespace recourse
