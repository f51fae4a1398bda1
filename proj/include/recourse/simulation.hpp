#pragma once

#include "recourse/data.hpp"
#include "recourse/generators.hpp"
#include "recourse/metrics.hpp"
#include "recourse/network.hpp"
#include "recourse/vae.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <tuple>

namespace recourse {

enum class ClassMmdLabels { current, initial };

struct MetricsConfig {
  KernelSpec kernel;
  int n_permutations = 1000;
  int pp_permutations = 100;
  Index mmd_sample_cap = 1000;
  Index grid_points = 1000;
  /// Which labels define the classes for the class-conditional MMD.
  ClassMmdLabels class_labels = ClassMmdLabels::current;

  void validate() const {
    kernel.validate();
    if (n_permutations < 100) throw InvalidArgument("n_permutations must be at least 100");
    if (pp_permutations < 100) throw InvalidArgument("pp_permutations must be at least 100");
    if (mmd_sample_cap < 2) throw InvalidArgument("mmd_sample_cap must be at least 2");
    if (grid_points < 4) throw InvalidArgument("grid_points must be at least 4");
  }
};

struct ExperimentConfig {
  int rounds = 50;
  double batch_fraction = 0.05;
  int retrain_epochs = 10;
  int eval_every = 10;
  int n_folds = 5;
  std::uint64_t master_seed = 42;
  bool retrain_vae = true;
  MetricsConfig metrics;
  /// Cap on concurrently running cells.
  unsigned threads = 1;

  void validate() const {
    if (rounds < 0) throw InvalidArgument("rounds must be nonnegative");
    if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) throw InvalidArgument("batch_fraction must lie in (0,1]");
    if (retrain_epochs < 0) throw InvalidArgument("retrain_epochs must be nonnegative");
    if (eval_every < 1) throw InvalidArgument("eval_every must be at least 1");
    if (n_folds < 1) throw InvalidArgument("n_folds must be at least 1");
    metrics.validate();
  }
};

/// ceil(fraction * pool), robust to the representation error of fractions
/// such as 0.05.
inline std::size_t batch_size_for(std::size_t pool, double fraction) {
  if (pool == 0) return 0;
  const double raw = fraction * double(pool);
  const auto b = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(b, 1, pool);
}

/// A split, preprocessed dataset ready for simulation.
struct DatasetEntry {
  std::string name;
  Dataset data;
  bool real_world = false;
};

/// A model kind plus optional overrides of the per-dataset presets.
struct ModelEntry {
  ModelKind kind = ModelKind::mlp;
  std::string name;
  std::optional<Index> hidden_dim;
  std::optional<Index> hidden_layers;
  std::optional<double> dropout;
  std::optional<Index> members;
  std::optional<int> epochs;
  std::optional<Index> batch_size;
  std::optional<double> learning_rate;
  std::optional<OptimizerKind> optimizer;

  std::string label() const { return name.empty() ? to_string(kind) : name; }
};

struct ResolvedModel {
  Architecture arch;
  TrainConfig train;  // initial training; retraining reuses all but epochs
};

/// Synthetic data: 1x32, batch 1, 100 epochs. Real-world: 2x64, dropout 0.1,
/// batch 500, 100 epochs. Adam at 1e-3 throughout.
inline ResolvedModel resolve_model(const ModelEntry& m, bool real_world) {
  ResolvedModel r;
  r.arch = real_world ? Architecture::real_world(m.kind) : Architecture::synthetic(m.kind);
  r.train.epochs = 100;
  r.train.batch_size = real_world ? 500 : 1;
  r.train.learning_rate = 1e-3;
  r.train.optimizer = OptimizerKind::adam;
  if (m.hidden_dim) r.arch.hidden_dim = *m.hidden_dim;
  if (m.hidden_layers) r.arch.hidden_layers = *m.hidden_layers;
  if (m.dropout) r.arch.dropout = *m.dropout;
  if (m.members) r.arch.members = *m.members;
  if (m.epochs) r.train.epochs = *m.epochs;
  if (m.batch_size) r.train.batch_size = *m.batch_size;
  if (m.learning_rate) r.train.learning_rate = *m.learning_rate;
  if (m.optimizer) r.train.optimizer = *m.optimizer;
  return r;
}

struct VaeSetup {
  VaeArchitecture arch;
  VaeTrainConfig train;
};

inline VaeSetup resolve_vae(bool real_world) {
  VaeSetup v;
  v.arch = real_world ? VaeArchitecture::real_world() : VaeArchitecture::synthetic();
  v.train.epochs = real_world ? 250 : 100;
  v.train.batch_size = 1;
  v.train.learning_rate = 1e-3;
  return v;
}

struct ExperimentRecord {
  std::string dataset;
  std::string model;
  std::string generator;
  int fold = 0;
  std::uint64_t seed = 0;
  std::vector<MetricReport> reports;
  std::vector<std::vector<Index>> batches;
  std::vector<std::size_t> successes;  // written-back counterfactuals per round
  std::optional<Dataset> final_dataset;
  nlohmann::json initial_checkpoint;
  nlohmann::json final_checkpoint;
  std::vector<std::string> warnings;
  bool failed = false;
  std::string error;
};

namespace detail {

enum : std::uint64_t {
  kTagFold = 0xF0,
  kTagModel = 0xA1,
  kTagVae = 0xA2,
  kTagExperiment = 0xA3,
  kTagBatch = 0xB0,
  kTagSearch = 0xB1,
  kTagPick = 0xB2,
  kTagRetrain = 0xB3,
  kTagVaeRetrain = 0xB4,
  kTagMmd = 0xC0,
  kTagPp = 0xC1,
};

inline std::vector<Index> sample_without_replacement(const std::vector<Index>& pool, std::size_t k, Rng& rng) {
  std::vector<Index> v = pool;
  k = std::min(k, v.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
    std::swap(v[i], v[pick(rng)]);
  }
  v.resize(k);
  std::sort(v.begin(), v.end());
  return v;
}

inline Matrix capped_rows(const Matrix& x, const std::vector<Index>& rows, Index cap, std::uint64_t seed) {
  if (Index(rows.size()) <= cap) return select_rows(x, rows);
  Rng rng(seed);
  return select_rows(x, sample_without_replacement(rows, std::size_t(cap), rng));
}

inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, unsigned(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

struct ExperimentState {
  Dataset data;
  Classifier model;
  std::optional<VAEModel> vae;
  Vector theta0;
  Vector theta_prev;
  double last_delta = 0.0;
  std::size_t generator_index = 0;
  ExperimentRecord record;
  bool finished = false;
};

inline Vector training_labels(const Dataset& d, const std::vector<Index>& rows) { return d.labels_of(rows); }

inline std::optional<Vector> target_class_mean(const Dataset& d) {
  Vector sum = Vector::Zero(d.dim());
  Index count = 0;
  for (Index i = 0; i < d.size(); ++i)
    if (d.is_train(i) && d.labels()[std::size_t(i)] == 1) {
      sum += d.features().row(i).transpose();
      ++count;
    }
  if (count == 0) return std::nullopt;
  return sum / double(count);
}

}  // namespace detail

/// Everything shared by the experiments of one (dataset, model, fold) cell.
struct CellContext {
  const DatasetEntry* dataset = nullptr;
  std::string model_name;
  const Classifier* initial_model = nullptr;
  const VAEModel* initial_vae = nullptr;  // required iff some generator searches latent space
  TrainConfig retrain;
  VaeTrainConfig vae_retrain;
  ExperimentConfig cfg;
  int fold = 0;
  std::uint64_t fold_seed = 0;
};

/// Compute the metric suite for the current state of an experiment.
inline MetricReport evaluate_state(const Dataset& data, const Matrix& features_t0, const Classifier& model_t0,
                                   const Classifier& model, const Vector& theta0, double last_delta, int round,
                                   const MetricsConfig& mc, std::uint64_t seed) {
  using namespace detail;
  MetricReport r;
  r.round = round;
  const Matrix& x = data.features();

  auto class_mmd = [&](int cls, std::uint64_t tag) {
    const auto now = mc.class_labels == ClassMmdLabels::current ? data.rows_with_label(cls)
                                                                 : data.rows_with_label_t0(cls);
    const auto before = data.rows_with_label_t0(cls);
    TestResult res{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    if (now.size() < 2 || before.size() < 2) return res;
    const Matrix a = capped_rows(x, now, mc.mmd_sample_cap, derive_seed(seed, kTagMmd, tag * 2));
    const Matrix b = capped_rows(features_t0, before, mc.mmd_sample_cap, derive_seed(seed, kTagMmd, tag * 2 + 1));
    return mmd_permutation_test(a, b, mc.kernel, mc.n_permutations, derive_seed(seed, kTagMmd, tag * 2 + 7));
  };
  r.mmd_positive = class_mmd(1, std::uint64_t(round) * 4 + 1);
  r.mmd_negative = class_mmd(0, std::uint64_t(round) * 4 + 2);

  Matrix points;
  if (data.dim() == 2) {
    points = grid_points(feature_extrema(x), mc.grid_points);
  } else {
    std::vector<Index> all(static_cast<std::size_t>(data.size()));
    std::iota(all.begin(), all.end(), Index{0});
    points = capped_rows(x, all, mc.mmd_sample_cap, derive_seed(seed, kTagPp, std::uint64_t(round) * 2));
  }
  r.pp_mmd = pp_mmd_test(model_t0, model, points, mc.kernel, mc.pp_permutations,
                         derive_seed(seed, kTagPp, std::uint64_t(round) * 2 + 1));
  r.disagreement = disagreement(model_t0, model, x);
  r.decisiveness = decisiveness(model, x);
  const Vector theta = flatten_params(model);
  r.perturbation = last_delta;
  r.perturbation_cumulative = param_perturbation(theta, theta0);
  const auto test = data.rows_where(Split::test);
  if (!test.empty()) {
    std::vector<int> yt;
    for (Index i : test) yt.push_back(data.labels()[std::size_t(i)]);
    r.fscore = fscore(model, data.features_of(test), yt);
  } else {
    r.fscore = std::numeric_limits<double>::quiet_NaN();
  }
  r.n_recoursed = data.recoursed_count();
  return r;
}

/// Run every generator of one cell in lockstep. Each round draws one
/// candidate batch from the intersection of the experiments' pools.
inline std::vector<ExperimentRecord> run_cell(const CellContext& ctx, const std::vector<GeneratorSpec>& generators) {
  using namespace detail;
  if (ctx.dataset == nullptr || ctx.initial_model == nullptr) throw InvalidArgument("cell needs a dataset and model");
  ctx.cfg.validate();
  for (const auto& g : generators) g.validate();
  const Dataset& data0 = ctx.dataset->data;
  const Matrix features_t0 = data0.features();
  const Vector theta0 = flatten_params(*ctx.initial_model);
  const int T = ctx.cfg.rounds;

  std::vector<ExperimentState> states;
  for (std::size_t g = 0; g < generators.size(); ++g) {
    ExperimentState s{data0, *ctx.initial_model, std::nullopt, theta0, theta0, 0.0, g, {}};
    if (generators[g].in_latent_space()) {
      if (ctx.initial_vae == nullptr) throw InvalidArgument("latent-space generator requires a trained VAE");
      s.vae = *ctx.initial_vae;
    }
    auto& rec = s.record;
    rec.dataset = ctx.dataset->name;
    rec.model = ctx.model_name;
    rec.generator = generators[g].label();
    rec.fold = ctx.fold;
    rec.seed = derive_seed(ctx.fold_seed, kTagExperiment, g);
    rec.initial_checkpoint = to_json(s.model);
    states.push_back(std::move(s));
  }

  auto evaluate = [&](ExperimentState& s, int round) {
    s.record.reports.push_back(evaluate_state(s.data, features_t0, *ctx.initial_model, s.model, s.theta0,
                                              s.last_delta, round, ctx.cfg.metrics, s.record.seed));
  };
  auto fail = [](ExperimentState& s, const std::string& what) {
    s.record.failed = true;
    s.record.error = what;
  };

  for (auto& s : states) {
    try {
      evaluate(s, 0);
    } catch (const std::exception& e) {
      fail(s, std::string("evaluation at round 0: ") + e.what());
    }
  }

  const auto train_rows = data0.rows_where(Split::train);
  for (int t = 0; t < T; ++t) {
    std::vector<ExperimentState*> active;
    for (auto& s : states)
      if (!s.record.failed && !s.finished) active.push_back(&s);
    if (active.empty()) break;

    std::vector<Index> pool = active.front()->data.recourse_pool();
    for (std::size_t a = 1; a < active.size(); ++a) {
      const auto other = active[a]->data.recourse_pool();
      std::vector<Index> both;
      std::set_intersection(pool.begin(), pool.end(), other.begin(), other.end(), std::back_inserter(both));
      pool = std::move(both);
    }
    if (pool.empty()) {
      for (auto* s : active) s->record.warnings.push_back("candidate pool exhausted at round " + std::to_string(t));
      break;
    }
    Rng batch_rng(derive_seed(ctx.fold_seed, kTagBatch, std::uint64_t(t)));
    const auto batch = sample_without_replacement(pool, batch_size_for(pool.size(), ctx.cfg.batch_fraction), batch_rng);

    for (auto* s : active) {
      auto& rec = s->record;
      const auto& spec = generators[s->generator_index];
      try {
        rec.batches.push_back(batch);
        const auto mean = detail::target_class_mean(s->data);
        std::vector<std::pair<Index, Vector>> accepted;
        for (Index i : batch) {
          const std::uint64_t key = std::uint64_t(t) * std::uint64_t(data0.size()) + std::uint64_t(i);
          const Vector x = s->data.features().row(i).transpose();
          const auto res = generate(s->model, s->vae ? &*s->vae : nullptr, x, 1, spec, mean,
                                    derive_seed(rec.seed, kTagSearch, key));
          Rng pick_rng(derive_seed(rec.seed, kTagPick, key));
          std::uniform_int_distribution<int> pick(0, spec.k - 1);
          const int chosen = pick(pick_rng);
          if (res.converged[std::size_t(chosen)])
            accepted.emplace_back(i, res.counterfactuals.row(chosen).transpose());
        }
        for (const auto& [i, cf] : accepted) s->data.apply_recourse(i, cf);
        rec.successes.push_back(accepted.size());

        const Matrix xt = s->data.features_of(train_rows);
        const Vector yt = training_labels(s->data, train_rows);
        if ((yt.array() == 0.0).count() == 0) {
          // Every negative training row has been recoursed: nothing left to retrain against.
          rec.warnings.push_back("no negative training rows left at round " + std::to_string(t) +
                                 "; stopping without retraining");
          s->last_delta = 0.0;
          evaluate(*s, t + 1);
          s->finished = true;
          continue;
        }
        TrainConfig rc = ctx.retrain;
        rc.epochs = ctx.cfg.retrain_epochs;
        rc.seed = derive_seed(rec.seed, kTagRetrain, std::uint64_t(t));
        train(s->model, xt, yt, rc, true);
        if (s->vae && ctx.cfg.retrain_vae) {
          VaeTrainConfig vc = ctx.vae_retrain;
          vc.epochs = ctx.cfg.retrain_epochs;
          vc.seed = derive_seed(rec.seed, kTagVaeRetrain, std::uint64_t(t));
          train_vae(*s->vae, xt, vc);
        }
        const Vector theta = flatten_params(s->model);
        s->last_delta = param_perturbation(theta, s->theta_prev);
        s->theta_prev = theta;
        if ((t + 1) % ctx.cfg.eval_every == 0 || t + 1 == T) evaluate(*s, t + 1);
      } catch (const NumericalError& e) {
        std::ostringstream os;
        os << e.what() << " (round " << t << ", retraining epoch " << e.step() << ")";
        fail(*s, os.str());
      } catch (const std::exception& e) {
        fail(*s, std::string(e.what()) + " (round " + std::to_string(t) + ")");
      }
    }
  }

  std::vector<ExperimentRecord> out;
  for (auto& s : states) {
    s.record.final_dataset = s.data;
    s.record.final_checkpoint = to_json(s.model);
    out.push_back(std::move(s.record));
  }
  return out;
}

/// A single-generator cell.
inline ExperimentRecord run_experiment(const CellContext& ctx, const GeneratorSpec& spec) {
  return std::move(run_cell(ctx, {spec}).front());
}

struct GridResult {
  std::vector<ExperimentRecord> records;
  std::vector<std::string> errors;  // failures before any experiment started
};

/// Train the t=0 model for every (dataset, model) pair, then run all folds.
/// Records are ordered by (dataset, model, fold, generator) regardless of
/// `cfg.threads`.
inline GridResult run_grid(const std::vector<DatasetEntry>& datasets, const std::vector<ModelEntry>& models,
                           const std::vector<GeneratorSpec>& generators, const ExperimentConfig& cfg,
                           const std::function<void(const std::string&)>& log = {}) {
  using namespace detail;
  cfg.validate();
  if (generators.empty()) throw InvalidArgument("at least one generator is required");
  for (const auto& g : generators) g.validate();
  const bool needs_vae = std::any_of(generators.begin(), generators.end(),
                                     [](const GeneratorSpec& g) { return g.in_latent_space(); });
  std::mutex log_mutex;
  auto note = [&](const std::string& s) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(s);
  };

  const std::size_t nd = datasets.size(), nm = models.size();
  std::vector<std::optional<VAEModel>> vaes(nd);
  std::vector<VaeSetup> vae_setups(nd);
  std::vector<std::string> vae_errors(nd);
  if (needs_vae) {
    parallel_for(nd, cfg.threads, [&](std::size_t di) {
      const auto& ds = datasets[di];
      vae_setups[di] = resolve_vae(ds.real_world);
      auto setup = vae_setups[di];
      setup.train.seed = derive_seed(cfg.master_seed, kTagVae, di);
      try {
        VAEModel v = VAEModel::build(ds.data.dim(), setup.arch, setup.train.seed);
        train_vae(v, ds.data.features_of(ds.data.rows_where(Split::train)), setup.train);
        vaes[di] = std::move(v);
        note("trained VAE for " + ds.name);
      } catch (const std::exception& e) {
        vae_errors[di] = std::string("VAE training failed for ") + ds.name + ": " + e.what();
      }
    });
  }

  std::vector<std::optional<Classifier>> initial(nd * nm);
  std::vector<ResolvedModel> resolved(nd * nm);
  std::vector<std::string> init_errors(nd * nm);
  parallel_for(nd * nm, cfg.threads, [&](std::size_t c) {
    const auto& ds = datasets[c / nm];
    resolved[c] = resolve_model(models[c % nm], ds.real_world);
    TrainConfig tc = resolved[c].train;
    tc.seed = derive_seed(derive_seed(cfg.master_seed, kTagModel, c / nm), kTagModel, c % nm);
    resolved[c].train.seed = tc.seed;
    try {
      Classifier m = build_classifier(resolved[c].arch, ds.data.dim(), tc.seed);
      const auto rows = ds.data.rows_where(Split::train);
      train(m, ds.data.features_of(rows), ds.data.labels_of(rows), tc, false);
      initial[c] = std::move(m);
      note("trained " + models[c % nm].label() + " on " + ds.name);
    } catch (const std::exception& e) {
      init_errors[c] = "initial training failed for " + models[c % nm].label() + " on " + ds.name + ": " + e.what();
    }
  });

  const std::size_t nf = std::size_t(cfg.n_folds);
  std::vector<std::vector<ExperimentRecord>> cells(nd * nm * nf);
  parallel_for(cells.size(), cfg.threads, [&](std::size_t c) {
    const std::size_t pair = c / nf, fold = c % nf, di = pair / nm, mi = pair % nm;
    CellContext ctx;
    ctx.dataset = &datasets[di];
    ctx.model_name = models[mi].label();
    ctx.cfg = cfg;
    ctx.fold = int(fold);
    ctx.fold_seed = derive_seed(derive_seed(derive_seed(cfg.master_seed, kTagFold, di), kTagFold, mi), kTagFold, fold);
    ctx.retrain = resolved[pair].train;
    ctx.vae_retrain = vae_setups[di].train;
    std::string error = init_errors[pair];
    if (error.empty() && needs_vae && !vaes[di]) error = vae_errors[di];
    if (error.empty()) {
      ctx.initial_model = &*initial[pair];
      ctx.initial_vae = vaes[di] ? &*vaes[di] : nullptr;
      try {
        cells[c] = run_cell(ctx, generators);
      } catch (const std::exception& e) {
        error = e.what();
      }
    }
    if (!error.empty()) {
      for (std::size_t g = 0; g < generators.size(); ++g) {
        ExperimentRecord r;
        r.dataset = ctx.dataset->name;
        r.model = ctx.model_name;
        r.generator = generators[g].label();
        r.fold = ctx.fold;
        r.seed = derive_seed(ctx.fold_seed, kTagExperiment, g);
        r.failed = true;
        r.error = error;
        cells[c].push_back(std::move(r));
      }
    }
    note(ctx.dataset->name + " / " + ctx.model_name + " fold " + std::to_string(fold) + " done");
  });

  GridResult out;
  for (auto& e : vae_errors)
    if (!e.empty()) out.errors.push_back(e);
  for (auto& e : init_errors)
    if (!e.empty()) out.errors.push_back(e);
  for (auto& cell : cells)
    for (auto& r : cell) out.records.push_back(std::move(r));
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and CSV output

struct SummaryRow {
  std::string dataset;
  std::string model;
  std::string generator;
  int round = 0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

/// Mean and sample standard deviation across folds. NaN values are skipped.
inline std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::string, int, std::string>;
  std::map<Key, std::vector<double>> groups;
  std::map<Key, std::size_t> order;
  for (const auto& r : records)
    for (const auto& rep : r.reports)
      for (const auto& row : rep.rows()) {
        Key k{r.dataset, r.model, r.generator, rep.round, row.metric};
        auto& g = groups[k];
        if (std::isfinite(row.value)) g.push_back(row.value);
      }
  std::vector<SummaryRow> out;
  for (auto& [k, values] : groups) {
    std::sort(values.begin(), values.end());
    SummaryRow s{std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), std::get<4>(k), 0.0, 0.0,
                 values.size()};
    if (values.empty()) {
      s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
    } else {
      s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / double(values.size() - 1));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_metrics_csv(std::ostream& os, const std::vector<ExperimentRecord>& records) {
  os << "dataset,model,generator,fold,round,metric,value,p_value\n";
  for (const auto& r : records)
    for (const auto& rep : r.reports)
      for (const auto& row : rep.rows()) {
        os << r.dataset << ',' << r.model << ',' << r.generator << ',' << r.fold << ',' << rep.round << ','
           << row.metric << ',' << format_double(row.value) << ',';
        if (row.p_value) os << format_double(*row.p_value);
        os << '\n';
      }
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "dataset,model,generator,round,metric,mean,std,n\n";
  for (const auto& s : rows)
    os << s.dataset << ',' << s.model << ',' << s.generator << ',' << s.round << ',' << s.metric << ','
       << format_double(s.mean) << ',' << format_double(s.std) << ',' << s.n << '\n';
}

/// Look up a metric value from a record's report at `round`.
inline std::optional<MetricReport> report_at(const ExperimentRecord& r, int round) {
  for (const auto& rep : r.reports)
    if (rep.round == round) return rep;
  return std::nullopt;
}

}  // namespace recourse
