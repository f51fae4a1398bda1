// Command-line front end: simulate, plot, validate.

#include "recourse/recourse.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitInvalid = 2;

unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag) return std::max(1u, *flag);
  if (const char* env = std::getenv("RECOURSE_DYNAMICS_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return unsigned(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid RECOURSE_DYNAMICS_THREADS='" << env << "'\n";
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void print_overview(const recourse::RunConfig& c) {
  const auto& e = c.experiment;
  std::cout << "T=" << e.rounds << " batch_fraction=" << recourse::format_double(e.batch_fraction)
            << " eval_every=" << e.eval_every << " n_folds=" << e.n_folds << " seed=" << e.master_seed
            << " datasets=" << c.data.size() << " models=" << c.models.size()
            << " generators=" << c.generators.size() << "\n";
}

int cmd_validate(const std::string& path) {
  recourse::RunConfig cfg;
  try {
    cfg = path.empty() ? recourse::parse_config(nlohmann::json::object()) : recourse::load_config(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  print_overview(cfg);
  std::cout << recourse::to_json(cfg).dump(2) << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, std::optional<std::string> out, std::optional<unsigned> threads,
                 std::optional<std::uint64_t> seed, bool quiet) {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  recourse::RunConfig cfg;
  std::vector<recourse::DatasetEntry> datasets;
  try {
    cfg = recourse::load_config(config_path);
    if (seed) cfg.experiment.master_seed = *seed;
    cfg.experiment.threads = resolve_threads(threads);
    for (std::size_t i = 0; i < cfg.data.size(); ++i) {
      try {
        datasets.push_back(recourse::build_dataset(cfg.data[i], cfg.split_seed, i));
      } catch (const std::exception& e) {
        throw recourse::ConfigError("data[" + std::to_string(i) + "]: " + e.what());
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  fs::path dir;
  recourse::RunManifest manifest;
  try {
    auto [d, id] = recourse::create_run_directory(out.value_or(cfg.output.dir));
    dir = d;
    manifest.run_id = id;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  manifest.timestamp = recourse::utc_timestamp(std::chrono::system_clock::now(), "%Y-%m-%dT%H:%M:%SZ");
  manifest.config = recourse::to_json(cfg);
  if (!quiet) print_overview(cfg);

  const auto grid_start = std::chrono::steady_clock::now();
  recourse::GridResult grid;
  try {
    grid = recourse::run_grid(datasets, cfg.models, cfg.generators, cfg.experiment, [&](const std::string& s) {
      if (!quiet) std::cerr << s << "\n";
    });
  } catch (const std::exception& e) {
    grid.errors.push_back(e.what());
  }
  const auto grid_end = std::chrono::steady_clock::now();
  manifest.setup_seconds = std::chrono::duration<double>(grid_start - start).count();
  manifest.grid_seconds = std::chrono::duration<double>(grid_end - grid_start).count();

  try {
    recourse::write_results(dir, cfg, grid, manifest);
    manifest.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    recourse::write_manifest(dir, manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  for (const auto& e : grid.errors) std::cerr << "error: " << e << "\n";
  for (const auto& r : grid.records)
    if (r.failed) std::cerr << "failed: " << recourse::experiment_stem(r) << ": " << r.error << "\n";
  std::cout << dir.string() << "\n";
  return manifest.status == "ok" ? kExitOk : kExitPartial;
}

int cmd_plot(const std::string& results, const std::string& out) {
  std::vector<recourse::SummaryRow> rows;
  try {
    rows = recourse::read_summary_csv((std::filesystem::path(results) / "summary.csv").string());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  try {
    const auto files = recourse::plot_summary(rows, out);
    for (const auto& f : files) std::cout << f.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate the dynamics of algorithmic recourse"};
  app.require_subcommand(1);

  std::string sim_config;
  std::optional<std::string> sim_out;
  std::optional<unsigned> sim_threads;
  std::optional<std::uint64_t> sim_seed;
  bool quiet = false;
  auto* sim = app.add_subcommand("simulate", "Run the experiment grid described by a config file");
  sim->add_option("--config", sim_config, "TOML or JSON config")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "Parent directory for the run directory (default: output.dir)");
  sim->add_option("--threads", sim_threads, "Maximum concurrent cells")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Override the master seed (the train/test split is unaffected)");
  sim->add_flag("--quiet", quiet, "Suppress progress output");

  std::string plot_results, plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG charts from a run directory");
  plot->add_option("--results", plot_results, "Run directory containing summary.csv")->required();
  plot->add_option("--out", plot_out, "Output directory for SVG files")->required();

  std::string val_config;
  auto* val = app.add_subcommand("validate", "Print the resolved config, exit 0 iff valid");
  val->add_option("--config", val_config, "TOML or JSON config (empty: defaults)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  if (*sim) return cmd_simulate(sim_config, sim_out, sim_threads, sim_seed, quiet);
  if (*plot) return cmd_plot(plot_results, plot_out);
  if (*val) return cmd_validate(val_config);
  return kExitInvalid;
}
