#pragma once

#include "recourse/config.hpp"
#include "recourse/plot.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>

namespace recourse {

struct RunManifest {
  std::string run_id;
  std::string timestamp;  // UTC, ISO 8601
  nlohmann::json config;
  std::vector<std::string> artifacts;  // relative to the run directory
  double setup_seconds = 0.0;
  double grid_seconds = 0.0;
  double total_seconds = 0.0;
  std::string status;  // ok, partial, failed
  nlohmann::json experiments = nlohmann::json::array();
  std::vector<std::string> errors;

  nlohmann::json to_json() const {
    return {{"run_id", run_id},
            {"timestamp", timestamp},
            {"config", config},
            {"artifacts", artifacts},
            {"durations", {{"setup_seconds", setup_seconds}, {"grid_seconds", grid_seconds}, {"total_seconds", total_seconds}}},
            {"status", status},
            {"experiments", experiments},
            {"errors", errors}};
  }
};

inline std::string utc_timestamp(std::chrono::system_clock::time_point t, const char* fmt) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, fmt);
  return os.str();
}

/// Create `<root>/<timestamp>-<random hex>` and return its path and id.
inline std::pair<std::filesystem::path, std::string> create_run_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::ostringstream id;
    id << utc_timestamp(std::chrono::system_clock::now(), "%Y%m%dT%H%M%SZ") << '-' << std::hex << std::setw(8)
       << std::setfill('0') << (rd() & 0xffffffffu);
    const fs::path dir = root / id.str();
    if (fs::create_directory(dir)) return {dir, id.str()};
  }
  throw IoError("could not create a unique run directory under '" + root.string() + "'");
}

inline std::string experiment_stem(const ExperimentRecord& r) {
  return detail::file_token(r.dataset) + "__" + detail::file_token(r.model) + "__" + detail::file_token(r.generator) +
         "__fold" + std::to_string(r.fold);
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  os << text;
  if (!os) throw IoError("failed writing '" + p.string() + "'");
}

}  // namespace detail

/// Write metrics.csv, summary.csv, config.json, checkpoints/ and snapshots/
/// into `dir`. Fills in artifacts, experiments and status of `manifest`.
inline void write_results(const std::filesystem::path& dir, const RunConfig& cfg, const GridResult& grid,
                          RunManifest& manifest) {
  namespace fs = std::filesystem;
  std::ostringstream metrics, summary;
  write_metrics_csv(metrics, grid.records);
  write_summary_csv(summary, summarize(grid.records));
  detail::write_text(dir / "metrics.csv", metrics.str());
  detail::write_text(dir / "summary.csv", summary.str());
  detail::write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  manifest.artifacts = {"metrics.csv", "summary.csv", "config.json"};
  if (cfg.output.checkpoints) fs::create_directories(dir / "checkpoints");
  if (cfg.output.snapshots) fs::create_directories(dir / "snapshots");

  std::size_t failed = 0;
  for (const auto& r : grid.records) {
    const auto stem = experiment_stem(r);
    nlohmann::json e{{"dataset", r.dataset}, {"model", r.model}, {"generator", r.generator}, {"fold", r.fold},
                     {"seed", r.seed},       {"status", r.failed ? "failed" : "ok"},       {"warnings", r.warnings}};
    if (r.failed) {
      e["error"] = r.error;
      ++failed;
    }
    if (cfg.output.checkpoints && !r.initial_checkpoint.is_null()) {
      const auto a = "checkpoints/" + stem + "__initial.json";
      const auto b = "checkpoints/" + stem + "__final.json";
      detail::write_text(dir / a, r.initial_checkpoint.dump() + "\n");
      detail::write_text(dir / b, r.final_checkpoint.dump() + "\n");
      manifest.artifacts.push_back(a);
      manifest.artifacts.push_back(b);
    }
    if (cfg.output.snapshots && r.final_dataset) {
      const auto s = "snapshots/" + stem + ".csv";
      std::ostringstream os;
      r.final_dataset->write_csv(os);
      detail::write_text(dir / s, os.str());
      manifest.artifacts.push_back(s);
    }
    e["rounds_completed"] = r.batches.size();
    e["batches"] = r.batches;
    e["successes"] = r.successes;
    manifest.experiments.push_back(std::move(e));
  }
  manifest.errors = grid.errors;
  if (grid.records.empty() || failed == grid.records.size()) manifest.status = "failed";
  else if (failed > 0 || !grid.errors.empty()) manifest.status = "partial";
  else manifest.status = "ok";
  manifest.artifacts.push_back("manifest.json");
}

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  detail::write_text(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

}  // namespace recourse
