#include <nlohmann/json.hpp>
#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

/// Run the CLI with the given arguments; stdout and stderr are merged.
Result run(const std::string& args) {
  const std::string cmd = std::string("\"") + RECOURSE_CLI + "\" " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("recourse_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// The run directory is the last line printed by `simulate`.
fs::path run_dir_of(const Result& r) {
  std::istringstream in(r.out);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return last;
}

std::string minimal() { return std::string(RECOURSE_CONFIGS) + "/minimal.toml"; }

/// The split column of a snapshot CSV.
std::vector<std::string> split_column(const fs::path& snapshot) {
  std::ifstream in(snapshot);
  std::string line;
  std::vector<std::string> out;
  std::getline(in, line);
  while (std::getline(in, line)) out.push_back(line.substr(line.rfind(',') + 1));
  return out;
}

}  // namespace

TEST(Cli, ValidateDefaultsPrintsExperimentSetup) {
  const auto r = run("validate");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("T=50 batch_fraction=0.05 eval_every=10 n_folds=5"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\"resolved_models\""), std::string::npos);
}

TEST(Cli, ValidateRejectsBadThreshold) {
  const auto dir = scratch("gamma");
  const auto cfg = write_file(dir, "c.toml", "[[generators]]\nkind = \"wachter\"\ngamma = 1.5\n");
  const auto r = run("validate --config " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("gamma must lie in (0,1)"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, ValidateListsValidGeneratorKinds) {
  const auto dir = scratch("kind");
  const auto cfg = write_file(dir, "c.toml", "[[generators]]\nkind = \"foo\"\n");
  const auto r = run("validate --config " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("wachter, latent, dice, greedy, gravitational, claproar"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, MalformedConfigExitsTwoNamingTheField) {
  const auto dir = scratch("malformed");
  const auto cfg = write_file(dir, "c.toml", "[experiment]\nrounds = -3\n");
  const auto r = run("simulate --quiet --config " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("experiment.rounds"), std::string::npos) << r.out;
  const auto broken = write_file(dir, "b.toml", "[experiment\n");
  EXPECT_EQ(run("simulate --quiet --config " + broken.string()).code, 2);
  EXPECT_EQ(run("simulate --quiet --config " + (dir / "missing.toml").string()).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  fs::remove_all(dir);
}

TEST(Cli, MinimalSimulationWritesResults) {
  const auto dir = scratch("minimal");
  const auto r = run("simulate --quiet --threads 1 --config " + minimal() + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path run_dir = run_dir_of(r);
  for (const char* f : {"metrics.csv", "summary.csv", "config.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  std::istringstream metrics(read_file(run_dir / "metrics.csv"));
  std::string line;
  std::getline(metrics, line);
  EXPECT_EQ(line, "dataset,model,generator,fold,round,metric,value,p_value");
  int rows = 0;
  std::set<std::string> rounds;
  while (std::getline(metrics, line)) {
    ++rows;
    std::istringstream cells(line);
    std::string cell;
    for (int i = 0; i < 5 && std::getline(cells, cell, ','); ++i)
      if (i == 4) rounds.insert(cell);
  }
  EXPECT_GE(rows, 2);
  EXPECT_EQ(rounds, (std::set<std::string>{"0", "1", "2"}));

  const auto manifest = nlohmann::json::parse(read_file(run_dir / "manifest.json"));
  EXPECT_EQ(manifest["status"], "ok");
  EXPECT_EQ(manifest["run_id"], run_dir.filename().string());
  EXPECT_EQ(manifest["experiments"].size(), 1u);
  // The persisted config reproduces the validated one.
  const auto config = nlohmann::json::parse(read_file(run_dir / "config.json"));
  EXPECT_EQ(config, manifest["config"]);
  EXPECT_EQ(config["experiment"]["rounds"], 2);

  const auto plots = run("plot --results " + run_dir.string() + " --out " + (dir / "plots").string());
  EXPECT_EQ(plots.code, 0) << plots.out;
  EXPECT_TRUE(fs::exists(dir / "plots" / "overlapping__logistic__pp_mmd__bar.svg"));
  EXPECT_EQ(run("plot --results " + (dir / "nowhere").string() + " --out " + (dir / "p2").string()).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, SeedOverrideChangesSamplingButNotSplit) {
  const auto dir = scratch("seed");
  const auto a = run("simulate --quiet --seed 1 --config " + minimal() + " --out " + dir.string());
  const auto b = run("simulate --quiet --seed 2 --config " + minimal() + " --out " + dir.string());
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  const fs::path da = run_dir_of(a), db = run_dir_of(b);
  EXPECT_NE(da, db);
  const std::string snap = "snapshots/overlapping__logistic__wachter__fold0.csv";
  EXPECT_EQ(split_column(da / snap), split_column(db / snap));
  const auto ma = nlohmann::json::parse(read_file(da / "manifest.json"));
  const auto mb = nlohmann::json::parse(read_file(db / "manifest.json"));
  EXPECT_NE(ma["experiments"][0]["batches"], mb["experiments"][0]["batches"]);
  EXPECT_EQ(ma["config"]["experiment"]["seed"], 1);
  fs::remove_all(dir);
}

TEST(Cli, PartialFailureExitsOne) {
  const auto dir = scratch("partial");
  const auto cfg = write_file(dir, "c.toml", read_file(minimal()) + "\n[[generators]]\nkind = \"wachter\"\n"
                                                                       "name = \"diverging\"\nstep_size = 1e300\n");
  const auto r = run("simulate --quiet --config " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 1) << r.out;
  const auto manifest = nlohmann::json::parse(read_file(run_dir_of(r) / "manifest.json"));
  EXPECT_EQ(manifest["status"], "partial");
  EXPECT_EQ(manifest["experiments"][1]["status"], "failed");
  fs::remove_all(dir);
}
