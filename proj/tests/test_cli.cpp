#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "imgsmac/cli/commands.hpp"

using namespace imgsmac;
using namespace imgsmac::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("imgsmac_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_config(const fs::path& dir, const std::string& extra = "") {
  const auto p = dir / "run.cfg";
  std::ofstream f(p);
  f << "env.kind = traffic_junction\n"
       "env.difficulty = easy\n"
       "env.agents = 3\n"
       "env.max_steps = 8\n"
       "model.hidden = 8\n"
       "model.message_dim = 4\n"
       "model.prototypes = 6\n"
       "train.epochs = 2\n"
       "train.samples_per_epoch = 40\n"
       "train.threads = 1\n"
       "analysis.episodes = 10\n"
       "run.seeds = 0\n"
       "run.out = "
    << (dir / "out").string() << "\n"
    << extra;
  return p.string();
}

struct Captured {
  std::ostringstream out, err;
  Io io() { return Io{out, err}; }
};

}  // namespace

TEST(Config, RoundTripOfDefaultsAndChanges) {
  ExperimentConfig c;
  c.model.hidden = 17;
  c.train.lambda1 = 0.25;
  c.analysis.budgets = {1.0, 0.5};
  c.seeds = {3, 4};
  c.train.seeds = 2;
  const auto text = serialize_config(c);
  const auto back = parse_config_string(text);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(back.model.hidden, 17u);
  EXPECT_EQ(back.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(parse_config_string(serialize_config(ExperimentConfig{}, true)).out, ExperimentConfig{}.out);
}

TEST(Config, UnknownDuplicateAndMalformedKeysFail) {
  EXPECT_THROW(parse_config_string("model.hiden = 4\n"), ConfigError);
  EXPECT_THROW(parse_config_string("model.hidden = 4\nmodel.hidden = 5\n"), ConfigError);
  EXPECT_THROW(parse_config_string("model.hidden = four\n"), ConfigError);
  EXPECT_THROW(parse_config_string("just words\n"), ConfigError);
  try {
    parse_config_string("# comment\ntrain.budget = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.budget"), std::string::npos);
  }
}

TEST(Config, DifficultyResetsEnvironmentPreset) {
  const auto c = parse_config_string("env.difficulty = medium\n");
  EXPECT_EQ(c.env.grid, envs::preset(envs::EnvKind::traffic_junction, envs::Difficulty::medium).grid);
}

TEST(Cli, TrainAnalyzeEvalSweepProduceManifest) {
  const auto dir = fresh_dir("pipeline");
  CommandOptions o;
  o.config_path = write_config(dir);
  Captured c;
  ASSERT_EQ(run_command("train", o, c.io()), 0) << c.err.str();
  const auto out = dir / "out";
  EXPECT_TRUE(fs::exists(out / "checkpoint_pretrain_seed0.bin"));
  EXPECT_TRUE(fs::exists(out / "metrics_pretrain.csv"));

  ASSERT_EQ(run_command("analyze", o, c.io()), 0) << c.err.str();
  for (const char* f : {"mask.txt", "token_stats.csv", "effects.csv", "table1.csv", "bstar.json", "analysis.jsonl"})
    EXPECT_TRUE(fs::exists(out / "analysis_seed0" / f)) << f;

  Captured e;
  ASSERT_EQ(run_command("eval", o, e.io()), 0) << e.err.str();
  EXPECT_EQ(e.out.str().rfind("episodes 10 success ", 0), 0u);

  ASSERT_EQ(run_command("sweep", o, c.io()), 0) << c.err.str();
  EXPECT_TRUE(fs::exists(out / "sweep.csv"));
  EXPECT_TRUE(fs::exists(out / "sweep.svg"));

  std::ifstream mf(out / "manifest.json");
  const auto j = nlohmann::json::parse(mf);
  EXPECT_EQ(j["format_version"], kManifestVersion);
  ASSERT_EQ(j["checkpoints"].size(), 1u);
  EXPECT_EQ(j["checkpoints"][0]["hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(j["analysis"].contains("0"));
  EXPECT_FALSE(j["config"].get<std::string>().empty());
}

TEST(Cli, RefusesToOverwrite) {
  const auto dir = fresh_dir("overwrite");
  CommandOptions o;
  o.config_path = write_config(dir);
  Captured c;
  ASSERT_EQ(run_command("train", o, c.io()), 0);
  Captured again;
  EXPECT_EQ(run_command("train", o, again.io()), 2);
  EXPECT_NE(again.err.str().find("--overwrite"), std::string::npos);
  o.overwrite = true;
  EXPECT_EQ(run_command("train", o, again.io()), 0);
}

TEST(Cli, SilentPolicyAnalysisWarnsAndReportsBstarOne) {
  const auto dir = fresh_dir("silent");
  CommandOptions train;
  train.config_path = write_config(dir);
  Captured c;
  ASSERT_EQ(run_command("train", train, c.io()), 0);
  // no cars ever arrive, so nothing is emitted
  const auto silent_dir = dir / "silent";
  fs::create_directories(silent_dir);
  CommandOptions o;
  o.config_path = write_config(silent_dir, "env.arrival_prob = 0\n");
  o.checkpoints = {(dir / "out" / "checkpoint_pretrain_seed0.bin").string()};
  Captured a;
  ASSERT_EQ(run_command("analyze", o, a.io()), 0) << a.err.str();
  EXPECT_NE(a.err.str().find("warning"), std::string::npos);
  std::ifstream bj(silent_dir / "out" / "analysis_seed0" / "bstar.json");
  EXPECT_EQ(nlohmann::json::parse(bj)["bstar"].get<double>(), 1.0);
}

TEST(Cli, SweepWithOnlyFullBudgetHasOneRow) {
  const auto dir = fresh_dir("sweep1");
  CommandOptions o;
  o.config_path = write_config(dir, "analysis.budgets = 1\n");
  Captured c;
  ASSERT_EQ(run_command("train", o, c.io()), 0);
  Captured s;
  ASSERT_EQ(run_command("sweep", o, s.io()), 0) << s.err.str();
  std::ifstream f(dir / "out" / "sweep.csv");
  std::string header, row, extra;
  std::getline(f, header);
  std::getline(f, row);
  EXPECT_EQ(row.rfind("1,", 0), 0u);
  EXPECT_NE(row.find("unmasked"), std::string::npos);
  EXPECT_FALSE(static_cast<bool>(std::getline(f, extra)));
}

TEST(Cli, FinetuneWritesBudgetTaggedCheckpoint) {
  const auto dir = fresh_dir("finetune");
  CommandOptions o;
  o.config_path = write_config(dir, "train.finetune_epochs = 2\n");
  Captured c;
  ASSERT_EQ(run_command("train", o, c.io()), 0);
  ASSERT_EQ(run_command("analyze", o, c.io()), 0);
  o.checkpoints = {(dir / "out" / "checkpoint_pretrain_seed0.bin").string()};
  o.budget = 0.5;
  Captured f;
  ASSERT_EQ(run_command("finetune", o, f.io()), 0) << f.err.str();
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint_finetune_b0.5_seed0.bin"));
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics_finetune_b0.5.csv"));
}

TEST(Cli, MissingCheckpointIsConfigError) {
  const auto dir = fresh_dir("missing");
  CommandOptions o;
  o.config_path = write_config(dir);
  Captured c;
  EXPECT_EQ(run_command("eval", o, c.io()), 2);
  EXPECT_EQ(run_command("bogus", o, c.io()), 2);
}
