#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "imgsmac/analysis.hpp"
#include "imgsmac/cli/config.hpp"
#include "imgsmac/cli/manifest.hpp"
#include "imgsmac/training/trainer.hpp"

namespace imgsmac::cli {

namespace fs = std::filesystem;

struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool deterministic = false;
  bool overwrite = false;
  std::optional<double> budget;
  std::vector<std::string> masks;
  std::vector<std::string> checkpoints;
  std::vector<std::string> finetuned;  // B=PATH
};

struct Io {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

inline ExperimentConfig resolve_config(const CommandOptions& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.seed) {
    cfg.seeds = {*o.seed};
    cfg.train.seeds = 1;
  }
  if (o.deterministic) cfg.train.threads = 1;
  if (o.budget) cfg.train.budget = *o.budget;
  cfg.validate();
  return cfg;
}

inline std::string budget_tag(double b) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", b);
  return buf;
}

inline std::string checkpoint_name(training::Phase phase, std::uint64_t seed, double budget = 1.0) {
  if (phase == training::Phase::finetune)
    return "checkpoint_finetune_b" + budget_tag(budget) + "_seed" + std::to_string(seed) + ".bin";
  return "checkpoint_" + training::to_string(phase) + "_seed" + std::to_string(seed) + ".bin";
}

inline std::string metrics_name(training::Phase phase, double budget = 1.0) {
  if (phase == training::Phase::finetune) return "metrics_finetune_b" + budget_tag(budget) + ".csv";
  return "metrics_" + training::to_string(phase) + ".csv";
}

inline std::string analysis_dir_name(std::uint64_t seed) { return "analysis_seed" + std::to_string(seed); }

/// Refuses to replace an existing output unless overwriting was requested.
inline void claim_output(const fs::path& p, bool overwrite) {
  if (fs::exists(p) && !overwrite)
    throw ConfigError("refusing to overwrite existing output '" + p.string() + "' (pass --overwrite)");
}

template <typename F>
auto with_precision(Precision p, F&& f) {
  if (p == Precision::f32) return f.template operator()<float>();
  return f.template operator()<double>();
}

inline agents::ModelConfig bound_model(const ExperimentConfig& cfg) {
  return training::bind_model(cfg.model, *envs::make_environment(cfg.env));
}

inline numerics::Checkpoint read_checkpoint(const std::string& path, std::string* hash = nullptr) {
  require(fs::exists(path), "checkpoint '" + path + "' does not exist");
  const auto bytes = numerics::read_file_bytes(path);
  if (hash) *hash = numerics::content_hash(bytes);
  return numerics::decode_checkpoint(bytes);
}

/// Mask file plus its cluster sidecar (continuous messages).
struct LoadedMask {
  agents::VocabMask mask;
  std::optional<agents::ClusterTable> clusters;
};

inline LoadedMask load_mask_with_clusters(const std::string& path) {
  LoadedMask lm;
  lm.mask = agents::load_mask(path);
  const std::string side = path + ".clusters";
  if (fs::exists(side)) {
    std::ifstream in(side);
    lm.clusters = agents::read_clusters(in);
  }
  return lm;
}

inline std::string default_checkpoint(const ExperimentConfig& cfg, const CommandOptions& o) {
  if (!o.checkpoints.empty()) return o.checkpoints.front();
  return (fs::path(cfg.out) / checkpoint_name(training::Phase::pretrain, cfg.seeds.front())).string();
}

inline analysis::EvalOptions eval_options(const ExperimentConfig& cfg) {
  analysis::EvalOptions opts;
  opts.episodes = cfg.analysis.episodes;
  opts.seed = cfg.analysis.eval_seed;
  opts.threads = cfg.train.threads;
  return opts;
}

template <Real Scalar>
int train_loop(training::Trainer<Scalar>& tr, std::size_t epochs, training::MetricsWriter& writer, const fs::path& ckpt,
               RunManifest& manifest, const std::string& ckpt_rel, Io io) {
  const std::size_t every = std::max<std::size_t>(1, epochs / 20);
  for (std::size_t e = 0; e < epochs; ++e) {
    training::EpochMetrics m;
    try {
      m = tr.run_epoch();
    } catch (const NumericError& err) {
      const fs::path aborted = ckpt.string() + ".aborted";
      tr.save(aborted.string());
      io.err << "error: " << err.what() << "\nlast good parameters saved to " << aborted.string() << "\n";
      return 3;
    }
    writer.append(m);
    if (e % every == 0 || e + 1 == epochs) {
      char line[160];
      std::snprintf(line, sizeof(line), "seed %llu %s epoch %zu success %.3f reward %.3f m_avg %.3f\n",
                    static_cast<unsigned long long>(tr.seed()), m.phase.c_str(), m.epoch, m.success, m.mean_reward,
                    m.m_avg);
      io.out << line;
    }
  }
  const std::string hash = tr.save(ckpt.string());
  manifest.add_checkpoint(training::to_string(tr.phase()), tr.seed(),
                          training::phase_settings(tr.config(), tr.phase()).budget, ckpt_rel, hash);
  return 0;
}

/// Pretrain or tri-objective training for every configured seed.
inline int cmd_train(const CommandOptions& o, Io io = {}) {
  const auto cfg = resolve_config(o);
  require(cfg.train.schedule != training::Phase::finetune,
          "train.schedule = finetune is run by the finetune subcommand");
  const auto phases = training::schedule(cfg.train, false);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  const auto phase = phases.front().phase;
  const std::string metrics_rel = metrics_name(phase);
  claim_output(dir / metrics_rel, o.overwrite);
  for (auto s : cfg.seeds) claim_output(dir / checkpoint_name(phase, s), o.overwrite);
  if (o.overwrite) fs::remove(dir / metrics_rel);

  RunManifest manifest(dir);
  manifest.set_config(serialize_config(cfg));
  training::MetricsWriter writer((dir / metrics_rel).string());
  manifest.add_metrics(metrics_rel);
  int rc = 0;
  for (auto seed : cfg.seeds) {
    rc = with_precision(cfg.precision, [&]<typename S>() {
      training::Trainer<S> tr(cfg.env, cfg.model, cfg.train, phase, seed);
      const std::string rel = checkpoint_name(phase, seed);
      return train_loop(tr, phases.front().epochs, writer, dir / rel, manifest, rel, io);
    });
    if (rc != 0) break;
  }
  manifest.write();
  return rc;
}

/// Finetunes a pretrained checkpoint with the gate and budget penalty enabled.
inline int cmd_finetune(const CommandOptions& o, Io io = {}) {
  auto cfg = resolve_config(o);
  const std::string ckpt_path = default_checkpoint(cfg, o);
  std::string src_hash;
  const auto ck = read_checkpoint(ckpt_path, &src_hash);
  const std::uint64_t seed = o.seed ? *o.seed : ck.rng.master_seed;
  const double b = cfg.train.budget;

  // b* and the null mask go together: the penalty target b + (1 - b*) assumes the mask is applied.
  const fs::path src_dir = fs::path(ckpt_path).parent_path().empty() ? fs::path(".") : fs::path(ckpt_path).parent_path();
  double bstar = cfg.train.bstar;
  std::optional<LoadedMask> lm;
  if (!o.masks.empty()) {
    lm = load_mask_with_clusters(o.masks.front());
  } else {
    const fs::path recorded = src_dir / analysis_dir_name(seed) / "mask.txt";
    if (fs::exists(recorded)) lm = load_mask_with_clusters(recorded.string());
  }
  const RunManifest source(src_dir);
  if (!source.recorded_bstar(seed, bstar))
    io.err << "warning: no b* recorded for seed " << seed << "; using train.bstar = " << cfg.train.bstar << "\n";
  if (bstar < 1.0 && !lm) {
    io.err << "warning: b* = " << bstar << " but no null mask is available; finetuning against b* = 1\n";
    bstar = 1.0;
  }
  cfg.train.bstar = bstar;
  if (b >= bstar)
    io.err << "warning: budget " << b << " >= b* " << bstar << "; the null-token mask alone meets this budget\n";
  cfg.train.schedule = training::Phase::finetune;
  const auto phases = training::schedule(cfg.train, true);

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  const std::string metrics_rel = metrics_name(training::Phase::finetune, b);
  const std::string rel = checkpoint_name(training::Phase::finetune, seed, b);
  claim_output(dir / metrics_rel, o.overwrite);
  claim_output(dir / rel, o.overwrite);
  if (o.overwrite) fs::remove(dir / metrics_rel);

  RunManifest manifest(dir);
  if (manifest.json()["config"].get<std::string>().empty()) manifest.set_config(serialize_config(cfg));
  training::MetricsWriter writer((dir / metrics_rel).string());
  manifest.add_metrics(metrics_rel);
  const int rc = with_precision(cfg.precision, [&]<typename S>() {
    training::Trainer<S> tr(cfg.env, cfg.model, cfg.train, training::Phase::finetune, seed);
    tr.load(ck);
    if (lm) tr.set_mask(&lm->mask, lm->clusters ? &*lm->clusters : nullptr);
    return train_loop(tr, phases.front().epochs, writer, dir / rel, manifest, rel, io);
  });
  manifest.write();
  return rc;
}

/// Token statistics, causal effects, null mask, b* and the summary table for one checkpoint.
inline int cmd_analyze(const CommandOptions& o, Io io = {}) {
  const auto cfg = resolve_config(o);
  const std::string ckpt_path = default_checkpoint(cfg, o);
  std::string hash;
  const auto ck = read_checkpoint(ckpt_path, &hash);
  const std::uint64_t seed = o.seed ? *o.seed : ck.rng.master_seed;
  const auto net = training::load_network<double>(bound_model(cfg), ck);

  const fs::path dir(cfg.out);
  const std::string sub = analysis_dir_name(seed);
  const fs::path adir = dir / sub;
  const char* outputs[] = {"mask.txt", "token_stats.csv", "effects.csv", "table1.csv", "bstar.json", "analysis.jsonl"};
  for (const char* f : outputs) claim_output(adir / f, o.overwrite);
  fs::create_directories(adir);

  auto opts = eval_options(cfg);
  std::optional<agents::ClusterTable> clusters;
  if (net.config().message_mode == agents::MessageMode::continuous) {
    clusters = analysis::fit_clusters(net, cfg.env, opts, cfg.analysis.clusters, cfg.analysis.restarts);
    opts.clusters = &*clusters;
  }
  const auto stats = analysis::collect_token_stats(net, cfg.env, opts);
  for (const auto& w : stats.warnings) io.err << "warning: " << w << "\n";
  const auto effects = analysis::causal_effects(net, cfg.env, stats, opts, cfg.analysis.mask_mode);
  const auto mask = analysis::build_null_mask(effects, cfg.analysis.epsilon, cfg.analysis.mask_mode, hash);
  auto bstar = analysis::estimate_bstar(net, cfg.env, mask, opts);
  if (!bstar.defined) {
    io.err << "warning: no emissions without a mask; b* is undefined and reported as 1\n";
    bstar.b_star = 1.0;
  }
  const auto t1 = analysis::table1_metrics(stats, mask);

  {
    std::ofstream f(adir / "mask.txt");
    agents::write_mask(f, mask);
    if (clusters) {
      std::ofstream c(adir / "mask.txt.clusters");
      agents::write_clusters(c, *clusters);
    }
  }
  {
    std::ofstream f(adir / "token_stats.csv");
    f << "token,emissions,distinct_observations";
    for (std::size_t j = 0; j < net.config().agents; ++j) f << ",to_" << j;
    f << "\n";
    for (const auto& t : stats.tokens) {
      f << t.token_id << "," << t.emissions << "," << t.observations.size();
      for (auto c : t.recipient_counts) f << "," << c;
      f << "\n";
    }
  }
  {
    std::ofstream f(adir / "effects.csv");
    f << "token,recipient,emissions,episodes_emitted,defined,delta,null\n";
    for (const auto& e : effects) {
      f << e.token << "," << (e.recipient == agents::kAllRecipients ? std::string("*") : std::to_string(e.recipient))
        << "," << e.emissions << "," << e.episodes_emitted << "," << (e.defined ? 1 : 0) << ","
        << training::format_double(e.delta) << "," << (mask.suppresses(e.token, e.recipient) ? 1 : 0) << "\n";
    }
  }
  {
    std::ofstream f(adir / "table1.csv");
    f << "null_fraction,observations_per_token,null_emission_fraction,measured,null_count\n";
    f << training::format_double(t1.null_fraction) << "," << training::format_double(t1.observations_per_token) << ","
      << training::format_double(t1.null_emission_fraction) << "," << t1.measured << "," << t1.null_count << "\n";
  }
  nlohmann::ordered_json bj;
  bj["bstar"] = bstar.b_star;
  bj["std"] = bstar.std_dev;
  bj["episodes"] = bstar.episodes;
  bj["defined"] = bstar.defined;
  {
    std::ofstream f(adir / "bstar.json");
    f << bj.dump(2) << "\n";
  }
  {
    std::ofstream f(adir / "analysis.jsonl");
    for (const auto& t : stats.tokens)
      f << nlohmann::ordered_json{{"event", "token"}, {"token", t.token_id}, {"emissions", t.emissions},
                                  {"observations", t.observations.size()}, {"recipients", t.recipient_counts}}
               .dump()
        << "\n";
    for (const auto& e : effects)
      f << nlohmann::ordered_json{{"event", "effect"},   {"token", e.token},     {"recipient", e.recipient},
                                  {"defined", e.defined}, {"delta", e.delta},     {"emissions", e.emissions}}
               .dump()
        << "\n";
    f << nlohmann::ordered_json{{"event", "bstar"}, {"bstar", bstar.b_star}, {"std", bstar.std_dev}}.dump() << "\n";
  }

  RunManifest manifest(dir);
  if (manifest.json()["config"].get<std::string>().empty()) manifest.set_config(serialize_config(cfg));
  nlohmann::ordered_json entry = bj;
  entry["checkpoint_hash"] = hash;
  entry["mask"] = sub + "/mask.txt";
  entry["null_fraction"] = t1.null_fraction;
  entry["observations_per_token"] = t1.observations_per_token;
  entry["null_emission_fraction"] = t1.null_emission_fraction;
  manifest.set_analysis(seed, entry);
  for (const char* f : outputs) manifest.add_artifact(sub + "/" + f);
  if (clusters) manifest.add_artifact(sub + "/mask.txt.clusters");
  manifest.write();

  char line[256];
  std::snprintf(line, sizeof(line),
                "tokens %zu emissions %zu null pairs %zu/%zu b* %.4f null_fraction %.4f obs_per_token %.3f "
                "null_emission_fraction %.4f\n",
                stats.tokens.size(), stats.total_emissions, t1.null_count, t1.measured, bstar.b_star, t1.null_fraction,
                t1.observations_per_token, t1.null_emission_fraction);
  io.out << line;
  return 0;
}

/// Success versus budget across seeds, written as CSV and SVG.
inline int cmd_sweep(const CommandOptions& o, Io io = {}) {
  const auto cfg = resolve_config(o);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  claim_output(dir / "sweep.csv", o.overwrite);
  claim_output(dir / "sweep.svg", o.overwrite);
  const auto model = bound_model(cfg);

  std::vector<std::string> ckpts = o.checkpoints;
  if (ckpts.empty()) {
    for (auto s : cfg.seeds) {
      const auto p = dir / checkpoint_name(training::Phase::pretrain, s);
      if (fs::exists(p))
        ckpts.push_back(p.string());
      else
        io.err << "warning: missing checkpoint " << p.string() << "; seed skipped\n";
    }
  }
  std::vector<std::unique_ptr<agents::Network<double>>> nets;
  std::vector<std::unique_ptr<LoadedMask>> masks;
  std::vector<analysis::SweepSeed<double>> seeds;
  auto opts = eval_options(cfg);
  for (std::size_t k = 0; k < ckpts.size(); ++k) {
    if (!fs::exists(ckpts[k])) {
      io.err << "warning: missing checkpoint " << ckpts[k] << "; skipped\n";
      continue;
    }
    const auto ck = read_checkpoint(ckpts[k]);
    nets.push_back(std::make_unique<agents::Network<double>>(training::load_network<double>(model, ck)));
    analysis::SweepSeed<double> sd;
    sd.pretrained = nets.back().get();
    std::string mpath = k < o.masks.size() ? o.masks[k] : "";
    if (mpath.empty()) {
      const auto p = dir / analysis_dir_name(ck.rng.master_seed) / "mask.txt";
      if (fs::exists(p)) mpath = p.string();
    }
    if (!mpath.empty()) {
      masks.push_back(std::make_unique<LoadedMask>(load_mask_with_clusters(mpath)));
      sd.mask = &masks.back()->mask;
      if (masks.back()->clusters) sd.clusters = &*masks.back()->clusters;
      auto eo = opts;
      eo.clusters = sd.clusters;
      const auto est = analysis::estimate_bstar(*sd.pretrained, cfg.env, *sd.mask, eo);
      sd.bstar = est.defined ? est.b_star : 1.0;
    } else {
      io.err << "warning: no mask for " << ckpts[k] << "; b* taken as 1\n";
    }
    seeds.push_back(std::move(sd));
  }
  std::map<double, std::size_t> seen;
  for (const auto& spec : o.finetuned) {
    const auto eq = spec.find('=');
    require(eq != std::string::npos, "--finetuned expects B=PATH, got '" + spec + "'");
    const double b = detail::to_double("--finetuned", spec.substr(0, eq));
    const std::string path = spec.substr(eq + 1);
    const std::size_t idx = seen[b]++;
    if (idx >= seeds.size()) {
      io.err << "warning: more finetuned checkpoints for budget " << b << " than seeds; ignoring " << path << "\n";
      continue;
    }
    if (!fs::exists(path)) {
      io.err << "warning: missing finetuned checkpoint " << path << "; skipped\n";
      continue;
    }
    nets.push_back(std::make_unique<agents::Network<double>>(training::load_network<double>(model, read_checkpoint(path))));
    seeds[idx].finetuned[b] = nets.back().get();
  }

  std::vector<std::string> warnings;
  const auto rows = analysis::budget_sweep(cfg.env, seeds, cfg.analysis.budgets, opts, &warnings);
  for (const auto& w : warnings) io.err << "warning: " << w << "\n";
  {
    std::ofstream f(dir / "sweep.csv");
    analysis::write_sweep_csv(f, rows);
  }
  {
    std::ofstream f(dir / "sweep.svg");
    analysis::write_sweep_svg(f, rows, envs::to_string(cfg.env.kind) + " " + envs::to_string(cfg.env.difficulty));
  }
  RunManifest manifest(dir);
  if (manifest.json()["config"].get<std::string>().empty()) manifest.set_config(serialize_config(cfg));
  manifest.add_artifact("sweep.csv");
  manifest.add_artifact("sweep.svg");
  manifest.write();
  analysis::write_sweep_csv(io.out, rows);
  return 0;
}

/// Greedy evaluation of a checkpoint, optionally under a mask.
inline int cmd_eval(const CommandOptions& o, Io io = {}) {
  const auto cfg = resolve_config(o);
  const std::string ckpt_path = default_checkpoint(cfg, o);
  const auto ck = read_checkpoint(ckpt_path);
  const auto info = training::checkpoint_info(ck);
  const auto net = training::load_network<double>(bound_model(cfg), ck);
  auto opts = eval_options(cfg);
  opts.gate_forced_open = info.phase == training::Phase::pretrain;
  std::optional<LoadedMask> lm;
  if (!o.masks.empty()) {
    lm = load_mask_with_clusters(o.masks.front());
    opts.mask = &lm->mask;
    if (lm->clusters) opts.clusters = &*lm->clusters;
  }
  const auto s = analysis::evaluate(net, cfg.env, opts);
  char line[200];
  std::snprintf(line, sizeof(line), "episodes %zu success %.4f mean_reward %.4f m_avg %.4f\n", opts.episodes, s.success,
                s.mean_reward, s.m_avg);
  io.out << line;
  return 0;
}

/// Runs a subcommand, mapping configuration problems to exit code 2 and numeric failures to 3.
inline int run_command(const std::string& name, const CommandOptions& o, Io io = {}) {
  try {
    if (name == "train") return cmd_train(o, io);
    if (name == "finetune") return cmd_finetune(o, io);
    if (name == "analyze") return cmd_analyze(o, io);
    if (name == "sweep") return cmd_sweep(o, io);
    if (name == "eval") return cmd_eval(o, io);
    io.err << "error: unknown command '" << name << "'\n";
    return 2;
  } catch (const ConfigError& e) {
    io.err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    io.err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace imgsmac::cli
