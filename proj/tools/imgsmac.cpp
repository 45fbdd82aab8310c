#include <iostream>

#include <CLI11.hpp>

#include "imgsmac/cli/commands.hpp"

int main(int argc, char** argv) {
  using imgsmac::cli::CommandOptions;
  CLI::App app{"Gated, sparse multi-agent communication: training and analysis"};
  app.require_subcommand(1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print every config key with its default and exit");

  CommandOptions opts;
  std::uint64_t seed = 0;
  double budget = 1.0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "Config file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Run a single seed");
    sub->add_option("--out", opts.out, "Output directory (overrides run.out)");
    sub->add_flag("--deterministic", opts.deterministic, "Single-threaded execution");
    sub->add_flag("--overwrite", opts.overwrite, "Allow replacing existing outputs");
    sub->add_option("--budget", budget, "Target budget b")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--mask", opts.masks, "Vocabulary mask file (repeat per checkpoint for sweep)");
    sub->add_option("--checkpoint", opts.checkpoints, "Checkpoint file (repeat per seed for sweep)");
  };
  const char* names[] = {"train", "finetune", "analyze", "sweep", "eval"};
  const char* help[] = {"Pretrain or tri-objective training", "Finetune a checkpoint under a budget",
                        "Null-token analysis, mask and b*", "Success versus budget table and plot",
                        "Greedy evaluation of a checkpoint"};
  std::vector<CLI::App*> subs;
  for (int k = 0; k < 5; ++k) {
    auto* sub = app.add_subcommand(names[k], help[k]);
    common(sub);
    subs.push_back(sub);
  }
  subs[3]->add_option("--finetuned", opts.finetuned, "Finetuned checkpoint for a budget below b*, as B=PATH");

  if (argc >= 2 && std::string(argv[1]) == "--print-defaults") {
    std::cout << imgsmac::cli::serialize_config(imgsmac::cli::ExperimentConfig{}, true);
    return 0;
  }
  CLI11_PARSE(app, argc, argv);
  for (auto* sub : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--budget")) opts.budget = budget;
    return imgsmac::cli::run_command(sub->get_name(), opts);
  }
  return 2;
}
