#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gpsmem/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"memory-augmented guided policy search"};
  app.require_subcommand(1);

  // run: train a policy, writing metrics, checkpoints, and a plot
  auto* run = app.add_subcommand("run", "train a policy");
  std::string config_path, task, method, out_dir, resume;
  std::uint64_t seed = 0;
  int iters = -1;
  bool seed_set = false;
  run->add_option("--config", config_path, "config file (key = value sections)");
  run->add_option("--task", task, "nav | pegsort");
  run->add_option("--method", method, "memgps | feedforward | rwr");
  run->add_option("--seed", seed, "experiment seed")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--iters", iters, "outer iterations");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--resume", resume, "checkpoint file to resume from");

  // replay: print the deterministic rollout of a checkpointed policy
  auto* rep = app.add_subcommand("replay", "replay a checkpointed policy");
  std::string ck_path;
  int condition = 0;
  rep->add_option("checkpoint", ck_path, "checkpoint file")->required();
  rep->add_option("--condition", condition, "initial condition index");

  app.set_version_flag("--version", gpsmem::kVersion);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      gpsmem::RunConfig cfg;
      if (!config_path.empty()) cfg = gpsmem::config_from_file(config_path);
      // command-line flags override the config file
      if (!task.empty()) cfg.task = task;
      if (!method.empty()) cfg.method = method;
      if (seed_set) cfg.seed = seed;
      if (iters > 0) cfg.iters = iters;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      // revalidate the merged config
      if (cfg.task != "nav" && cfg.task != "pegsort")
        throw std::invalid_argument("--task must be nav or pegsort");
      if (cfg.method != "memgps" && cfg.method != "feedforward" &&
          cfg.method != "rwr")
        throw std::invalid_argument("--method must be memgps, feedforward, or rwr");
      if (cfg.iters < 1) throw std::invalid_argument("--iters must be >= 1");
      return gpsmem::run_experiment(cfg, resume, &std::cout);
    }
    return gpsmem::replay(ck_path, condition, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
