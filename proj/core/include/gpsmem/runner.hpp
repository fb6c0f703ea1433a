#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gpsmem/gps.hpp"

namespace gpsmem {

inline constexpr const char* kVersion = "gpsmem 0.1.0";
inline constexpr const char* kCheckpointHeader = "gpsmem-checkpoint v1";

// Flat key = value configuration with [section] headers. Keys are stored as
// "section.key"; values keep their raw text.
std::map<std::string, std::string> parse_config_text(const std::string& text);

struct RunConfig {
  std::string task = "nav";        // nav | pegsort
  std::string method = "memgps";   // memgps | feedforward | rwr
  std::uint64_t seed = 0;
  int iters = 30;
  std::string out_dir = "run_out";
  std::optional<int> d_h;          // default: 4 (memgps/rwr), 0 (feedforward)
  double sigma2 = 1e-6;
  int num_samples = 5;             // per condition per iteration (gps)
  int rwr_samples = 25;            // per iteration (rwr)
  std::string raw_text;            // original config file contents, if any
};

// Throws std::invalid_argument naming the offending field on bad input.
RunConfig config_from_text(const std::string& text);
RunConfig config_from_file(const std::string& path);

int resolved_memory_dim(const RunConfig& cfg);
GpsOptions gps_options_for(const RunConfig& cfg);

struct MetricRow {
  int iter;
  int samples;
  int condition;
  double distance;
};

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows);
void write_metrics_svg(std::ostream& os, const std::vector<MetricRow>& rows,
                       int num_conditions);

// Run-state checkpoint: everything needed to resume or replay.
void save_checkpoint(std::ostream& os, const RunConfig& cfg, const GpsRun& run);

struct Checkpoint {
  RunConfig cfg;
  AugmentedSpec aspec;
  MemoryPolicy policy;
  std::vector<ConditionState> conds;
  std::vector<double> nu;
  double eps = 0.0;
  int iter = 0;
  double prev_cost = 0.0;
  bool norm_frozen = false;
};

Checkpoint load_checkpoint(std::istream& is);
Checkpoint load_checkpoint_file(const std::string& path);

// Executes the configured method end to end, writing metrics.csv, per-run
// info, checkpoints, and an SVG plot into cfg.out_dir. Returns 0 on success.
int run_experiment(const RunConfig& cfg,
                   const std::string& resume_checkpoint = "",
                   std::ostream* log = nullptr);

// Deterministic evaluation rollout of a checkpointed policy, printed as a
// per-step table (t, x, o, h, u, m, cost).
int replay(const std::string& checkpoint_path, int condition,
           std::ostream& os);

}  // namespace gpsmem
