#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lsc/config.hpp"
#include "lsc/env.hpp"
#include "lsc/hcomm.hpp"
#include "lsc/learner.hpp"
#include "lsc/topology.hpp"

namespace lsc::harness {

enum class WeightMode { learned, fixed };

struct RunConfig {
  env::ScenarioConfig scenario;
  topology::Kind kind = topology::Kind::hierarchical;
  WeightMode weight_mode = WeightMode::learned;
  int fixed_level = 2;
  double comm_radius = 0.6;  // election radius and baseline neighbor radius
  topology::ClusterConfig cluster;
  hcomm::GnnConfig net;

  double gamma = 0.98, tau = 0.01, lr = 1e-3;
  int batch_size = 32, update_rounds = 4;
  size_t buffer_capacity = 50000;
  double eps_start = 1.0, eps_end = 0.01, eps_decay_frac = 0.6;
  bool wg_use_target = true;

  int episodes = 200;
  int eval_cadence = 50;
  int eval_trials = 10;
  uint64_t seed = 1;
  std::string out_dir = "out";
  bool trace = false;
  std::string variant_name = "lsc";
  std::string config_echo;  // written to the manifest when non-empty

  bool weight_learning() const {
    return kind == topology::Kind::hierarchical && weight_mode == WeightMode::learned;
  }
  learner::TopologySpec tspec() const;
  void validate() const;
};

// Resolve a validated Settings blob (auto values filled per scenario).
RunConfig make_run_config(const config::Settings& s);

struct TrainResult {
  std::string metrics_csv;
  std::string cost_csv;
  std::string checkpoint_final;
  std::vector<double> episode_returns;  // per-episode mean agent return
  std::vector<double> policy_losses;    // one entry per update round
};

TrainResult train(const RunConfig& cfg);

struct EvalReport {
  double mean_reward = 0.0;  // battle: per-step mean; spread: per-episode mean
  long n_kills = 0, n_deaths = 0;
  double kd_ratio = 0.0;
  long n_success = 0, n_overload = 0;
  double mean_n_msg = 0.0;
  long max_bandwidth = 0;
};

// Greedy rollouts of a saved checkpoint. Writes per-trial rows when out_csv
// is non-empty. Throws CheckpointError when the checkpoint's head does not
// match the scenario's action space.
EvalReport evaluate(const RunConfig& cfg, const std::string& checkpoint_path, int trials,
                    const std::string& out_csv = "");

struct SweepRow {
  std::string variant;
  long seed = 0;  // -1 marks a per-variant aggregate row
  bool failed = false;
  double first10_mean_return = 0.0;
  double final10_mean_return = 0.0;
  EvalReport eval;
};

// Trains every config (in parallel when workers > 1), evaluates each final
// checkpoint and writes a comparison table. Per-run failures are recorded in
// their row; the other runs still complete.
std::vector<SweepRow> sweep(const std::vector<RunConfig>& cfgs, int workers,
                            const std::string& out_csv);

// Variant presets used by the sweep CLI: lsc, lsc-star, lsc-nbor, lsc-fix, idqn.
RunConfig apply_variant(RunConfig base, const std::string& variant);

}  // namespace lsc::harness
