#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cmzdril/imitation.hpp"
#include "cmzdril/metrics.hpp"
#include "cmzdril/ppo.hpp"
#include "cmzdril/reward.hpp"

namespace cmzdril {

/// Everything one training-and-evaluation run needs. A run is fully
/// determined by (master_seed, trial_index, condition); demo and evaluation
/// seeds depend only on the trial, so every condition within a trial sees
/// identical data.
struct TrainRunConfig {
  std::string env_name = "waypoint";
  std::string condition = "cmz";  // bc|cmz|dril|penalty|true-env|zero
  int demo_episodes = 5;
  int ensemble_size = 5;
  BcConfig bc;           // imitator pretraining
  BcConfig ensemble_bc;  // ensemble member training
  ShaperConfig shaper;   // mode is overridden by `condition`
  PpoConfig ppo;
  int nll_epochs_per_cycle = 10;
  double interleave_lr_scale = 1.0;
  int total_updates = 100;
  int eval_episodes = 20;
  int eval_interval = 5;
  std::uint64_t master_seed = 1;
  std::uint64_t trial_index = 0;

  // Fine-tuning a pretrained imitator wants gentler PPO movement than
  // training from scratch, and short desk-scale episodes need the
  // disagreement average carried across episode boundaries to stay
  // mean-zero in practice.
  TrainRunConfig() {
    ppo.epochs = 3;
    ppo.target_kl = 0.01;
    ppo.policy_lr = 3e-4;
    ppo.value_lr = 3e-4;
    ppo.entropy_coef = 0.0;
    shaper.reset_average_per_episode = false;
  }
};

bool condition_uses_ppo(const std::string& condition);
bool condition_uses_ensemble(const std::string& condition);

struct EvalRow {
  int update = 0;  // 0 means "after pretraining only"
  double true_reward = 0.0;
  double frechet = 0.0;
  double mse = 0.0;
};

struct UpdateRow {
  int update = 0;
  double mean_shaped_reward = 0.0;
  double mean_true_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double nll_loss = 0.0;
  double mean_disagreement = 0.0;
};

struct TrainRecord {
  std::string condition;
  std::vector<EvalRow> evals;
  std::vector<UpdateRow> updates;
  std::vector<std::string> phase_log;  // "bc", "ensemble", "ppo", "nll", ...
  // Final-window aggregates over the last quarter of eval checkpoints
  // (at least one), since runs here have far fewer than 100 checkpoints.
  int final_window_rows = 0;
  double final_window_reward = 0.0;
  double final_window_frechet = 0.0;
  double final_window_mse = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

/// Computes the aggregates above from the eval rows.
void fill_final_window(TrainRecord& record);

/// Full two-phase run: BC pretraining and ensemble, then PPO updates each
/// followed by an NLL pass over the demos. Writes run artifacts (config
/// snapshot, demo file, checkpoints, CSV logs, done marker) into run_dir
/// when it is non-empty.
TrainRecord run_cmz_dril(const TrainRunConfig& config,
                         const std::string& run_dir = "");

/// Pretraining phases only, evaluated identically.
TrainRecord run_baseline_bc(const TrainRunConfig& config,
                            const std::string& run_dir = "");

/// Dispatch on config.condition ("bc" -> baseline, everything else the full
/// loop with the matching shaper mode).
TrainRecord run_condition(const TrainRunConfig& config,
                          const std::string& run_dir = "");

/// Reads back a finished run directory (metrics.csv + done marker), letting
/// suites resume without redoing siblings.
std::optional<TrainRecord> load_finished_run(const std::string& run_dir,
                                             const std::string& condition);

struct SuiteEntry {
  std::string condition;
  std::vector<TrainRecord> trials;

  double mean_final_reward() const;
  double std_final_reward() const;  // sample std; 0 for a single trial
  double mean_final_frechet() const;
  double mean_final_mse() const;
};

struct SuiteResult {
  std::string env_name;
  int n_trials = 0;
  std::vector<SuiteEntry> entries;
};

/// Runs every (trial, condition) pair, resuming finished run directories.
/// Trials share demo/eval seeds across conditions. `workers` bounds the
/// number of concurrent runs; results are identical for any worker count.
SuiteResult run_condition_suite(const TrainRunConfig& base,
                                const std::vector<std::string>& conditions,
                                int n_trials, const std::string& out_dir,
                                int workers = 1);

/// Key=value snapshot of a resolved config, stable ordering.
std::string config_snapshot(const TrainRunConfig& config);

}  // namespace cmzdril
