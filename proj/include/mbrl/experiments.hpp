// Copyright 2026 The mbrlkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbrl/attack.hpp"
#include "mbrl/cartpole.hpp"
#include "mbrl/dataset.hpp"
#include "mbrl/dynamics_model.hpp"
#include "mbrl/planner.hpp"

namespace mbrl::diag {

std::uint64_t fnv1a64(std::string_view s);
std::string hash_hex(std::string_view s);

// Append-only CSV record store keyed by a unit index. Completed units are
// buffered and flushed to <dir>/<name>.csv strictly in unit order, so reruns
// produce byte-identical files regardless of worker count; a rerun with a
// matching config hash skips units already on disk.
class RecordStore {
 public:
  RecordStore(std::filesystem::path dir, std::string name, std::vector<std::string> columns,
              std::string config_hash, int n_units);
  ~RecordStore();

  bool is_done(int unit) const;
  // row must match the column count; "unit" is prepended automatically.
  void put(int unit, std::vector<std::string> row);
  std::vector<std::string> get(int unit) const;
  int n_done() const;
  void finish();  // writes the final ordered csv + manifest

  const std::filesystem::path& csv_path() const { return csv_path_; }

 private:
  std::filesystem::path dir_;
  std::string name_;
  std::vector<std::string> columns_;
  std::string config_hash_;
  int n_units_ = 0;
  std::vector<std::optional<std::vector<std::string>>> rows_;
  int flushed_ = 0;
  std::filesystem::path csv_path_;
  std::filesystem::path partial_path_;
  bool finished_ = false;
};

void write_manifest(const std::filesystem::path& dir, const std::string& config_hash,
                    const std::vector<std::uint64_t>& seeds,
                    const std::map<std::string, std::string>& extra = {});

// ---------------------------------------------------------------------------
// PETS loop
// ---------------------------------------------------------------------------

struct PetsConfig {
  env::CartpoleParams env;
  model::ModelConfig model;
  planner::PlannerConfig planner;
  int n_trials = 20;
  int horizon = 200;
  int initial_random_episodes = 1;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // empty: keep everything in memory only
  std::string config_hash = "unhashed";
  // Extra transitions prepended to the dataset before the first trial
  // (babbling study); episode ids must not collide with collected episodes.
  std::optional<data::TransitionSet> initial_dataset;
  // Stop early once a trial reward reaches this value (0 disables).
  double stop_at_reward = 0.0;
};

struct PetsTrialRecord {
  int trial = 0;
  double reward = 0.0;
  double train_loss = 0.0;
  double val_nll = 0.0;          // final-epoch held-out loss (per-member mean)
  double ll_heldout = 0.0;       // mixture LL on the held-out split
  int n_train = 0;
  int n_val = 0;
  std::string checkpoint;        // empty when not persisted
};

struct PetsRunResult {
  std::vector<PetsTrialRecord> records;
  data::TransitionSet dataset;  // everything collected (episode-tagged)
  model::DynamicsModel final_model;
};

// Seeds the dataset with random-policy episodes, then alternates full model
// retraining and one MPC episode per trial, checkpointing each model. With
// out_dir set the run is resumable per trial.
PetsRunResult run_pets(const PetsConfig& cfg);

// ---------------------------------------------------------------------------
// LL-vs-reward sweep
// ---------------------------------------------------------------------------

struct SweepConfig {
  std::vector<std::string> checkpoints;  // model files
  std::vector<std::pair<std::string, std::filesystem::path>> datasets;  // tag -> csv
  env::CartpoleParams env;
  planner::PlannerConfig planner;
  int n_eval = 10;  // episodes per checkpoint for the reward estimate
  int horizon = 200;
  int batch_size = 16;
  data::BatchMode batching = data::BatchMode::Random;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::string config_hash = "unhashed";
};

struct CorrelationReport {
  std::string dataset;
  int n = 0;
  double rho_random = 0.0;  // pooled-mean LL vs reward
  // trajectory-batched LL vs reward; absent when the set has no episodes
  std::optional<double> rho_trajectory;
};

// One (checkpoint, LL-per-dataset, reward) point of the correlation study.
struct ExperimentRecord {
  std::string model_id;
  int trial_index = 0;
  std::map<std::string, double> ll_per_dataset;
  double mean_reward = 0.0;
  std::vector<double> reward_per_episode;
};

struct SweepResult {
  std::vector<CorrelationReport> reports;
  std::vector<ExperimentRecord> records;
  std::filesystem::path records_csv;
};

// Per checkpoint: LL on every dataset (pooled and trajectory-batched when
// possible) plus mean MPC reward over n_eval shared-seed episodes; emits the
// scatter records and one correlation report per dataset.
SweepResult ll_reward_sweep(const SweepConfig& cfg);

// ---------------------------------------------------------------------------
// Per-epoch training curve
// ---------------------------------------------------------------------------

struct EpochCurveConfig {
  env::CartpoleParams env;
  model::ModelConfig model;
  planner::PlannerConfig planner;
  std::filesystem::path train_set;
  std::vector<std::pair<std::string, std::filesystem::path>> val_sets;  // tag -> csv
  int eval_every = 10;
  int n_eval = 3;
  int horizon = 200;
  double train_fraction = 0.9;  // held-out part of train_set for the loss curve
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::string config_hash = "unhashed";
};

struct EpochCurvePoint {
  int epoch = 0;
  double train_loss = 0.0;
  double mean_reward = 0.0;
  std::map<std::string, double> val_loss;  // per tag
};

std::vector<EpochCurvePoint> epoch_reward_curve(const EpochCurveConfig& cfg);

// ---------------------------------------------------------------------------
// Re-weighting heatmap
// ---------------------------------------------------------------------------

struct HeatmapConfig {
  env::CartpoleParams env;
  model::ModelConfig model;
  planner::PlannerConfig planner;
  std::filesystem::path expert_set;
  std::vector<std::int64_t> s_grid;  // dataset sizes
  std::vector<double> eps_grid;      // distance bounds
  model::WeightSpec::Mode weight_mode = model::WeightSpec::Mode::Distance;
  bool run_weighted = true;  // cells trained with the re-weighted loss
  bool run_plain = true;     // unweighted counterpart of every cell
  int n_seeds = 5;
  int n_eval = 2;
  int horizon = 200;
  std::int64_t pool_size = 1'000'000;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::string config_hash = "unhashed";
};

struct HeatmapCell {
  std::int64_t s = 0;
  double epsilon = 0.0;
  bool reweighted = false;
  int n_done = 0;  // feasible seeds
  double median_reward = 0.0;
  std::vector<std::uint64_t> seeds;
};

std::vector<HeatmapCell> reweight_heatmap(const HeatmapConfig& cfg);

// ---------------------------------------------------------------------------
// Babbling study
// ---------------------------------------------------------------------------

struct BabbleConfig {
  PetsConfig pets;                    // per-run template (out_dir = study root)
  std::vector<int> extra_counts;      // babbling rollouts per variant
  int babble_horizon = 10;
  int n_seeds = 5;
  double reward_threshold = 0.0;      // trials-to-threshold metric
  std::string config_hash = "unhashed";
};

struct BabbleRunRecord {
  int extra_count = 0;
  std::uint64_t seed = 0;
  int n_babble_transitions = 0;
  int trials_to_threshold = 0;  // n_trials + 1 when never reached
  std::vector<double> rewards;
};

std::vector<BabbleRunRecord> babble_study(const BabbleConfig& cfg);

// ---------------------------------------------------------------------------
// Goal generalization
// ---------------------------------------------------------------------------

struct GoalGenConfig {
  std::vector<std::string> checkpoints;
  std::vector<double> goals;
  env::CartpoleParams env;
  planner::PlannerConfig planner;
  int n_eval = 3;
  int horizon = 200;
  double hist_lo = -3.0, hist_hi = 3.0, hist_bin = 0.1;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::string config_hash = "unhashed";
};

struct GoalGenRecord {
  std::string checkpoint;
  double goal = 0.0;
  double mean_reward = 0.0;
  double frac_x_near_zero = 0.0;  // |x| < 0.5 across the eval episodes
};

std::vector<GoalGenRecord> goal_generalization(const GoalGenConfig& cfg);

// ---------------------------------------------------------------------------
// Plan comparison along an expert trajectory
// ---------------------------------------------------------------------------

struct ComparePlansConfig {
  std::string model_a;
  std::string model_b;
  std::filesystem::path expert_episode;  // dataset csv, first episode used
  env::CartpoleParams env;
  planner::PlannerConfig planner;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::string config_hash = "unhashed";
};

struct ComparePlansRow {
  int step = 0;
  double return_a = 0.0;
  double return_b = 0.0;
  std::vector<double> actions_a;  // horizon entries
  std::vector<double> actions_b;
  double max_action_gap = 0.0;
};

std::vector<ComparePlansRow> compare_plans(const ComparePlansConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset pipelines that need the true-dynamics planner
// ---------------------------------------------------------------------------

data::TransitionSet make_expert_dataset(const env::CartpoleParams& env,
                                        const planner::PlannerConfig& planner_cfg, int horizon,
                                        int n_trials, double reward_threshold, int max_attempts,
                                        std::uint64_t seed);

data::TransitionSet make_on_policy_dataset(const model::DynamicsModel& m,
                                           const env::CartpoleParams& env,
                                           const planner::PlannerConfig& planner_cfg,
                                           int n_trials, int horizon, std::uint64_t seed);

// Median true-dynamics planner return over n_seeds full episodes (the
// environment calibration constant R*).
double calibrate_rstar(const env::CartpoleParams& env, const planner::PlannerConfig& planner_cfg,
                       int n_seeds, int horizon, std::uint64_t seed);

}  // namespace mbrl::diag
