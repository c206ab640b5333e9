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
#include <span>
#include <vector>

#include "mbrl/cma_es.hpp"
#include "mbrl/dataset.hpp"
#include "mbrl/dynamics_model.hpp"
#include "mbrl/planner.hpp"

namespace mbrl::adversarial {

struct AttackConfig {
  int population = 16;  // lambda
  int parents = 0;      // mu; 0 resolves to lambda / 2
  double sigma0 = 0.0; // <= 0 resolves to 0.05 * std of the output-layer weights
  int max_generations = 300;
  int trials_per_eval = 5;       // reward averaged over this many MPC episodes
  double ll_penalty_coeff = 0.0; // <= 0 resolves to 1000 * max(1, baseline reward)
  double ll_tolerance = 0.0;     // allowed validation-LL drop (nats)
  std::uint64_t seed = 0;
  es::CmaConfig::Covariance covariance = es::CmaConfig::Covariance::Diagonal;
  int episode_horizon = 200;
  // Early stop once a constraint-satisfying candidate reaches this fraction
  // of the baseline reward (0 disables).
  double stop_reward_fraction = 0.0;

  void validate() const;
};

struct GenerationRecord {
  int generation = 0;
  double best_fitness = 0.0;  // best member of this generation
  double sigma = 0.0;
  double reward = 0.0;  // reward of that member
  double ll = 0.0;      // validation LL of that member
};

struct AttackResult {
  double baseline_reward = 0.0;
  double baseline_ll = 0.0;
  double final_reward = 0.0;
  double final_ll = 0.0;
  std::vector<GenerationRecord> history;
  model::DynamicsModel perturbed;  // distinct checkpoint; baseline stays untouched
};

// Flattened final affine map of every member (row-major weights then biases,
// covering the mean and logvar heads).
std::vector<double> output_layer_params(const model::DynamicsModel& m);
void set_output_layer_params(model::DynamicsModel& m, std::span<const double> flat);

// Candidate fitness: mean MPC reward over trials_per_eval seeded episodes
// with the perturbed model, plus a one-sided hinge penalty when the
// validation LL drops more than ll_tolerance below baseline. Lower is better.
class AttackObjective {
 public:
  AttackObjective(const model::DynamicsModel& baseline, const data::TransitionSet& val_set,
                  const planner::PlannerConfig& planner_cfg,
                  const env::CartpoleParams& env_params, const AttackConfig& cfg);

  struct Eval {
    double fitness = 0.0;
    double reward = 0.0;
    double ll = 0.0;
  };
  Eval evaluate(std::span<const double> candidate) const;

  double baseline_reward() const { return baseline_reward_; }
  double baseline_ll() const { return baseline_ll_; }
  double penalty_coeff() const { return penalty_coeff_; }

 private:
  const model::DynamicsModel* baseline_;
  const data::TransitionSet* val_set_;
  planner::PlannerConfig planner_cfg_;
  env::CartpoleParams env_params_;
  AttackConfig cfg_;
  double baseline_reward_ = 0.0;
  double baseline_ll_ = 0.0;
  double penalty_coeff_ = 0.0;
};

double hinge_penalty(double baseline_ll, double candidate_ll, double tolerance, double coeff);

// CMA-ES over the flattened output layer, minimizing reward subject to the
// LL constraint; returns the best constraint-satisfying candidate (the
// unperturbed layer counts, so zero generations returns the baseline).
AttackResult attack(const model::DynamicsModel& baseline, const data::TransitionSet& val_set,
                    const env::CartpoleParams& env_params,
                    const planner::PlannerConfig& planner_cfg, const AttackConfig& cfg);

}  // namespace mbrl::adversarial
