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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mbrl/cartpole.hpp"
#include "mbrl/dataset.hpp"
#include "mbrl/dynamics_model.hpp"
#include "mbrl/matrix.hpp"

namespace mbrl::planner {

struct PlannerConfig {
  enum class Method { Cem, Random };
  Method method = Method::Cem;
  int horizon = 25;
  int n_candidates = 400;
  int n_elites = 40;
  int cem_iterations = 5;
  double smoothing_alpha = 0.1;  // new stats = alpha * old + (1 - alpha) * elite
  double action_lo = -1.0;
  double action_hi = 1.0;
  double init_action_std = 0.0;  // <= 0 resolves to 0.5 * (hi - lo)
  bool warm_start = true;
  std::uint64_t seed = 0;

  double resolved_init_std() const {
    return init_action_std > 0.0 ? init_action_std : 0.5 * (action_hi - action_lo);
  }
  void validate() const;

  static PlannerConfig cartpole_cem();     // horizon 25, 400 candidates, 40 elites, 5 iters
  static PlannerConfig cartpole_random();  // horizon 25, 2000 candidates
};

// Batched one-step transition oracle. Implementations must tolerate distinct
// concurrent calls (no shared mutable state across calls); rows that step to
// a non-finite state get their valid flag cleared and are left untouched
// afterwards.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual void step_batch(Matrix& states, const Matrix& actions,
                          std::vector<std::uint8_t>& valid) const = 0;
};

// Exact cartpole dynamics.
class TrueDynamicsOracle final : public Oracle {
 public:
  explicit TrueDynamicsOracle(const env::CartpoleParams& params) : params_(params) {}
  int state_dim() const override { return 4; }
  int action_dim() const override { return 1; }
  void step_batch(Matrix& states, const Matrix& actions,
                  std::vector<std::uint8_t>& valid) const override;
  const env::CartpoleParams& params() const { return params_; }

 private:
  env::CartpoleParams params_;
};

// Expectation propagation through a learned model: next state = state +
// ensemble-average predicted mean delta (angular dims wrapped).
class ModelOracle final : public Oracle {
 public:
  explicit ModelOracle(const model::DynamicsModel& m) : model_(&m) {}
  int state_dim() const override { return model_->d_s(); }
  int action_dim() const override { return model_->d_a(); }
  void step_batch(Matrix& states, const Matrix& actions,
                  std::vector<std::uint8_t>& valid) const override;

 private:
  const model::DynamicsModel* model_;
};

using RewardFn = std::function<double(std::span<const double> s, std::span<const double> a)>;

RewardFn make_cartpole_reward(const env::CartpoleParams& params);

struct ActionPlan {
  Matrix actions;  // horizon x d_a, within bounds
  double predicted_return = 0.0;
  std::vector<Matrix> elite_mean_history;    // CEM: per-iteration elite mean
  std::vector<double> best_return_history;   // best-so-far per iteration
  int n_discarded = 0;                       // diverged candidate rollouts
};

// Sum of rewards along the oracle rollout of one action sequence (horizon x
// d_a); -inf when any intermediate state goes non-finite.
double evaluate_sequence(const Oracle& oracle, std::span<const double> s0,
                         const Matrix& actions, const RewardFn& reward);

// Rollout of every row of `candidates` (n x horizon*d_a). Returns are
// written per candidate index; reductions are order-fixed, so results do not
// depend on thread count.
struct BatchEval {
  std::vector<double> returns;
  int n_discarded = 0;
};
BatchEval evaluate_candidates(const Oracle& oracle, std::span<const double> s0,
                              const Matrix& candidates, int horizon, const RewardFn& reward);

// Iterative elite refitting of per-timestep Gaussians; deterministic given
// config.seed. Throws std::runtime_error("model diverges from s0") when every
// candidate of an iteration scores -inf.
ActionPlan plan_cem(const Oracle& oracle, std::span<const double> s0, const PlannerConfig& cfg,
                    const RewardFn& reward, const Matrix* warm_mean = nullptr);

// Uniform sampling within bounds; returns the argmax sequence.
ActionPlan plan_random(const Oracle& oracle, std::span<const double> s0,
                       const PlannerConfig& cfg, const RewardFn& reward);

ActionPlan plan(const Oracle& oracle, std::span<const double> s0, const PlannerConfig& cfg,
                const RewardFn& reward, const Matrix* warm_mean = nullptr);

// Replans every step and executes only the first action; CEM warm-starts
// from the previous plan shifted by one step (zero-padded). Each act() call
// draws a seed derived from (config seed, episode seed, step index), so
// plans are reproducible and, with warm_start off, step-independent.
class MpcPolicy {
 public:
  MpcPolicy(const Oracle& oracle, const PlannerConfig& cfg, RewardFn reward);

  void begin_episode(std::uint64_t episode_seed);
  std::vector<double> act(std::span<const double> state);

  int steps_planned() const { return call_index_; }
  int n_discarded() const { return n_discarded_; }

 private:
  const Oracle* oracle_;
  PlannerConfig cfg_;
  RewardFn reward_;
  std::optional<Matrix> warm_mean_;
  std::uint64_t episode_seed_ = 0;
  int call_index_ = 0;
  int n_discarded_ = 0;
};

// One fresh, seeded MpcPolicy per episode; suitable for data::PolicyFactory
// and safe for episodes running in parallel.
data::PolicyFactory mpc_policy_factory(std::shared_ptr<const Oracle> oracle, PlannerConfig cfg,
                                       RewardFn reward);

struct MpcEvalResult {
  double mean_reward = 0.0;
  std::vector<env::EpisodeResult> episodes;
};

// Mean episode reward of MPC through `oracle` over n_episodes seeded runs
// (episode k derives its seed from (seed, k)); episodes run in parallel. The
// planner optimizes the reward of env_params and the rollout itself happens
// in the true environment with the same reward.
MpcEvalResult evaluate_mpc_reward(const Oracle& oracle, const PlannerConfig& cfg,
                                  const env::CartpoleParams& env_params, int n_episodes,
                                  int horizon, std::uint64_t seed);

}  // namespace mbrl::planner
