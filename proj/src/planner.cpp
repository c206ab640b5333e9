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

#include "mbrl/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mbrl/rng.hpp"

namespace mbrl::planner {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void PlannerConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("planner horizon must be >= 1");
  if (n_candidates < 1) throw std::invalid_argument("planner needs >= 1 candidate");
  if (method == Method::Cem) {
    if (n_elites < 1 || n_elites > n_candidates)
      throw std::invalid_argument("need 1 <= n_elites <= n_candidates");
    if (cem_iterations < 1) throw std::invalid_argument("cem_iterations must be >= 1");
    if (!(smoothing_alpha >= 0.0 && smoothing_alpha < 1.0))
      throw std::invalid_argument("smoothing alpha must be in [0, 1)");
  }
  if (!(action_lo < action_hi)) throw std::invalid_argument("action bounds inverted");
}

PlannerConfig PlannerConfig::cartpole_cem() { return PlannerConfig{}; }

PlannerConfig PlannerConfig::cartpole_random() {
  PlannerConfig cfg;
  cfg.method = Method::Random;
  cfg.n_candidates = 2000;
  return cfg;
}

void TrueDynamicsOracle::step_batch(Matrix& states, const Matrix& actions,
                                    std::vector<std::uint8_t>& valid) const {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < states.rows; ++i) {
    if (!valid[i]) continue;
    const double* srow = states.row(i);
    const env::CartpoleState s{srow[0], srow[1], srow[2], srow[3]};
    const env::CartpoleState nx = env::step(s, actions.at(i, 0), params_);
    if (!nx.finite()) {
      valid[i] = 0;
      continue;
    }
    double* out = states.row(i);
    out[0] = nx.x;
    out[1] = nx.x_dot;
    out[2] = nx.theta;
    out[3] = nx.theta_dot;
  }
}

void ModelOracle::step_batch(Matrix& states, const Matrix& actions,
                             std::vector<std::uint8_t>& valid) const {
  // per-OMP-thread buffers; reused across the many calls one rollout makes.
  // Only the master thread of a rollout touches them (the loop below is
  // deliberately serial; the heavy matmuls inside the forward pass are the
  // parallel part).
  thread_local model::DynamicsModel::BatchScratch scratch;
  thread_local Matrix delta;
  model_->predict_delta_batch(states, actions, delta, scratch);
  const auto& angular = model_->config().angular_state_dims;
  const int d_s = model_->d_s();
  for (int i = 0; i < states.rows; ++i) {
    if (!valid[i]) continue;
    double* srow = states.row(i);
    const double* drow = delta.row(i);
    bool ok = true;
    for (int d = 0; d < d_s; ++d) {
      srow[d] += drow[d];
      if (!std::isfinite(srow[d])) ok = false;
    }
    if (!ok) {
      valid[i] = 0;
      continue;
    }
    for (const int d : angular) srow[d] = env::wrap_angle(srow[d]);
  }
}

RewardFn make_cartpole_reward(const env::CartpoleParams& params) {
  return [params](std::span<const double> s, std::span<const double> a) {
    return env::reward(env::CartpoleState{s[0], s[1], s[2], s[3]}, a[0], params);
  };
}

BatchEval evaluate_candidates(const Oracle& oracle, std::span<const double> s0,
                              const Matrix& candidates, int horizon, const RewardFn& reward) {
  const int n = candidates.rows;
  const int d_s = oracle.state_dim();
  const int d_a = oracle.action_dim();

  Matrix states(n, d_s);
  for (int i = 0; i < n; ++i) std::copy(s0.begin(), s0.end(), states.row(i));
  std::vector<std::uint8_t> valid(n, 1);
  BatchEval eval;
  eval.returns.assign(n, 0.0);

  Matrix step_actions(n, d_a);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i) {
      const double* crow = candidates.row(i) + static_cast<std::size_t>(t) * d_a;
      std::copy(crow, crow + d_a, step_actions.row(i));
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      if (!valid[i]) continue;
      eval.returns[i] += reward(states.row_span(i), step_actions.row_span(i));
    }
    oracle.step_batch(states, step_actions, valid);
  }

  for (int i = 0; i < n; ++i) {
    if (!valid[i] || !std::isfinite(eval.returns[i])) {
      eval.returns[i] = kNegInf;
      ++eval.n_discarded;
    }
  }
  return eval;
}

double evaluate_sequence(const Oracle& oracle, std::span<const double> s0,
                         const Matrix& actions, const RewardFn& reward) {
  if (actions.cols != oracle.action_dim())
    throw std::invalid_argument("action sequence dims do not match oracle");
  Matrix flat(1, actions.rows * actions.cols);
  std::copy(actions.data.begin(), actions.data.end(), flat.data.begin());
  return evaluate_candidates(oracle, s0, flat, actions.rows, reward).returns[0];
}

namespace {

// Indices of the n_elites best returns, deterministic under ties.
std::vector<int> elite_indices(const std::vector<double>& returns, int n_elites) {
  std::vector<int> order(returns.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (returns[a] != returns[b]) return returns[a] > returns[b];
    return a < b;
  });
  order.resize(n_elites);
  return order;
}

}  // namespace

ActionPlan plan_cem(const Oracle& oracle, std::span<const double> s0, const PlannerConfig& cfg,
                    const RewardFn& reward, const Matrix* warm_mean) {
  cfg.validate();
  const int d_a = oracle.action_dim();
  const int t_dim = cfg.horizon * d_a;

  Matrix mean(cfg.horizon, d_a);
  if (warm_mean) {
    if (warm_mean->rows != cfg.horizon || warm_mean->cols != d_a)
      throw std::invalid_argument("warm start mean has wrong shape");
    mean = *warm_mean;
  }
  Matrix stddev(cfg.horizon, d_a);
  std::fill(stddev.data.begin(), stddev.data.end(), cfg.resolved_init_std());

  Rng rng(derive_seed(cfg.seed, 0xce3));
  std::normal_distribution<double> normal(0.0, 1.0);

  ActionPlan plan;
  plan.actions.resize(cfg.horizon, d_a);
  double best_ever = kNegInf;
  Matrix best_candidate(cfg.horizon, d_a);

  Matrix candidates(cfg.n_candidates, t_dim);
  for (int iter = 0; iter < cfg.cem_iterations; ++iter) {
    for (int i = 0; i < cfg.n_candidates; ++i) {
      double* row = candidates.row(i);
      for (int k = 0; k < t_dim; ++k)
        row[k] = std::clamp(mean.data[k] + stddev.data[k] * normal(rng), cfg.action_lo,
                            cfg.action_hi);
    }
    const BatchEval eval = evaluate_candidates(oracle, s0, candidates, cfg.horizon, reward);
    plan.n_discarded += eval.n_discarded;

    const std::vector<int> elites = elite_indices(eval.returns, cfg.n_elites);
    if (eval.returns[elites[0]] == kNegInf)
      throw std::runtime_error("model diverges from s0");
    if (eval.returns[elites[0]] > best_ever) {
      best_ever = eval.returns[elites[0]];
      std::copy(candidates.row(elites[0]), candidates.row(elites[0]) + t_dim,
                best_candidate.data.begin());
    }
    plan.best_return_history.push_back(best_ever);

    Matrix elite_mean(cfg.horizon, d_a);
    Matrix elite_var(cfg.horizon, d_a);
    const double inv_e = 1.0 / static_cast<double>(cfg.n_elites);
    for (const int idx : elites) {
      const double* row = candidates.row(idx);
      for (int k = 0; k < t_dim; ++k) elite_mean.data[k] += row[k];
    }
    for (int k = 0; k < t_dim; ++k) elite_mean.data[k] *= inv_e;
    for (const int idx : elites) {
      const double* row = candidates.row(idx);
      for (int k = 0; k < t_dim; ++k) {
        const double diff = row[k] - elite_mean.data[k];
        elite_var.data[k] += diff * diff;
      }
    }
    for (int k = 0; k < t_dim; ++k) {
      mean.data[k] = cfg.smoothing_alpha * mean.data[k] +
                     (1.0 - cfg.smoothing_alpha) * elite_mean.data[k];
      stddev.data[k] = cfg.smoothing_alpha * stddev.data[k] +
                       (1.0 - cfg.smoothing_alpha) * std::sqrt(elite_var.data[k] * inv_e);
    }
    plan.elite_mean_history.push_back(elite_mean);
  }

  for (int k = 0; k < t_dim; ++k)
    plan.actions.data[k] = std::clamp(mean.data[k], cfg.action_lo, cfg.action_hi);
  plan.predicted_return = evaluate_sequence(oracle, s0, plan.actions, reward);
  if (!std::isfinite(plan.predicted_return)) {
    // the smoothed mean itself diverges; fall back to the best sampled
    // candidate so the returned plan always has a finite return
    plan.actions = best_candidate;
    plan.predicted_return = best_ever;
  }
  return plan;
}

ActionPlan plan_random(const Oracle& oracle, std::span<const double> s0,
                       const PlannerConfig& cfg, const RewardFn& reward) {
  cfg.validate();
  const int d_a = oracle.action_dim();
  const int t_dim = cfg.horizon * d_a;

  Rng rng(derive_seed(cfg.seed, 0x7a2d));
  std::uniform_real_distribution<double> uniform(cfg.action_lo, cfg.action_hi);
  Matrix candidates(cfg.n_candidates, t_dim);
  for (double& v : candidates.data) v = uniform(rng);

  const BatchEval eval = evaluate_candidates(oracle, s0, candidates, cfg.horizon, reward);
  int best = 0;
  for (int i = 1; i < cfg.n_candidates; ++i)
    if (eval.returns[i] > eval.returns[best]) best = i;
  if (eval.returns[best] == kNegInf) throw std::runtime_error("model diverges from s0");

  ActionPlan plan;
  plan.actions.resize(cfg.horizon, d_a);
  std::copy(candidates.row(best), candidates.row(best) + t_dim, plan.actions.data.begin());
  plan.predicted_return = eval.returns[best];
  plan.best_return_history.push_back(eval.returns[best]);
  plan.n_discarded = eval.n_discarded;
  return plan;
}

ActionPlan plan(const Oracle& oracle, std::span<const double> s0, const PlannerConfig& cfg,
                const RewardFn& reward, const Matrix* warm_mean) {
  if (cfg.method == PlannerConfig::Method::Cem)
    return plan_cem(oracle, s0, cfg, reward, warm_mean);
  return plan_random(oracle, s0, cfg, reward);
}

MpcPolicy::MpcPolicy(const Oracle& oracle, const PlannerConfig& cfg, RewardFn reward)
    : oracle_(&oracle), cfg_(cfg), reward_(std::move(reward)) {
  cfg_.validate();
}

void MpcPolicy::begin_episode(std::uint64_t episode_seed) {
  episode_seed_ = episode_seed;
  call_index_ = 0;
  n_discarded_ = 0;
  warm_mean_.reset();
}

std::vector<double> MpcPolicy::act(std::span<const double> state) {
  PlannerConfig step_cfg = cfg_;
  step_cfg.seed = derive_seed(mix64(cfg_.seed) ^ mix64(episode_seed_), call_index_);
  const Matrix* warm =
      (cfg_.warm_start && warm_mean_ && cfg_.method == PlannerConfig::Method::Cem)
          ? &*warm_mean_
          : nullptr;
  ActionPlan p = plan(*oracle_, state, step_cfg, reward_, warm);
  n_discarded_ += p.n_discarded;
  ++call_index_;

  if (cfg_.warm_start) {
    // shift the plan forward one step, zero-pad the tail
    Matrix next(cfg_.horizon, p.actions.cols);
    for (int t = 0; t + 1 < cfg_.horizon; ++t)
      std::copy(p.actions.row(t + 1), p.actions.row(t + 1) + p.actions.cols, next.row(t));
    warm_mean_ = std::move(next);
  }
  return std::vector<double>(p.actions.row(0), p.actions.row(0) + p.actions.cols);
}

MpcEvalResult evaluate_mpc_reward(const Oracle& oracle, const PlannerConfig& cfg,
                                  const env::CartpoleParams& env_params, int n_episodes,
                                  int horizon, std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("need >= 1 evaluation episode");
  const RewardFn reward = make_cartpole_reward(env_params);
  MpcEvalResult result;
  result.episodes.resize(n_episodes);
#pragma omp parallel for schedule(dynamic) if (n_episodes > 1)
  for (int k = 0; k < n_episodes; ++k) {
    const std::uint64_t episode_seed = derive_seed(seed, 0xe9a1, k);
    MpcPolicy policy(oracle, cfg, reward);
    policy.begin_episode(episode_seed);
    result.episodes[k] = env::rollout(
        [&policy](const env::CartpoleState& s) {
          const auto arr = s.as_array();
          return policy.act(std::span<const double>(arr.data(), arr.size()))[0];
        },
        horizon, episode_seed, env_params);
  }
  double total = 0.0;
  for (const auto& ep : result.episodes) total += ep.total_reward;
  result.mean_reward = total / n_episodes;
  return result;
}

data::PolicyFactory mpc_policy_factory(std::shared_ptr<const Oracle> oracle, PlannerConfig cfg,
                                       RewardFn reward) {
  return [oracle, cfg, reward](std::uint64_t episode_seed) -> env::Policy {
    auto policy = std::make_shared<MpcPolicy>(*oracle, cfg, reward);
    policy->begin_episode(episode_seed);
    return [oracle, policy](const env::CartpoleState& s) {
      const auto arr = s.as_array();
      return policy->act(std::span<const double>(arr.data(), arr.size()))[0];
    };
  };
}

}  // namespace mbrl::planner
