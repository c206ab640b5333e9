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

#include "mbrl/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mbrl/rng.hpp"

namespace mbrl::adversarial {

void AttackConfig::validate() const {
  if (population < 0 || parents < 0) throw std::invalid_argument("attack population/parents < 0");
  if (parents > 0 && population > 0 && parents > population)
    throw std::invalid_argument("attack needs mu <= lambda");
  if (max_generations < 0) throw std::invalid_argument("attack max_generations < 0");
  if (trials_per_eval < 1) throw std::invalid_argument("attack trials_per_eval must be >= 1");
  if (episode_horizon < 1) throw std::invalid_argument("attack episode_horizon must be >= 1");
  if (ll_tolerance < 0.0) throw std::invalid_argument("attack ll_tolerance must be >= 0");
}

std::vector<double> output_layer_params(const model::DynamicsModel& m) {
  std::vector<double> flat;
  for (int e = 0; e < m.n_members(); ++e) {
    const auto member_flat = model::flatten_layer(m.member(e).layers.back());
    flat.insert(flat.end(), member_flat.begin(), member_flat.end());
  }
  return flat;
}

void set_output_layer_params(model::DynamicsModel& m, std::span<const double> flat) {
  std::size_t offset = 0;
  for (int e = 0; e < m.n_members(); ++e) {
    auto& layer = m.member(e).layers.back();
    const std::size_t count = layer.w.size() + layer.b.size();
    if (offset + count > flat.size())
      throw std::invalid_argument("output-layer parameter vector too short");
    model::unflatten_layer(flat.subspan(offset, count), layer);
    offset += count;
  }
  if (offset != flat.size())
    throw std::invalid_argument("output-layer parameter vector too long");
}

double hinge_penalty(double baseline_ll, double candidate_ll, double tolerance, double coeff) {
  return coeff * std::max(0.0, baseline_ll - candidate_ll - tolerance);
}

AttackObjective::AttackObjective(const model::DynamicsModel& baseline,
                                 const data::TransitionSet& val_set,
                                 const planner::PlannerConfig& planner_cfg,
                                 const env::CartpoleParams& env_params, const AttackConfig& cfg)
    : baseline_(&baseline),
      val_set_(&val_set),
      planner_cfg_(planner_cfg),
      env_params_(env_params),
      cfg_(cfg) {
  cfg_.validate();
  if (val_set.empty()) throw std::invalid_argument("attack needs a nonempty validation set");

  const planner::ModelOracle oracle(*baseline_);
  baseline_reward_ = planner::evaluate_mpc_reward(oracle, planner_cfg_, env_params_,
                                                  cfg_.trials_per_eval, cfg_.episode_horizon,
                                                  derive_seed(cfg_.seed, 0xa77e))
                         .mean_reward;
  baseline_ll_ =
      baseline_->evaluate_ll(*val_set_, baseline_->config().batch_size, data::BatchMode::Random)
          .mean_ll;
  penalty_coeff_ = cfg_.ll_penalty_coeff > 0.0
                       ? cfg_.ll_penalty_coeff
                       : 1000.0 * std::max(1.0, std::abs(baseline_reward_));
}

AttackObjective::Eval AttackObjective::evaluate(std::span<const double> candidate) const {
  model::DynamicsModel perturbed = *baseline_;
  set_output_layer_params(perturbed, candidate);

  Eval eval;
  eval.ll = perturbed
                .evaluate_ll(*val_set_, perturbed.config().batch_size, data::BatchMode::Random)
                .mean_ll;
  const planner::ModelOracle oracle(perturbed);
  try {
    eval.reward = planner::evaluate_mpc_reward(oracle, planner_cfg_, env_params_,
                                               cfg_.trials_per_eval, cfg_.episode_horizon,
                                               derive_seed(cfg_.seed, 0xa77e))
                      .mean_reward;
  } catch (const std::runtime_error&) {
    // the perturbed model diverged from some state; hopeless candidate
    eval.fitness = std::numeric_limits<double>::infinity();
    eval.reward = std::numeric_limits<double>::quiet_NaN();
    return eval;
  }
  eval.fitness = eval.reward + hinge_penalty(baseline_ll_, eval.ll, cfg_.ll_tolerance,
                                             penalty_coeff_);
  if (!std::isfinite(eval.fitness)) eval.fitness = std::numeric_limits<double>::infinity();
  return eval;
}

AttackResult attack(const model::DynamicsModel& baseline, const data::TransitionSet& val_set,
                    const env::CartpoleParams& env_params,
                    const planner::PlannerConfig& planner_cfg, const AttackConfig& cfg) {
  cfg.validate();
  const AttackObjective objective(baseline, val_set, planner_cfg, env_params, cfg);

  AttackResult result;
  result.baseline_reward = objective.baseline_reward();
  result.baseline_ll = objective.baseline_ll();

  const std::vector<double> x0 = output_layer_params(baseline);

  // The unperturbed layer satisfies the constraint by construction, so the
  // attack can always fall back to the baseline.
  std::vector<double> best_feasible_x = x0;
  double best_feasible_reward = result.baseline_reward;
  double best_feasible_ll = result.baseline_ll;
  bool found_feasible = true;

  double sigma0 = cfg.sigma0;
  if (sigma0 <= 0.0) {
    const auto& w = baseline.member(0).layers.back().w.data;
    double m = 0.0;
    for (const double v : w) m += v;
    m /= static_cast<double>(w.size());
    double var = 0.0;
    for (const double v : w) var += (v - m) * (v - m);
    var /= static_cast<double>(w.size());
    sigma0 = 0.05 * std::sqrt(std::max(var, 1e-12));
  }

  if (cfg.max_generations > 0) {
    // per-candidate evals of the current generation, written by index
    std::vector<AttackObjective::Eval> gen_evals;

    es::CmaConfig cma;
    cma.population = cfg.population;
    cma.parents = cfg.parents;
    cma.sigma0 = sigma0;
    cma.max_generations = cfg.max_generations;
    cma.seed = derive_seed(cfg.seed, 0xc3a3);
    cma.covariance = cfg.covariance;
    cma.on_generation = [&](int gen, const Matrix& population,
                            const std::vector<double>& fitness, double sigma) {
      int best = 0;
      for (int i = 1; i < population.rows; ++i)
        if (fitness[i] < fitness[best]) best = i;
      GenerationRecord rec;
      rec.generation = gen;
      rec.best_fitness = fitness[best];
      rec.sigma = sigma;
      rec.reward = gen_evals[best].reward;
      rec.ll = gen_evals[best].ll;
      result.history.push_back(rec);

      for (int i = 0; i < population.rows; ++i) {
        const auto& ev = gen_evals[i];
        if (!std::isfinite(ev.fitness)) continue;
        if (ev.ll >= result.baseline_ll - cfg.ll_tolerance &&
            ev.reward < best_feasible_reward) {
          best_feasible_reward = ev.reward;
          best_feasible_ll = ev.ll;
          best_feasible_x.assign(population.row(i), population.row(i) + population.cols);
          found_feasible = true;
        }
      }
      if (cfg.stop_reward_fraction > 0.0 &&
          best_feasible_reward <= cfg.stop_reward_fraction * result.baseline_reward)
        return false;
      return true;
    };

    const es::BatchObjectiveFn batch = [&](const Matrix& population) {
      gen_evals.assign(population.rows, {});
      std::vector<double> fitness(population.rows);
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < population.rows; ++i) {
        gen_evals[i] = objective.evaluate(population.row_span(i));
        fitness[i] = gen_evals[i].fitness;
      }
      return fitness;
    };

    es::cma_es_minimize(batch, x0, cma);
  }

  if (!found_feasible)
    throw std::runtime_error("attack infeasible under tolerance");

  result.perturbed = baseline;
  set_output_layer_params(result.perturbed, best_feasible_x);
  result.final_reward = best_feasible_reward;
  result.final_ll = best_feasible_ll;
  return result;
}

}  // namespace mbrl::adversarial
