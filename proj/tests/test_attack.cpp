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

#include <doctest.h>

#include <cmath>

#include "mbrl/rng.hpp"

using namespace mbrl;
using namespace mbrl::adversarial;

namespace {

// quick-to-train tiny setup shared by the attack unit tests
struct Setup {
  env::CartpoleParams env;
  model::DynamicsModel model;
  data::TransitionSet val;
  planner::PlannerConfig planner;

  Setup() {
    model::ModelConfig mc;
    mc.kind = model::ModelKind::P;
    mc.width = 8;
    mc.depth = 1;
    mc.epochs_full = 15;
    mc.learning_rate = 3e-3;
    mc.angular_state_dims = {2};
    mc.seed = 2;

    data::PolicyFactory random_policy = [](std::uint64_t seed) {
      auto rng = std::make_shared<Rng>(seed);
      return [rng](const env::CartpoleState&) {
        return std::uniform_real_distribution<double>(-1.0, 1.0)(*rng);
      };
    };
    auto set = data::collect_on_policy(random_policy, 3, 40, 5, env);
    auto parts = data::split(set, 0.8, 1);

    model = model::DynamicsModel::create(mc, 4, 1);
    model.train(parts.first, parts.second, model::WeightSpec{});
    val = std::move(parts.second);

    planner.horizon = 5;
    planner.n_candidates = 24;
    planner.n_elites = 4;
    planner.cem_iterations = 2;
    planner.seed = 3;
  }
};

AttackConfig tiny_attack() {
  AttackConfig cfg;
  cfg.trials_per_eval = 2;
  cfg.episode_horizon = 15;
  cfg.max_generations = 0;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("hinge penalty") {
  CHECK(hinge_penalty(4.8, 4.8, 0.05, 1000.0) == 0.0);
  CHECK(hinge_penalty(4.8, 5.1, 0.05, 1000.0) == 0.0);          // LL improved
  CHECK(hinge_penalty(4.8, 4.75, 0.05, 1000.0) == 0.0);         // exactly at tolerance
  CHECK(hinge_penalty(4.8, 4.70, 0.05, 1000.0) ==
        doctest::Approx(50.0));                                 // 0.05 beyond tolerance
}

TEST_CASE("output layer params round trip") {
  const Setup s;
  const auto flat = output_layer_params(s.model);
  const auto& last = s.model.member(0).layers.back();
  CHECK(flat.size() == last.w.size() + last.b.size());

  auto copy = s.model;
  auto modified = flat;
  for (double& v : modified) v += 0.25;
  set_output_layer_params(copy, modified);
  CHECK(output_layer_params(copy) == modified);
  // non-final layers untouched
  for (std::size_t l = 0; l + 1 < copy.member(0).layers.size(); ++l)
    CHECK(copy.member(0).layers[l] == s.model.member(0).layers[l]);

  CHECK_THROWS_AS(set_output_layer_params(copy, std::vector<double>(3)),
                  std::invalid_argument);
}

TEST_CASE("fitness of the unperturbed layer is the baseline reward") {
  const Setup s;
  const AttackObjective objective(s.model, s.val, s.planner, s.env, tiny_attack());
  const auto eval = objective.evaluate(output_layer_params(s.model));
  CHECK(eval.reward == doctest::Approx(objective.baseline_reward()));
  CHECK(eval.ll == doctest::Approx(objective.baseline_ll()));
  CHECK(eval.fitness == doctest::Approx(objective.baseline_reward()));
}

TEST_CASE("zeroing the output layer collapses the likelihood") {
  const Setup s;
  const AttackObjective objective(s.model, s.val, s.planner, s.env, tiny_attack());
  const auto n = output_layer_params(s.model).size();
  const auto eval = objective.evaluate(std::vector<double>(n, 0.0));
  CHECK(eval.ll < objective.baseline_ll());
  // the penalty dwarfs any reward the crippled model could reach
  CHECK(eval.fitness > objective.baseline_reward());
}

TEST_CASE("zero generations returns the baseline") {
  const Setup s;
  const auto result = attack(s.model, s.val, s.env, s.planner, tiny_attack());
  CHECK(result.final_reward == result.baseline_reward);
  CHECK(result.final_ll == result.baseline_ll);
  CHECK(result.history.empty());
  CHECK(output_layer_params(result.perturbed) == output_layer_params(s.model));
}

TEST_CASE("attack keeps the constraint and never mutates the baseline") {
  const Setup s;
  const auto before = output_layer_params(s.model);
  AttackConfig cfg = tiny_attack();
  cfg.max_generations = 4;
  cfg.population = 6;
  cfg.ll_tolerance = 0.5;
  const auto result = attack(s.model, s.val, s.env, s.planner, cfg);

  CHECK(output_layer_params(s.model) == before);  // original untouched
  CHECK(result.final_ll >= result.baseline_ll - cfg.ll_tolerance);
  CHECK(result.final_reward <= result.baseline_reward + 1e-12);
  CHECK(result.history.size() <= 4);
  for (std::size_t g = 1; g < result.history.size(); ++g)
    CHECK(result.history[g].generation == static_cast<int>(g));

  // every non-final layer of the perturbed model is bit-identical
  for (std::size_t l = 0; l + 1 < result.perturbed.member(0).layers.size(); ++l)
    CHECK(result.perturbed.member(0).layers[l] == s.model.member(0).layers[l]);
}
