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

#include "mbrl/config.hpp"

#include <doctest.h>

#include <stdexcept>

using namespace mbrl;
using nlohmann::json;

TEST_CASE("defaults mirror the stock setup") {
  const json resolved = config::resolve(json::object());
  const auto env = config::env_params(resolved);
  CHECK(env.cart_mass == 1.0);
  CHECK(env.pole_length == 0.3);
  CHECK(env.dt == 0.05);

  const auto model = config::model_config(resolved);
  CHECK(model.kind == model::ModelKind::P);
  CHECK(model.width == 500);
  CHECK(model.depth == 2);
  CHECK(model.batch_size == 16);
  CHECK(model.epochs_full == 100);
  CHECK(model.learning_rate == 1e-4);
  CHECK(model.angular_state_dims == std::vector<int>{2});

  const auto planner = config::planner_config(resolved);
  CHECK(planner.horizon == 25);
  CHECK(planner.n_candidates == 400);
  CHECK(planner.n_elites == 40);
  CHECK(planner.cem_iterations == 5);

  const auto bounds = config::data_bounds(resolved);
  CHECK(bounds.dims() == 5);
  CHECK(bounds.lo[0] == -3.0);
}

TEST_CASE("unknown keys are rejected with their dot path") {
  json user = {{"planner", {{"horizont", 30}}}};
  CHECK_THROWS_WITH_AS(config::resolve(user), "unknown config key: planner.horizont",
                       std::invalid_argument);
  json top = {{"blorp", 1}};
  CHECK_THROWS_WITH_AS(config::resolve(top), "unknown config key: blorp",
                       std::invalid_argument);
}

TEST_CASE("dataset tag tables accept arbitrary keys") {
  json user = {{"sweep", {{"datasets", {{"mystuff", "a.csv"}, {"other", "b.csv"}}}}}};
  const json resolved = config::resolve(user);
  CHECK(resolved.at("sweep").at("datasets").size() == 2);
}

TEST_CASE("overrides parse typed values and create paths") {
  json user = json::object();
  config::apply_override(user, "planner.horizon=30");
  config::apply_override(user, "model.kind=PE");
  config::apply_override(user, "model.ensemble_size=5");
  config::apply_override(user, "planner.warm_start=false");
  const json resolved = config::resolve(user);
  CHECK(config::planner_config(resolved).horizon == 30);
  CHECK(config::planner_config(resolved).warm_start == false);
  CHECK(config::model_config(resolved).kind == model::ModelKind::PE);
  CHECK(config::model_config(resolved).ensemble_size == 5);

  CHECK_THROWS_AS(config::apply_override(user, "no-equals-sign"), std::invalid_argument);
}

TEST_CASE("config hash is stable and sensitive") {
  const json a = config::resolve(json::object());
  json user = {{"seed", 1}};
  const json b = config::resolve(user);
  CHECK(config::config_hash(a) == config::config_hash(config::resolve(json::object())));
  CHECK(config::config_hash(a) != config::config_hash(b));
}

TEST_CASE("invalid values surface through validation") {
  json user = {{"model", {{"kind", "Q"}}}};
  CHECK_THROWS_AS(config::model_config(config::resolve(user)), std::invalid_argument);
  json bad_planner = {{"planner", {{"n_elites", 999}}}};
  CHECK_THROWS_AS(config::planner_config(config::resolve(bad_planner)),
                  std::invalid_argument);
}
