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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbrl/attack.hpp"
#include "mbrl/cartpole.hpp"
#include "mbrl/dataset.hpp"
#include "mbrl/dynamics_model.hpp"
#include "mbrl/planner.hpp"

namespace mbrl::config {

// Complete default tree; every experiment key has a default mirroring the
// stock cartpole setup, so a config file only lists what it changes.
nlohmann::json defaults();

// Deep-merges `user` over the defaults. Unknown keys are rejected with their
// full dot path (std::invalid_argument); map-valued nodes (dataset tag ->
// path tables) accept arbitrary keys.
nlohmann::json resolve(const nlohmann::json& user);

nlohmann::json load_file(const std::filesystem::path& path);

// "planner.horizon=30" style override applied before resolution; the value
// is parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& user, const std::string& assignment);

// Stable content hash of a resolved tree.
std::string config_hash(const nlohmann::json& resolved);

// Typed views over a resolved tree.
env::CartpoleParams env_params(const nlohmann::json& resolved);
model::ModelConfig model_config(const nlohmann::json& resolved);
planner::PlannerConfig planner_config(const nlohmann::json& resolved);
adversarial::AttackConfig attack_config(const nlohmann::json& resolved);
data::Bounds data_bounds(const nlohmann::json& resolved);

}  // namespace mbrl::config
