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

#include <fstream>
#include <set>
#include <stdexcept>

#include "mbrl/experiments.hpp"

namespace mbrl::config {

namespace {

// nodes whose children are free-form tag -> value tables
const std::set<std::string> kOpenNodes = {"sweep.datasets", "curve.val_sets"};

void check_keys(const nlohmann::json& user, const nlohmann::json& schema,
                const std::string& path) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!schema.is_object() || !schema.contains(key))
      throw std::invalid_argument("unknown config key: " + full);
    if (value.is_object() && !kOpenNodes.contains(full))
      check_keys(value, schema.at(key), full);
  }
}

void deep_merge(nlohmann::json& base, const nlohmann::json& user) {
  if (!user.is_object()) {
    base = user;
    return;
  }
  for (const auto& [key, value] : user.items()) {
    if (value.is_object() && base.contains(key) && base.at(key).is_object())
      deep_merge(base.at(key), value);
    else
      base[key] = value;
  }
}

}  // namespace

nlohmann::json defaults() {
  nlohmann::json j;
  j["seed"] = 0;
  j["out_dir"] = "";
  j["workers"] = 0;

  j["env"] = {{"cart_mass", 1.0},
              {"pole_mass", 0.1},
              {"pole_length", 0.3},
              {"gravity", 9.81},
              {"force_scale", 10.0},
              {"dt", 0.05},
              {"substeps", 4},
              {"x_goal", 0.0},
              {"reward_lengthscale", 0.6},
              {"action_penalty", 0.01},
              {"reset_noise_std", 0.01}};

  j["model"] = {{"kind", "P"},
                {"ensemble_size", 1},
                {"width", 500},
                {"depth", 2},
                {"activation", "swish"},
                {"learning_rate", 1e-4},
                {"batch_size", 16},
                {"epochs_full", 100},
                {"epochs_initial", 100},
                {"epochs_incremental", 10},
                {"weight_decay", 0.0},
                {"logvar_min", -10.0},
                {"logvar_max", 0.5},
                {"angular_state_dims", nlohmann::json::array({2})}};

  j["planner"] = {{"method", "cem"},
                  {"horizon", 25},
                  {"n_candidates", 400},
                  {"n_elites", 40},
                  {"cem_iterations", 5},
                  {"smoothing_alpha", 0.1},
                  {"action_lo", -1.0},
                  {"action_hi", 1.0},
                  {"init_action_std", 0.0},
                  {"warm_start", true}};

  j["data"] = {{"grid_slices", 7},
               {"sampled_n", 10000},
               {"pool_size", 1000000},
               {"bounds_lo", nlohmann::json::array()},
               {"bounds_hi", nlohmann::json::array()},
               {"on_policy_trials", 10},
               {"expert_trials", 12},
               {"expert_threshold", 0.0},
               {"expert_threshold_fraction", 0.99},
               {"rstar", 0.0},
               {"expert_max_attempts", 96},
               {"babble_count", 20},
               {"babble_horizon", 10},
               {"filter_epsilon", 1.0},
               {"filter_S", 100},
               {"filter_metric", "point"},
               {"expert_path", ""},
               {"checkpoint", ""},
               {"horizon", 200}};

  j["pets"] = {{"n_trials", 20},
               {"horizon", 200},
               {"initial_random_episodes", 1},
               {"train_fraction", 0.9},
               {"stop_at_reward", 0.0},
               {"n_seeds", 1}};

  j["train"] = {{"train_set", ""},
                {"val_set", ""},
                {"weight_mode", "none"},
                {"weight_scale", 1.0},
                {"weight_cutoff", 0.0},
                {"mode", "full"},
                {"val_batching", "random"},
                {"checkpoint_out", "model.ckpt"}};

  j["sweep"] = {{"checkpoints", nlohmann::json::array()},
                {"checkpoint_glob", ""},
                {"datasets", nlohmann::json::object()},
                {"n_eval", 10},
                {"batch_size", 16},
                {"horizon", 200}};

  j["curve"] = {{"train_set", ""},
                {"val_sets", nlohmann::json::object()},
                {"eval_every", 10},
                {"n_eval", 3},
                {"train_fraction", 0.9},
                {"horizon", 200}};

  j["heatmap"] = {{"s_grid", nlohmann::json::array({30, 100, 300, 1000})},
                  {"eps_grid", nlohmann::json::array({0.5, 2.0, 8.0})},
                  {"weight_mode", "distance"},
                  {"run_weighted", true},
                  {"run_plain", true},
                  {"n_seeds", 5},
                  {"n_eval", 2},
                  {"pool_size", 1000000},
                  {"expert_path", ""},
                  {"horizon", 200}};

  j["babble"] = {{"counts", nlohmann::json::array({20, 200})},
                 {"n_seeds", 5},
                 {"horizon", 10},
                 {"reward_threshold", 0.0}};

  j["goalgen"] = {{"checkpoints", nlohmann::json::array()},
                  {"checkpoint_glob", ""},
                  {"goals", nlohmann::json::array({-1.0, -0.5, -0.2, -0.1, 0.1, 0.2, 0.5, 1.0})},
                  {"n_eval", 3},
                  {"horizon", 200}};

  j["compare"] = {{"model_a", ""}, {"model_b", ""}, {"expert_episode", ""}};

  j["attack"] = {{"checkpoint", ""},
                 {"val_set", ""},
                 {"population", 16},
                 {"parents", 0},
                 {"sigma0", 0.0},
                 {"max_generations", 300},
                 {"trials_per_eval", 5},
                 {"ll_penalty_coeff", 0.0},
                 {"ll_tolerance", 0.0},
                 {"covariance", "diagonal"},
                 {"episode_horizon", 200},
                 {"stop_reward_fraction", 0.0}};

  return j;
}

nlohmann::json resolve(const nlohmann::json& user) {
  nlohmann::json base = defaults();
  check_keys(user, base, "");
  deep_merge(base, user);
  return base;
}

nlohmann::json load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path.string() + ": " + e.what());
  }
  return j;
}

void apply_override(nlohmann::json& user, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like key.path=value: " + assignment);
  const std::string dotted = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;  // bare string
  }

  nlohmann::json* node = &user;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (key.empty()) throw std::invalid_argument("bad override path: " + dotted);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string config_hash(const nlohmann::json& resolved) {
  return diag::hash_hex(resolved.dump());
}

env::CartpoleParams env_params(const nlohmann::json& j) {
  const auto& e = j.at("env");
  env::CartpoleParams p;
  p.cart_mass = e.at("cart_mass").get<double>();
  p.pole_mass = e.at("pole_mass").get<double>();
  p.pole_length = e.at("pole_length").get<double>();
  p.gravity = e.at("gravity").get<double>();
  p.force_scale = e.at("force_scale").get<double>();
  p.dt = e.at("dt").get<double>();
  p.substeps = e.at("substeps").get<int>();
  p.x_goal = e.at("x_goal").get<double>();
  p.reward_lengthscale = e.at("reward_lengthscale").get<double>();
  p.action_penalty = e.at("action_penalty").get<double>();
  p.reset_noise_std = e.at("reset_noise_std").get<double>();
  p.validate();
  return p;
}

model::ModelConfig model_config(const nlohmann::json& j) {
  const auto& m = j.at("model");
  model::ModelConfig c;
  c.kind = model::model_kind_from_string(m.at("kind").get<std::string>());
  c.ensemble_size = m.at("ensemble_size").get<int>();
  c.width = m.at("width").get<int>();
  c.depth = m.at("depth").get<int>();
  const std::string act = m.at("activation").get<std::string>();
  if (act == "swish")
    c.activation = kern::Activation::Swish;
  else if (act == "relu")
    c.activation = kern::Activation::Relu;
  else if (act == "tanh")
    c.activation = kern::Activation::Tanh;
  else
    throw std::invalid_argument("unknown activation: " + act);
  c.learning_rate = m.at("learning_rate").get<double>();
  c.batch_size = m.at("batch_size").get<int>();
  c.epochs_full = m.at("epochs_full").get<int>();
  c.epochs_initial = m.at("epochs_initial").get<int>();
  c.epochs_incremental = m.at("epochs_incremental").get<int>();
  c.weight_decay = m.at("weight_decay").get<double>();
  c.logvar_min = m.at("logvar_min").get<double>();
  c.logvar_max = m.at("logvar_max").get<double>();
  c.angular_state_dims = m.at("angular_state_dims").get<std::vector<int>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

planner::PlannerConfig planner_config(const nlohmann::json& j) {
  const auto& p = j.at("planner");
  planner::PlannerConfig c;
  const std::string method = p.at("method").get<std::string>();
  if (method == "cem")
    c.method = planner::PlannerConfig::Method::Cem;
  else if (method == "random")
    c.method = planner::PlannerConfig::Method::Random;
  else
    throw std::invalid_argument("unknown planner method: " + method);
  c.horizon = p.at("horizon").get<int>();
  c.n_candidates = p.at("n_candidates").get<int>();
  c.n_elites = p.at("n_elites").get<int>();
  c.cem_iterations = p.at("cem_iterations").get<int>();
  c.smoothing_alpha = p.at("smoothing_alpha").get<double>();
  c.action_lo = p.at("action_lo").get<double>();
  c.action_hi = p.at("action_hi").get<double>();
  c.init_action_std = p.at("init_action_std").get<double>();
  c.warm_start = p.at("warm_start").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

adversarial::AttackConfig attack_config(const nlohmann::json& j) {
  const auto& a = j.at("attack");
  adversarial::AttackConfig c;
  c.population = a.at("population").get<int>();
  c.parents = a.at("parents").get<int>();
  c.sigma0 = a.at("sigma0").get<double>();
  c.max_generations = a.at("max_generations").get<int>();
  c.trials_per_eval = a.at("trials_per_eval").get<int>();
  c.ll_penalty_coeff = a.at("ll_penalty_coeff").get<double>();
  c.ll_tolerance = a.at("ll_tolerance").get<double>();
  const std::string cov = a.at("covariance").get<std::string>();
  if (cov == "full")
    c.covariance = es::CmaConfig::Covariance::Full;
  else if (cov == "diagonal")
    c.covariance = es::CmaConfig::Covariance::Diagonal;
  else
    throw std::invalid_argument("unknown covariance mode: " + cov);
  c.episode_horizon = a.at("episode_horizon").get<int>();
  c.stop_reward_fraction = a.at("stop_reward_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

data::Bounds data_bounds(const nlohmann::json& j) {
  const auto& d = j.at("data");
  const auto lo = d.at("bounds_lo").get<std::vector<double>>();
  const auto hi = d.at("bounds_hi").get<std::vector<double>>();
  if (lo.empty() && hi.empty()) return data::cartpole_bounds();
  data::Bounds b{lo, hi};
  b.validate();
  return b;
}

}  // namespace mbrl::config
