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

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbrl/attack.hpp"
#include "mbrl/config.hpp"
#include "mbrl/csv.hpp"
#include "mbrl/dataset.hpp"
#include "mbrl/dynamics_model.hpp"
#include "mbrl/experiments.hpp"
#include "mbrl/planner.hpp"
#include "mbrl/rng.hpp"
#include "mbrl/stats.hpp"
#include "mbrl/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMissingInput = 3;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_path, "experiment config file (JSON)");
  cmd->add_option("--set", opts.overrides, "dot-path override, e.g. planner.horizon=30");
  cmd->add_option("-o,--out", opts.out, "output directory");
  cmd->add_option("--seed", opts.seed, "master seed override");
  cmd->add_option("--workers", opts.workers, "worker threads (0 = default)");
}

json resolve(const CommonOpts& opts) {
  json user = json::object();
  if (!opts.config_path.empty()) {
    if (!fs::exists(opts.config_path))
      throw std::runtime_error("missing input file: " + opts.config_path);
    user = mbrl::config::load_file(opts.config_path);
  }
  for (const auto& o : opts.overrides) mbrl::config::apply_override(user, o);
  if (opts.seed) user["seed"] = *opts.seed;
  if (!opts.out.empty()) user["out_dir"] = opts.out;
  json resolved = mbrl::config::resolve(user);
  const int workers =
      opts.workers > 0 ? opts.workers : resolved.at("workers").get<int>();
  if (workers > 0) omp_set_num_threads(workers);
  return resolved;
}

fs::path out_dir(const json& resolved, const std::string& subcommand) {
  const std::string configured = resolved.at("out_dir").get<std::string>();
  if (!configured.empty()) return configured;
  const char* root = std::getenv("MBRLKIT_OUT");
  return fs::path(root ? root : "out") / subcommand;
}

void write_resolved(const json& resolved, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json", std::ios::trunc);
  out << resolved.dump(2) << '\n';
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw std::runtime_error("config is missing a path for " + what);
  if (!fs::exists(path)) throw std::runtime_error("missing input file: " + path);
}

// '*' wildcards within path components (no '**').
bool wildcard_match(const std::string& pattern, const std::string& text) {
  std::size_t p = 0, t = 0, star = std::string::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::vector<std::string> glob(const std::string& pattern) {
  fs::path pat(pattern);
  std::vector<fs::path> parts(pat.begin(), pat.end());
  std::vector<fs::path> frontier = {pat.is_absolute() ? fs::path("/") : fs::path(".")};
  for (const auto& part : parts) {
    const std::string p = part.string();
    if (p == "/" || p.empty()) continue;
    std::vector<fs::path> next;
    if (p.find('*') == std::string::npos) {
      for (const auto& base : frontier)
        if (fs::exists(base / p)) next.push_back(base / p);
    } else {
      for (const auto& base : frontier) {
        if (!fs::is_directory(base)) continue;
        for (const auto& entry : fs::directory_iterator(base))
          if (wildcard_match(p, entry.path().filename().string()))
            next.push_back(entry.path());
      }
    }
    frontier = std::move(next);
  }
  std::vector<std::string> out;
  for (const auto& f : frontier) out.push_back(fs::path(f).lexically_normal().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> checkpoint_list(const json& node) {
  std::vector<std::string> ckpts = node.at("checkpoints").get<std::vector<std::string>>();
  const std::string pattern = node.at("checkpoint_glob").get<std::string>();
  if (!pattern.empty()) {
    const auto found = glob(pattern);
    ckpts.insert(ckpts.end(), found.begin(), found.end());
  }
  for (const auto& c : ckpts) require_file(c, "model checkpoint");
  return ckpts;
}

double resolved_expert_threshold(const json& resolved) {
  const auto& d = resolved.at("data");
  if (d.at("expert_threshold").get<double>() > 0.0)
    return d.at("expert_threshold").get<double>();
  double rstar = d.at("rstar").get<double>();
  if (rstar <= 0.0) {
    rstar = mbrl::diag::calibrate_rstar(mbrl::config::env_params(resolved),
                                        mbrl::config::planner_config(resolved), 9,
                                        d.at("horizon").get<int>(),
                                        resolved.at("seed").get<std::uint64_t>());
    std::cout << "calibrated R* = " << rstar << "\n";
  }
  return d.at("expert_threshold_fraction").get<double>() * rstar;
}

int cmd_gen_data(CommonOpts opts, const std::string& kind, const std::string& file,
                 int slices) {
  if (slices > 0) opts.overrides.push_back("data.grid_slices=" + std::to_string(slices));
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "gen-data");
  write_resolved(resolved, dir);

  const auto env = mbrl::config::env_params(resolved);
  const auto bounds = mbrl::config::data_bounds(resolved);
  const auto step_fn = mbrl::data::cartpole_step_fn(env);
  const auto& d = resolved.at("data");
  const std::uint64_t seed = resolved.at("seed").get<std::uint64_t>();
  const int horizon = d.at("horizon").get<int>();

  mbrl::data::TransitionSet set;
  if (kind == "grid") {
    set = mbrl::data::generate_grid(step_fn, 4, 1, bounds, d.at("grid_slices").get<int>());
  } else if (kind == "sampled") {
    set = mbrl::data::generate_sampled(step_fn, 4, 1, bounds,
                                       d.at("sampled_n").get<std::int64_t>(), seed);
  } else if (kind == "on-policy") {
    const std::string ckpt = d.at("checkpoint").get<std::string>();
    require_file(ckpt, "data.checkpoint");
    const auto m = mbrl::model::DynamicsModel::load(ckpt);
    set = mbrl::diag::make_on_policy_dataset(m, env, mbrl::config::planner_config(resolved),
                                             d.at("on_policy_trials").get<int>(), horizon, seed);
  } else if (kind == "expert") {
    set = mbrl::diag::make_expert_dataset(env, mbrl::config::planner_config(resolved), horizon,
                                          d.at("expert_trials").get<int>(),
                                          resolved_expert_threshold(resolved),
                                          d.at("expert_max_attempts").get<int>(), seed);
  } else if (kind == "filtered") {
    const std::string expert_path = d.at("expert_path").get<std::string>();
    require_file(expert_path, "data.expert_path");
    const auto expert = mbrl::data::load(expert_path, mbrl::data::Provenance::Expert);
    mbrl::data::DistanceFilterSpec spec;
    spec.expert = &expert;
    spec.epsilon = d.at("filter_epsilon").get<double>();
    spec.keep_count = d.at("filter_S").get<std::int64_t>();
    spec.pool_size = d.at("pool_size").get<std::int64_t>();
    spec.seed = seed;
    const std::string metric = d.at("filter_metric").get<std::string>();
    if (metric == "segment")
      spec.metric = mbrl::data::DistanceMetric::SegmentProjection;
    else if (metric != "point")
      throw std::runtime_error("unknown data.filter_metric: " + metric);
    set = mbrl::data::filter_by_distance(step_fn, 4, 1, spec, bounds);
  } else if (kind == "babble") {
    set = mbrl::data::generate_babble(mbrl::env::CartpoleState{}, d.at("babble_count").get<int>(),
                                      d.at("babble_horizon").get<int>(), seed, env);
  } else {
    throw std::runtime_error("unknown dataset kind: " + kind);
  }

  const fs::path target = file.empty() ? dir / (kind + ".csv") : fs::path(file);
  mbrl::data::save(set, target);
  mbrl::diag::write_manifest(dir, mbrl::config::config_hash(resolved), {seed},
                             {{"dataset", target.string()},
                              {"rows", std::to_string(set.size())}});
  std::cout << "wrote " << set.size() << " transitions to " << target.string() << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "train");
  write_resolved(resolved, dir);
  const auto& t = resolved.at("train");
  const std::uint64_t seed = resolved.at("seed").get<std::uint64_t>();

  require_file(t.at("train_set").get<std::string>(), "train.train_set");
  auto train_set = mbrl::data::load(t.at("train_set").get<std::string>());
  mbrl::data::TransitionSet val_set{.d_s = train_set.d_s, .d_a = train_set.d_a};
  if (!t.at("val_set").get<std::string>().empty()) {
    require_file(t.at("val_set").get<std::string>(), "train.val_set");
    val_set = mbrl::data::load(t.at("val_set").get<std::string>());
  }

  auto mc = mbrl::config::model_config(resolved);
  auto m = mbrl::model::DynamicsModel::create(mc, train_set.d_s, train_set.d_a);

  mbrl::model::WeightSpec w;
  const std::string mode = t.at("weight_mode").get<std::string>();
  w.scale = t.at("weight_scale").get<double>();
  if (t.at("weight_cutoff").get<double>() > 0.0)
    w.cutoff_distance = t.at("weight_cutoff").get<double>();
  if (mode == "distance") {
    w.mode = mbrl::model::WeightSpec::Mode::Distance;
  } else if (mode == "reward") {
    w.mode = mbrl::model::WeightSpec::Mode::Reward;
    const auto reward = mbrl::planner::make_cartpole_reward(mbrl::config::env_params(resolved));
    for (const auto& tr : train_set.transitions) w.rewards.push_back(reward(tr.s, tr.a));
  } else if (mode != "none") {
    throw std::runtime_error("unknown weight mode: " + mode);
  }

  const auto train_mode = t.at("mode").get<std::string>() == "incremental"
                              ? mbrl::model::TrainMode::Incremental
                              : mbrl::model::TrainMode::Full;
  const auto batching = t.at("val_batching").get<std::string>() == "trajectory"
                            ? mbrl::data::BatchMode::Trajectory
                            : mbrl::data::BatchMode::Random;

  const auto history = m.train(train_set, val_set, w, train_mode, batching);

  const fs::path ckpt = dir / t.at("checkpoint_out").get<std::string>();
  m.save(ckpt);
  mbrl::csv::Table hist;
  hist.header = {"epoch", "train_loss", "val_loss", "val_loss_batches"};
  for (std::size_t e = 0; e < history.epochs.size(); ++e)
    hist.rows.push_back({std::to_string(e), mbrl::csv::format_double(history.epochs[e].train_loss),
                         mbrl::csv::format_double(history.epochs[e].val_loss),
                         mbrl::csv::format_double(history.epochs[e].val_loss_batches)});
  mbrl::csv::write_file(dir / "history.csv", hist);
  mbrl::diag::write_manifest(dir, mbrl::config::config_hash(resolved), {seed},
                             {{"checkpoint", ckpt.string()}});
  std::cout << "checkpoint " << ckpt.string() << ", final train loss "
            << history.epochs.back().train_loss << "\n";
  return 0;
}

int cmd_run_pets(const CommonOpts& opts) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "run-pets");
  write_resolved(resolved, dir);
  const auto& p = resolved.at("pets");
  const std::uint64_t master = resolved.at("seed").get<std::uint64_t>();
  const int n_seeds = p.at("n_seeds").get<int>();
  const std::string hash = mbrl::config::config_hash(resolved);

  auto make_cfg = [&](int k) {
    mbrl::diag::PetsConfig cfg;
    cfg.env = mbrl::config::env_params(resolved);
    cfg.model = mbrl::config::model_config(resolved);
    cfg.planner = mbrl::config::planner_config(resolved);
    cfg.n_trials = p.at("n_trials").get<int>();
    cfg.horizon = p.at("horizon").get<int>();
    cfg.initial_random_episodes = p.at("initial_random_episodes").get<int>();
    cfg.train_fraction = p.at("train_fraction").get<double>();
    cfg.stop_at_reward = p.at("stop_at_reward").get<double>();
    cfg.seed = n_seeds == 1 ? master : mbrl::derive_seed(master, 0x9e75, k);
    cfg.out_dir = n_seeds == 1 ? dir : dir / ("seed" + std::to_string(k));
    cfg.config_hash = hash + "-" + std::to_string(k);
    return cfg;
  };

  std::vector<mbrl::diag::PetsRunResult> results(n_seeds);
#pragma omp parallel for schedule(dynamic) if (n_seeds > 1)
  for (int k = 0; k < n_seeds; ++k) results[k] = mbrl::diag::run_pets(make_cfg(k));

  mbrl::csv::Table t;
  t.header = {"seed_index", "trial",   "reward",     "train_loss", "val_nll",
              "ll_heldout", "n_train", "checkpoint"};
  for (int k = 0; k < n_seeds; ++k)
    for (const auto& r : results[k].records)
      t.rows.push_back({std::to_string(k), std::to_string(r.trial),
                        mbrl::csv::format_double(r.reward),
                        mbrl::csv::format_double(r.train_loss),
                        mbrl::csv::format_double(r.val_nll),
                        mbrl::csv::format_double(r.ll_heldout), std::to_string(r.n_train),
                        r.checkpoint});
  mbrl::csv::write_file(dir / "all_records.csv", t);

  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < n_seeds; ++k) seeds.push_back(make_cfg(k).seed);
  mbrl::diag::write_manifest(dir, hash, seeds);
  for (int k = 0; k < n_seeds; ++k)
    std::cout << "seed " << k << ": final reward " << results[k].records.back().reward << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& batching) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "sweep-llr");
  write_resolved(resolved, dir);
  const auto& s = resolved.at("sweep");

  mbrl::diag::SweepConfig cfg;
  cfg.checkpoints = checkpoint_list(s);
  for (const auto& [tag, path] : s.at("datasets").items()) {
    require_file(path.get<std::string>(), "sweep dataset " + tag);
    cfg.datasets.emplace_back(tag, path.get<std::string>());
  }
  cfg.env = mbrl::config::env_params(resolved);
  cfg.planner = mbrl::config::planner_config(resolved);
  cfg.n_eval = s.at("n_eval").get<int>();
  cfg.horizon = s.at("horizon").get<int>();
  cfg.batch_size = s.at("batch_size").get<int>();
  cfg.batching = batching == "trajectory" ? mbrl::data::BatchMode::Trajectory
                                          : mbrl::data::BatchMode::Random;
  cfg.seed = resolved.at("seed").get<std::uint64_t>();
  cfg.out_dir = dir;
  cfg.config_hash = mbrl::config::config_hash(resolved);

  const auto result = mbrl::diag::ll_reward_sweep(cfg);
  for (const auto& rep : result.reports) {
    const double rho = (cfg.batching == mbrl::data::BatchMode::Trajectory && rep.rho_trajectory)
                           ? *rep.rho_trajectory
                           : rep.rho_random;
    std::cout << "dataset=" << rep.dataset << " n=" << rep.n << " rho=" << rho;
    if (rep.rho_trajectory) std::cout << " (random " << rep.rho_random << ", trajectory "
                                      << *rep.rho_trajectory << ")";
    std::cout << "\n";
  }
  return 0;
}

int cmd_epoch_curve(const CommonOpts& opts) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "epoch-curve");
  write_resolved(resolved, dir);
  const auto& c = resolved.at("curve");

  mbrl::diag::EpochCurveConfig cfg;
  cfg.env = mbrl::config::env_params(resolved);
  cfg.model = mbrl::config::model_config(resolved);
  cfg.planner = mbrl::config::planner_config(resolved);
  require_file(c.at("train_set").get<std::string>(), "curve.train_set");
  cfg.train_set = c.at("train_set").get<std::string>();
  for (const auto& [tag, path] : c.at("val_sets").items()) {
    require_file(path.get<std::string>(), "curve val set " + tag);
    cfg.val_sets.emplace_back(tag, path.get<std::string>());
  }
  cfg.eval_every = c.at("eval_every").get<int>();
  cfg.n_eval = c.at("n_eval").get<int>();
  cfg.horizon = c.at("horizon").get<int>();
  cfg.train_fraction = c.at("train_fraction").get<double>();
  cfg.seed = resolved.at("seed").get<std::uint64_t>();
  cfg.out_dir = dir;
  cfg.config_hash = mbrl::config::config_hash(resolved);

  const auto points = mbrl::diag::epoch_reward_curve(cfg);
  std::cout << "epoch-curve: " << points.size() << " evaluation points, final reward "
            << points.back().mean_reward << "\n";
  return 0;
}

int cmd_attack(const CommonOpts& opts) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "attack");
  write_resolved(resolved, dir);
  const auto& a = resolved.at("attack");

  require_file(a.at("checkpoint").get<std::string>(), "attack.checkpoint");
  require_file(a.at("val_set").get<std::string>(), "attack.val_set");
  const auto baseline = mbrl::model::DynamicsModel::load(a.at("checkpoint").get<std::string>());
  const auto val_set = mbrl::data::load(a.at("val_set").get<std::string>());

  const auto result = mbrl::adversarial::attack(baseline, val_set,
                                                mbrl::config::env_params(resolved),
                                                mbrl::config::planner_config(resolved),
                                                mbrl::config::attack_config(resolved));

  mbrl::csv::Table t;
  t.header = {"generation", "best_fitness", "sigma", "reward", "ll"};
  for (const auto& g : result.history)
    t.rows.push_back({std::to_string(g.generation), mbrl::csv::format_double(g.best_fitness),
                      mbrl::csv::format_double(g.sigma), mbrl::csv::format_double(g.reward),
                      mbrl::csv::format_double(g.ll)});
  mbrl::csv::write_file(dir / "convergence.csv", t);
  result.perturbed.save(dir / "attacked.model");

  json summary = {{"baseline_reward", result.baseline_reward},
                  {"baseline_ll", result.baseline_ll},
                  {"final_reward", result.final_reward},
                  {"final_ll", result.final_ll},
                  {"generations", result.history.size()}};
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  mbrl::diag::write_manifest(dir, mbrl::config::config_hash(resolved),
                             {resolved.at("seed").get<std::uint64_t>()});
  std::cout << "attack: reward " << result.baseline_reward << " -> " << result.final_reward
            << ", ll " << result.baseline_ll << " -> " << result.final_ll << "\n";
  return 0;
}

int cmd_heatmap(const CommonOpts& opts, const std::string& reweight) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "heatmap");
  write_resolved(resolved, dir);
  const auto& h = resolved.at("heatmap");

  mbrl::diag::HeatmapConfig cfg;
  cfg.env = mbrl::config::env_params(resolved);
  cfg.model = mbrl::config::model_config(resolved);
  cfg.planner = mbrl::config::planner_config(resolved);
  require_file(h.at("expert_path").get<std::string>(), "heatmap.expert_path");
  cfg.expert_set = h.at("expert_path").get<std::string>();
  cfg.s_grid = h.at("s_grid").get<std::vector<std::int64_t>>();
  cfg.eps_grid = h.at("eps_grid").get<std::vector<double>>();
  cfg.n_seeds = h.at("n_seeds").get<int>();
  cfg.n_eval = h.at("n_eval").get<int>();
  cfg.horizon = h.at("horizon").get<int>();
  cfg.pool_size = h.at("pool_size").get<std::int64_t>();
  cfg.seed = resolved.at("seed").get<std::uint64_t>();
  cfg.out_dir = dir;
  cfg.config_hash = mbrl::config::config_hash(resolved);

  if (reweight == "on") {
    cfg.weight_mode = mbrl::model::WeightSpec::Mode::Distance;
    cfg.run_weighted = true;
    cfg.run_plain = h.at("run_plain").get<bool>();
  } else if (reweight == "reward") {
    cfg.weight_mode = mbrl::model::WeightSpec::Mode::Reward;
    cfg.run_weighted = true;
    cfg.run_plain = h.at("run_plain").get<bool>();
  } else if (reweight == "off") {
    cfg.run_weighted = false;
    cfg.run_plain = true;
  } else {
    throw std::runtime_error("unknown --reweight value: " + reweight);
  }

  const auto cells = mbrl::diag::reweight_heatmap(cfg);
  for (const auto& c : cells)
    std::cout << "S=" << c.s << " eps=" << c.epsilon << " reweighted=" << c.reweighted
              << " n=" << c.n_done << " median_reward=" << c.median_reward << "\n";
  return 0;
}

int cmd_babble(const CommonOpts& opts) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "babble-study");
  write_resolved(resolved, dir);
  const auto& b = resolved.at("babble");
  const auto& p = resolved.at("pets");

  mbrl::diag::BabbleConfig cfg;
  cfg.pets.env = mbrl::config::env_params(resolved);
  cfg.pets.model = mbrl::config::model_config(resolved);
  cfg.pets.planner = mbrl::config::planner_config(resolved);
  cfg.pets.n_trials = p.at("n_trials").get<int>();
  cfg.pets.horizon = p.at("horizon").get<int>();
  cfg.pets.train_fraction = p.at("train_fraction").get<double>();
  cfg.pets.seed = resolved.at("seed").get<std::uint64_t>();
  cfg.pets.out_dir = dir;
  cfg.extra_counts = b.at("counts").get<std::vector<int>>();
  cfg.babble_horizon = b.at("horizon").get<int>();
  cfg.n_seeds = b.at("n_seeds").get<int>();
  cfg.reward_threshold = b.at("reward_threshold").get<double>();
  cfg.config_hash = mbrl::config::config_hash(resolved);

  const auto records = mbrl::diag::babble_study(cfg);
  for (const auto& r : records)
    std::cout << "count=" << r.extra_count << " (" << r.n_babble_transitions
              << " transitions) trials_to_threshold=" << r.trials_to_threshold << "\n";
  return 0;
}

int cmd_goal_gen(const CommonOpts& opts) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "goal-gen");
  write_resolved(resolved, dir);
  const auto& g = resolved.at("goalgen");

  mbrl::diag::GoalGenConfig cfg;
  cfg.checkpoints = checkpoint_list(g);
  cfg.goals = g.at("goals").get<std::vector<double>>();
  cfg.env = mbrl::config::env_params(resolved);
  cfg.planner = mbrl::config::planner_config(resolved);
  cfg.n_eval = g.at("n_eval").get<int>();
  cfg.horizon = g.at("horizon").get<int>();
  cfg.seed = resolved.at("seed").get<std::uint64_t>();
  cfg.out_dir = dir;
  cfg.config_hash = mbrl::config::config_hash(resolved);

  const auto records = mbrl::diag::goal_generalization(cfg);
  for (const auto& r : records)
    std::cout << r.checkpoint << " goal=" << r.goal << " reward=" << r.mean_reward
              << " frac|x|<0.5=" << r.frac_x_near_zero << "\n";
  return 0;
}

int cmd_compare(const CommonOpts& opts) {
  const json resolved = resolve(opts);
  const fs::path dir = out_dir(resolved, "compare-plans");
  write_resolved(resolved, dir);
  const auto& c = resolved.at("compare");

  mbrl::diag::ComparePlansConfig cfg;
  require_file(c.at("model_a").get<std::string>(), "compare.model_a");
  require_file(c.at("model_b").get<std::string>(), "compare.model_b");
  require_file(c.at("expert_episode").get<std::string>(), "compare.expert_episode");
  cfg.model_a = c.at("model_a").get<std::string>();
  cfg.model_b = c.at("model_b").get<std::string>();
  cfg.expert_episode = c.at("expert_episode").get<std::string>();
  cfg.env = mbrl::config::env_params(resolved);
  cfg.planner = mbrl::config::planner_config(resolved);
  cfg.seed = resolved.at("seed").get<std::uint64_t>();
  cfg.out_dir = dir;
  cfg.config_hash = mbrl::config::config_hash(resolved);

  const auto rows = mbrl::diag::compare_plans(cfg);
  double max_gap = 0.0;
  int arg = 0;
  for (const auto& r : rows)
    if (r.max_action_gap > max_gap) {
      max_gap = r.max_action_gap;
      arg = r.step;
    }
  std::cout << rows.size() << " steps compared; max action gap " << max_gap << " at step "
            << arg << "\n";
  return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& kind, const std::string& x,
             const std::vector<std::string>& y, const std::string& value,
             const std::string& title, const std::string& output) {
  if (!fs::exists(csv_path)) throw std::runtime_error("missing input file: " + csv_path);
  const auto table = mbrl::csv::read_file(csv_path);
  mbrl::svg::PlotSpec spec;
  if (kind == "scatter")
    spec.kind = mbrl::svg::PlotKind::Scatter;
  else if (kind == "line")
    spec.kind = mbrl::svg::PlotKind::Line;
  else if (kind == "heatmap")
    spec.kind = mbrl::svg::PlotKind::Heatmap;
  else
    throw std::runtime_error("unknown plot kind: " + kind);
  spec.x_column = x;
  spec.y_columns = y;
  spec.value_column = value;
  spec.title = title;
  const fs::path out =
      output.empty() ? fs::path(csv_path).replace_extension(".svg") : fs::path(output);
  mbrl::svg::render(table, spec, out);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cartpole model-based RL experimentation toolkit"};
  app.require_subcommand(1);

  CommonOpts common;

  std::string gen_kind, gen_file;
  int gen_slices = 0;
  auto* gen = app.add_subcommand("gen-data", "generate a transition dataset");
  gen->add_option("kind", gen_kind, "grid | sampled | on-policy | expert | filtered | babble")
      ->required();
  gen->add_option("-f,--file", gen_file, "dataset output path (.csv or .csv.gz)");
  gen->add_option("--slices", gen_slices, "grid slices per dimension");
  add_common(gen, common);

  auto* train = app.add_subcommand("train", "train a dynamics model on a dataset");
  add_common(train, common);

  auto* pets = app.add_subcommand("run-pets", "run the learn/plan/collect loop");
  add_common(pets, common);

  std::string batching = "random";
  auto* sweep = app.add_subcommand("sweep-llr", "LL-vs-reward correlation sweep");
  sweep->add_option("--batching", batching, "random | trajectory")
      ->check(CLI::IsMember({"random", "trajectory"}));
  add_common(sweep, common);

  auto* curve = app.add_subcommand("epoch-curve", "reward/loss at every training epoch");
  add_common(curve, common);

  auto* atk = app.add_subcommand("attack", "CMA-ES output-layer attack on a checkpoint");
  add_common(atk, common);

  std::string reweight = "on";
  auto* heat = app.add_subcommand("heatmap", "re-weighting sweep over (S, epsilon)");
  heat->add_option("--reweight", reweight, "on | off | reward")
      ->check(CLI::IsMember({"on", "off", "reward"}));
  add_common(heat, common);

  auto* babble = app.add_subcommand("babble-study", "irrelevant-data learning-speed study");
  add_common(babble, common);

  auto* goal = app.add_subcommand("goal-gen", "goal-shifted reward generalization");
  add_common(goal, common);

  auto* cmp = app.add_subcommand("compare-plans", "plans of two models along an expert episode");
  add_common(cmp, common);

  std::string plot_csv, plot_kind = "scatter", plot_x, plot_value, plot_title, plot_out;
  std::vector<std::string> plot_y;
  auto* plot = app.add_subcommand("plot", "render a CSV as an SVG");
  plot->add_option("csv", plot_csv, "input CSV")->required();
  plot->add_option("--kind", plot_kind, "scatter | line | heatmap");
  plot->add_option("--x", plot_x, "x column")->required();
  plot->add_option("--y", plot_y, "y column(s)")->required();
  plot->add_option("--value", plot_value, "heatmap value column");
  plot->add_option("--title", plot_title, "plot title");
  plot->add_option("--svg", plot_out, "output SVG path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(common, gen_kind, gen_file, gen_slices);
    if (train->parsed()) return cmd_train(common);
    if (pets->parsed()) return cmd_run_pets(common);
    if (sweep->parsed()) return cmd_sweep(common, batching);
    if (curve->parsed()) return cmd_epoch_curve(common);
    if (atk->parsed()) return cmd_attack(common);
    if (heat->parsed()) return cmd_heatmap(common, reweight);
    if (babble->parsed()) return cmd_babble(common);
    if (goal->parsed()) return cmd_goal_gen(common);
    if (cmp->parsed()) return cmd_compare(common);
    if (plot->parsed())
      return cmd_plot(plot_csv, plot_kind, plot_x, plot_y, plot_value, plot_title, plot_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    return what.starts_with("missing input file") || what.starts_with("no such file")
               ? kExitMissingInput
               : 1;
  }
  return 0;
}
