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

#include "mbrl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mbrl/csv.hpp"
#include "mbrl/rng.hpp"
#include "mbrl/stats.hpp"

namespace mbrl::diag {

namespace {

std::mutex g_store_mutex;

std::string join_doubles(std::span<const double> v, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(sep);
    out += csv::format_double(v[i]);
  }
  return out;
}

bool all_have_episodes(const data::TransitionSet& set) {
  if (set.empty()) return false;
  for (const auto& t : set.transitions)
    if (!t.episode_id) return false;
  return true;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::string_view s) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(s)));
  return std::string(buf);
}

RecordStore::RecordStore(std::filesystem::path dir, std::string name,
                         std::vector<std::string> columns, std::string config_hash, int n_units)
    : dir_(std::move(dir)),
      name_(std::move(name)),
      columns_(std::move(columns)),
      config_hash_(std::move(config_hash)),
      n_units_(n_units) {
  rows_.resize(n_units_);
  std::filesystem::create_directories(dir_);
  csv_path_ = dir_ / (name_ + ".csv");
  partial_path_ = dir_ / (name_ + ".partial.csv");
  const auto hash_path = dir_ / (name_ + ".hash");

  std::string stored_hash;
  if (std::filesystem::exists(hash_path)) {
    std::ifstream in(hash_path);
    std::getline(in, stored_hash);
  }
  if (stored_hash != config_hash_) {
    std::filesystem::remove(csv_path_);
    std::filesystem::remove(partial_path_);
    std::ofstream out(hash_path, std::ios::trunc);
    out << config_hash_ << '\n';
    return;
  }

  std::vector<std::string> expected_header = {"unit"};
  expected_header.insert(expected_header.end(), columns_.begin(), columns_.end());
  auto ingest = [this, &expected_header](const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return;
    const csv::Table t = csv::read_file(path);
    if (t.header != expected_header)
      throw std::runtime_error("record store columns changed");
    for (const auto& row : t.rows) {
      if (row.empty()) continue;
      const int unit = static_cast<int>(csv::parse_int(row[0]));
      if (unit < 0 || unit >= n_units_) continue;
      rows_[unit] = std::vector<std::string>(row.begin() + 1, row.end());
    }
  };
  try {
    ingest(csv_path_);
    ingest(partial_path_);
  } catch (const std::exception&) {
    // stale or damaged partial results are simply recomputed
    for (auto& r : rows_) r.reset();
  }
}

RecordStore::~RecordStore() = default;

bool RecordStore::is_done(int unit) const { return rows_.at(unit).has_value(); }

int RecordStore::n_done() const {
  int n = 0;
  for (const auto& r : rows_)
    if (r) ++n;
  return n;
}

std::vector<std::string> RecordStore::get(int unit) const {
  if (!rows_.at(unit)) throw std::runtime_error("record not present for unit");
  return *rows_[unit];
}

void RecordStore::put(int unit, std::vector<std::string> row) {
  if (row.size() != columns_.size())
    throw std::invalid_argument("record width does not match columns");
  std::lock_guard<std::mutex> lock(g_store_mutex);
  rows_.at(unit) = row;
  const bool fresh = !std::filesystem::exists(partial_path_);
  std::ofstream out(partial_path_, std::ios::app);
  if (fresh) {
    out << "unit";
    for (const auto& col : columns_) out << ',' << col;
    out << '\n';
  }
  out << unit;
  for (const auto& field : row) out << ',' << field;
  out << '\n';
}

void RecordStore::finish() {
  csv::Table t;
  t.header.push_back("unit");
  t.header.insert(t.header.end(), columns_.begin(), columns_.end());
  for (int u = 0; u < n_units_; ++u) {
    if (!rows_[u]) continue;
    std::vector<std::string> row;
    row.push_back(std::to_string(u));
    row.insert(row.end(), rows_[u]->begin(), rows_[u]->end());
    t.rows.push_back(std::move(row));
  }
  csv::write_file(csv_path_, t);
  std::filesystem::remove(partial_path_);
  finished_ = true;
}

void write_manifest(const std::filesystem::path& dir, const std::string& config_hash,
                    const std::vector<std::uint64_t>& seeds,
                    const std::map<std::string, std::string>& extra) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["seeds"] = seeds;
  for (const auto& [k, v] : extra) j[k] = v;
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// PETS loop
// ---------------------------------------------------------------------------

PetsRunResult run_pets(const PetsConfig& cfg) {
  cfg.env.validate();
  cfg.model.validate();
  cfg.planner.validate();
  if (cfg.n_trials < 1 || cfg.horizon < 1)
    throw std::invalid_argument("pets needs n_trials/horizon >= 1");
  if (cfg.initial_random_episodes < 0)
    throw std::invalid_argument("initial_random_episodes must be >= 0");
  if (cfg.initial_random_episodes == 0 && !cfg.initial_dataset)
    throw std::invalid_argument("pets needs initial data (random episodes or a dataset)");

  const bool persist = !cfg.out_dir.empty();
  const std::vector<std::string> columns = {"trial",      "reward",  "train_loss", "val_nll",
                                            "ll_heldout", "n_train", "n_val",      "checkpoint"};
  std::optional<RecordStore> store;
  if (persist) {
    store.emplace(cfg.out_dir, "records", columns, cfg.config_hash, cfg.n_trials);
    write_manifest(cfg.out_dir, cfg.config_hash, {cfg.seed});
  }

  // assemble the starting dataset (or reload the archive on resume)
  data::TransitionSet dataset;
  dataset.d_s = 4;
  dataset.d_a = 1;
  dataset.provenance = data::Provenance::OnPolicy;
  std::int64_t next_episode = 0;

  const auto episodes_path = cfg.out_dir / "episodes.csv";
  int resume_trial = 0;
  if (persist && store->n_done() > 0 && std::filesystem::exists(episodes_path)) {
    dataset = data::load(episodes_path, data::Provenance::OnPolicy);
    for (const auto& t : dataset.transitions)
      if (t.episode_id) next_episode = std::max(next_episode, *t.episode_id + 1);
    while (resume_trial < cfg.n_trials && store->is_done(resume_trial)) ++resume_trial;
  } else {
    if (cfg.initial_dataset) {
      dataset = *cfg.initial_dataset;
      for (const auto& t : dataset.transitions)
        if (t.episode_id) next_episode = std::max(next_episode, *t.episode_id + 1);
    }
    for (int i = 0; i < cfg.initial_random_episodes; ++i) {
      Rng act_rng(derive_seed(cfg.seed, 0xac7, i));
      std::uniform_real_distribution<double> act(-1.0, 1.0);
      const auto ep = env::rollout([&](const env::CartpoleState&) { return act(act_rng); },
                                   cfg.horizon, derive_seed(cfg.seed, 0x1e5e7, i), cfg.env);
      data::append_episode(dataset, ep, next_episode++);
    }
    if (persist) data::save(dataset, episodes_path);
  }

  PetsRunResult result;
  for (int trial = 0; trial < resume_trial; ++trial) {
    const auto row = store->get(trial);
    PetsTrialRecord rec;
    rec.trial = trial;
    rec.reward = csv::parse_double(row[1]);
    rec.train_loss = csv::parse_double(row[2]);
    rec.val_nll = csv::parse_double(row[3]);
    rec.ll_heldout = csv::parse_double(row[4]);
    rec.n_train = static_cast<int>(csv::parse_int(row[5]));
    rec.n_val = static_cast<int>(csv::parse_int(row[6]));
    rec.checkpoint = row[7];
    result.records.push_back(std::move(rec));
  }

  auto stop_reached = [&cfg](const std::vector<PetsTrialRecord>& records) {
    return cfg.stop_at_reward > 0.0 && !records.empty() &&
           records.back().reward >= cfg.stop_at_reward;
  };

  model::DynamicsModel current;
  bool have_model = false;
  if (resume_trial > 0 && !result.records.empty() && !result.records.back().checkpoint.empty()) {
    current = model::DynamicsModel::load(result.records.back().checkpoint);
    have_model = true;
  }

  for (int trial = resume_trial; trial < cfg.n_trials && !stop_reached(result.records);
       ++trial) {
    model::ModelConfig mc = cfg.model;
    mc.seed = derive_seed(cfg.seed, 0x30de1, trial);
    auto [train_set, val_set] =
        data::split(dataset, cfg.train_fraction, derive_seed(cfg.seed, 0x5917, trial));

    current = model::DynamicsModel::create(mc, 4, 1);
    const auto history = current.train(train_set, val_set, model::WeightSpec{});
    have_model = true;

    const auto ll = current.evaluate_ll(val_set, mc.batch_size, data::BatchMode::Random);

    planner::PlannerConfig pc = cfg.planner;
    pc.seed = derive_seed(cfg.seed, 0x91a2, trial);
    const planner::ModelOracle oracle(current);
    planner::MpcPolicy policy(oracle, pc, planner::make_cartpole_reward(cfg.env));
    const std::uint64_t ep_seed = derive_seed(cfg.seed, 0xe6e, trial);
    policy.begin_episode(ep_seed);
    const auto ep = env::rollout(
        [&policy](const env::CartpoleState& s) {
          const auto arr = s.as_array();
          return policy.act(std::span<const double>(arr.data(), arr.size()))[0];
        },
        cfg.horizon, ep_seed, cfg.env);

    data::append_episode(dataset, ep, next_episode++);

    PetsTrialRecord rec;
    rec.trial = trial;
    rec.reward = ep.total_reward;
    rec.train_loss = history.epochs.back().train_loss;
    rec.val_nll = history.epochs.back().val_loss;
    rec.ll_heldout = ll.mean_ll;
    rec.n_train = static_cast<int>(train_set.size());
    rec.n_val = static_cast<int>(val_set.size());
    if (persist) {
      const auto ckpt = cfg.out_dir / "checkpoints" / ("trial_" + std::to_string(trial) + ".model");
      current.save(ckpt);
      rec.checkpoint = ckpt.string();
      data::save(dataset, episodes_path);
      store->put(trial, {std::to_string(rec.trial), csv::format_double(rec.reward),
                         csv::format_double(rec.train_loss), csv::format_double(rec.val_nll),
                         csv::format_double(rec.ll_heldout), std::to_string(rec.n_train),
                         std::to_string(rec.n_val), rec.checkpoint});
    }
    result.records.push_back(std::move(rec));
  }

  if (persist) store->finish();
  if (!have_model && !result.records.empty() && !result.records.back().checkpoint.empty())
    current = model::DynamicsModel::load(result.records.back().checkpoint);
  result.dataset = std::move(dataset);
  result.final_model = std::move(current);
  return result;
}

// ---------------------------------------------------------------------------
// LL-vs-reward sweep
// ---------------------------------------------------------------------------

SweepResult ll_reward_sweep(const SweepConfig& cfg) {
  if (cfg.checkpoints.size() < 3)
    throw std::invalid_argument("sweep needs >= 3 checkpoints");
  if (cfg.datasets.empty()) throw std::invalid_argument("sweep needs >= 1 dataset");

  std::vector<data::TransitionSet> sets;
  std::vector<bool> episodic;
  for (const auto& [tag, path] : cfg.datasets) {
    sets.push_back(data::load(path));
    episodic.push_back(all_have_episodes(sets.back()));
  }

  std::vector<std::string> columns = {"checkpoint", "mean_reward", "rewards"};
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
    columns.push_back("ll_" + cfg.datasets[d].first);
    columns.push_back("lltraj_" + cfg.datasets[d].first);
  }
  const int n_units = static_cast<int>(cfg.checkpoints.size());
  RecordStore store(cfg.out_dir, "records", columns, cfg.config_hash, n_units);

#pragma omp parallel for schedule(dynamic) if (n_units > 1)
  for (int u = 0; u < n_units; ++u) {
    if (store.is_done(u)) continue;
    const auto m = model::DynamicsModel::load(cfg.checkpoints[u]);
    const planner::ModelOracle oracle(m);
    const auto eval = planner::evaluate_mpc_reward(oracle, cfg.planner, cfg.env, cfg.n_eval,
                                                   cfg.horizon, derive_seed(cfg.seed, 0x5eed));
    std::vector<double> episode_rewards;
    for (const auto& ep : eval.episodes) episode_rewards.push_back(ep.total_reward);
    std::vector<std::string> row = {cfg.checkpoints[u], csv::format_double(eval.mean_reward),
                                    join_doubles(episode_rewards)};
    for (std::size_t d = 0; d < sets.size(); ++d) {
      const auto ll = m.evaluate_ll(sets[d], cfg.batch_size, data::BatchMode::Random);
      row.push_back(csv::format_double(ll.mean_ll));
      if (episodic[d]) {
        const auto llt = m.evaluate_ll(sets[d], cfg.batch_size, data::BatchMode::Trajectory);
        row.push_back(csv::format_double(llt.batch_mean_ll));
      } else {
        row.push_back("");
      }
    }
    store.put(u, std::move(row));
  }
  store.finish();

  // correlation reports and typed records from the store
  SweepResult result;
  result.records_csv = store.csv_path();
  std::vector<double> rewards(n_units);
  for (int u = 0; u < n_units; ++u) {
    const auto row = store.get(u);
    ExperimentRecord rec;
    rec.model_id = row[0];
    const auto pos = rec.model_id.rfind("trial_");
    if (pos != std::string::npos)
      rec.trial_index = std::atoi(rec.model_id.c_str() + pos + 6);
    rec.mean_reward = csv::parse_double(row[1]);
    std::stringstream ss(row[2]);
    std::string field;
    while (std::getline(ss, field, ';'))
      if (!field.empty()) rec.reward_per_episode.push_back(csv::parse_double(field));
    for (std::size_t d = 0; d < cfg.datasets.size(); ++d)
      rec.ll_per_dataset[cfg.datasets[d].first] = csv::parse_double(row[3 + 2 * d]);
    rewards[u] = rec.mean_reward;
    result.records.push_back(std::move(rec));
  }
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
    CorrelationReport rep;
    rep.dataset = cfg.datasets[d].first;
    rep.n = n_units;
    std::vector<double> ll(n_units), lltraj;
    bool have_traj = episodic[d];
    for (int u = 0; u < n_units; ++u) {
      const auto row = store.get(u);
      ll[u] = csv::parse_double(row[3 + 2 * d]);
      if (have_traj) lltraj.push_back(csv::parse_double(row[4 + 2 * d]));
    }
    rep.rho_random = stats::pearson(ll, rewards);
    if (have_traj) rep.rho_trajectory = stats::pearson(lltraj, rewards);
    result.reports.push_back(std::move(rep));
  }

  csv::Table reports;
  reports.header = {"dataset", "n", "rho_random", "rho_trajectory"};
  for (const auto& rep : result.reports)
    reports.rows.push_back({rep.dataset, std::to_string(rep.n),
                            csv::format_double(rep.rho_random),
                            rep.rho_trajectory ? csv::format_double(*rep.rho_trajectory) : ""});
  csv::write_file(cfg.out_dir / "reports.csv", reports);
  write_manifest(cfg.out_dir, cfg.config_hash, {cfg.seed});
  return result;
}

// ---------------------------------------------------------------------------
// Per-epoch training curve
// ---------------------------------------------------------------------------

std::vector<EpochCurvePoint> epoch_reward_curve(const EpochCurveConfig& cfg) {
  if (cfg.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  const data::TransitionSet full = data::load(cfg.train_set);

  data::TransitionSet train = full, heldout;
  if (cfg.train_fraction < 1.0) {
    auto parts = data::split(full, cfg.train_fraction, derive_seed(cfg.seed, 0xec));
    train = std::move(parts.first);
    heldout = std::move(parts.second);
  }

  std::vector<std::pair<std::string, data::TransitionSet>> val_sets;
  if (!heldout.empty()) val_sets.emplace_back("heldout", std::move(heldout));
  for (const auto& [tag, path] : cfg.val_sets) val_sets.emplace_back(tag, data::load(path));

  std::vector<std::string> columns = {"epoch", "train_loss", "mean_reward"};
  for (const auto& [tag, _] : val_sets) columns.push_back("val_" + tag);

  std::vector<int> eval_epochs;
  for (int e = 0; e < cfg.model.epochs_full; ++e)
    if ((e + 1) % cfg.eval_every == 0 || e + 1 == cfg.model.epochs_full)
      eval_epochs.push_back(e);
  RecordStore store(cfg.out_dir, "records", columns, cfg.config_hash,
                    static_cast<int>(eval_epochs.size()));

  std::vector<EpochCurvePoint> points;
  if (store.n_done() == static_cast<int>(eval_epochs.size())) {
    for (std::size_t u = 0; u < eval_epochs.size(); ++u) {
      const auto row = store.get(static_cast<int>(u));
      EpochCurvePoint p;
      p.epoch = static_cast<int>(csv::parse_int(row[0]));
      p.train_loss = csv::parse_double(row[1]);
      p.mean_reward = csv::parse_double(row[2]);
      for (std::size_t v = 0; v < val_sets.size(); ++v)
        p.val_loss[val_sets[v].first] = csv::parse_double(row[3 + v]);
      points.push_back(std::move(p));
    }
    return points;
  }

  model::ModelConfig mc = cfg.model;
  mc.seed = derive_seed(cfg.seed, 0xcafe);
  auto m = model::DynamicsModel::create(mc, full.d_s, full.d_a);

  int next_eval = 0;
  const model::EpochCallback callback = [&](int epoch, const model::DynamicsModel& snapshot) {
    if (next_eval >= static_cast<int>(eval_epochs.size()) || eval_epochs[next_eval] != epoch)
      return;
    EpochCurvePoint p;
    p.epoch = epoch;
    const planner::ModelOracle oracle(snapshot);
    p.mean_reward = planner::evaluate_mpc_reward(oracle, cfg.planner, cfg.env, cfg.n_eval,
                                                 cfg.horizon, derive_seed(cfg.seed, 0xe0a1))
                        .mean_reward;
    for (const auto& [tag, set] : val_sets) p.val_loss[tag] = snapshot.mean_loss(set);
    points.push_back(std::move(p));
    ++next_eval;
  };

  const auto history = m.train(train, data::TransitionSet{.d_s = train.d_s, .d_a = train.d_a},
                               model::WeightSpec{}, model::TrainMode::Full,
                               data::BatchMode::Random, callback);

  for (std::size_t u = 0; u < points.size(); ++u) {
    auto& p = points[u];
    p.train_loss = history.epochs[p.epoch].train_loss;
    std::vector<std::string> row = {std::to_string(p.epoch), csv::format_double(p.train_loss),
                                    csv::format_double(p.mean_reward)};
    for (const auto& [tag, _] : val_sets) row.push_back(csv::format_double(p.val_loss[tag]));
    store.put(static_cast<int>(u), std::move(row));
  }
  store.finish();
  write_manifest(cfg.out_dir, cfg.config_hash, {cfg.seed});
  return points;
}

// ---------------------------------------------------------------------------
// Re-weighting heatmap
// ---------------------------------------------------------------------------

std::vector<HeatmapCell> reweight_heatmap(const HeatmapConfig& cfg) {
  if (cfg.s_grid.empty() || cfg.eps_grid.empty())
    throw std::invalid_argument("heatmap grids must be nonempty");
  if (cfg.n_seeds < 1) throw std::invalid_argument("heatmap needs >= 1 seed");

  const data::TransitionSet expert = data::load(cfg.expert_set, data::Provenance::Expert);
  const data::StepFn step_fn = data::cartpole_step_fn(cfg.env);
  const data::Bounds bounds = data::cartpole_bounds();

  std::vector<bool> variants;  // per-mode flag: trained with the weighted loss?
  if (cfg.run_weighted) variants.push_back(true);
  if (cfg.run_plain) variants.push_back(false);
  if (variants.empty()) throw std::invalid_argument("heatmap needs at least one variant");
  const int n_modes = static_cast<int>(variants.size());
  const int per_seed =
      static_cast<int>(cfg.s_grid.size() * cfg.eps_grid.size()) * n_modes;
  const int n_units = per_seed * cfg.n_seeds;

  const std::vector<std::string> columns = {"S",        "epsilon", "reweighted",
                                            "seed",     "feasible", "mean_reward"};
  RecordStore store(cfg.out_dir, "records", columns, cfg.config_hash, n_units);

  const planner::RewardFn reward_fn = planner::make_cartpole_reward(cfg.env);

  for (int s = 0; s < cfg.n_seeds; ++s) {
    const int base = s * per_seed;
    bool seed_done = true;
    for (int k = 0; k < per_seed; ++k)
      if (!store.is_done(base + k)) seed_done = false;
    if (seed_done) continue;

    const std::uint64_t pool_seed = derive_seed(cfg.seed, 0x9001, s);
    const data::FilterPool pool =
        data::build_filter_pool(step_fn, 4, 1, bounds, cfg.pool_size, pool_seed, expert);

#pragma omp parallel for schedule(dynamic) if (per_seed > 1)
    for (int k = 0; k < per_seed; ++k) {
      const int unit = base + k;
      if (store.is_done(unit)) continue;
      const int mode_idx = k % n_modes;
      const int cell = k / n_modes;
      const std::int64_t big_s = cfg.s_grid[cell / cfg.eps_grid.size()];
      const double eps = cfg.eps_grid[cell % cfg.eps_grid.size()];
      const bool reweighted = variants[mode_idx];

      std::vector<std::string> row = {std::to_string(big_s), csv::format_double(eps),
                                      reweighted ? "1" : "0", std::to_string(s), "1", ""};
      try {
        data::TransitionSet filtered =
            data::filter_pool(pool, eps, big_s, derive_seed(cfg.seed, 0x50b, s));

        model::ModelConfig mc = cfg.model;
        mc.seed = derive_seed(cfg.seed, 0x7a17, unit);
        auto m = model::DynamicsModel::create(mc, 4, 1);
        model::WeightSpec w;
        if (reweighted) {
          w.mode = cfg.weight_mode;
          if (w.mode == model::WeightSpec::Mode::Reward) {
            w.rewards.reserve(filtered.size());
            for (const auto& t : filtered.transitions)
              w.rewards.push_back(reward_fn(t.s, t.a));
          }
        }
        m.train(filtered, data::TransitionSet{.d_s = 4, .d_a = 1}, w);

        const planner::ModelOracle oracle(m);
        const double reward =
            planner::evaluate_mpc_reward(oracle, cfg.planner, cfg.env, cfg.n_eval, cfg.horizon,
                                         derive_seed(cfg.seed, 0xeba1, unit))
                .mean_reward;
        row[5] = csv::format_double(reward);
      } catch (const std::runtime_error&) {
        row[4] = "0";  // infeasible cell (not enough survivors) or diverged
      }
      store.put(unit, std::move(row));
    }
  }
  store.finish();

  std::vector<HeatmapCell> cells;
  for (std::size_t i_s = 0; i_s < cfg.s_grid.size(); ++i_s) {
    for (std::size_t i_e = 0; i_e < cfg.eps_grid.size(); ++i_e) {
      for (int mode_idx = 0; mode_idx < n_modes; ++mode_idx) {
        HeatmapCell cell;
        cell.s = cfg.s_grid[i_s];
        cell.epsilon = cfg.eps_grid[i_e];
        cell.reweighted = variants[mode_idx];
        std::vector<double> rewards;
        for (int s = 0; s < cfg.n_seeds; ++s) {
          const int k =
              (static_cast<int>(i_s * cfg.eps_grid.size() + i_e)) * n_modes + mode_idx;
          const auto row = store.get(s * per_seed + k);
          if (row[4] == "1") {
            rewards.push_back(csv::parse_double(row[5]));
            cell.seeds.push_back(derive_seed(cfg.seed, 0x9001, s));
          }
        }
        cell.n_done = static_cast<int>(rewards.size());
        cell.median_reward = rewards.empty() ? 0.0 : stats::median(rewards);
        cells.push_back(std::move(cell));
      }
    }
  }

  csv::Table t;
  t.header = {"S", "epsilon", "reweighted", "n_done", "median_reward"};
  for (const auto& c : cells)
    t.rows.push_back({std::to_string(c.s), csv::format_double(c.epsilon),
                      c.reweighted ? "1" : "0", std::to_string(c.n_done),
                      c.n_done ? csv::format_double(c.median_reward) : ""});
  csv::write_file(cfg.out_dir / "cells.csv", t);
  write_manifest(cfg.out_dir, cfg.config_hash, {cfg.seed});
  return cells;
}

// ---------------------------------------------------------------------------
// Babbling study
// ---------------------------------------------------------------------------

std::vector<BabbleRunRecord> babble_study(const BabbleConfig& cfg) {
  if (cfg.extra_counts.empty()) throw std::invalid_argument("babble study needs counts");
  for (const int c : cfg.extra_counts)
    if (c < 1) throw std::invalid_argument("babble counts must be >= 1");

  const int n_units = static_cast<int>(cfg.extra_counts.size()) * cfg.n_seeds;
  const std::vector<std::string> columns = {"count", "seed", "n_babble", "trials_to_threshold",
                                            "rewards"};
  RecordStore store(cfg.pets.out_dir, "records", columns, cfg.config_hash, n_units);

  std::vector<BabbleRunRecord> records(n_units);
  for (int u = 0; u < n_units; ++u) {
    const int count = cfg.extra_counts[u / cfg.n_seeds];
    const int seed_idx = u % cfg.n_seeds;
    BabbleRunRecord rec;
    rec.extra_count = count;
    rec.seed = derive_seed(cfg.pets.seed, 0xbab, u);

    if (store.is_done(u)) {
      const auto row = store.get(u);
      rec.n_babble_transitions = static_cast<int>(csv::parse_int(row[2]));
      rec.trials_to_threshold = static_cast<int>(csv::parse_int(row[3]));
      std::stringstream ss(row[4]);
      std::string field;
      while (std::getline(ss, field, ';'))
        if (!field.empty()) rec.rewards.push_back(csv::parse_double(field));
      records[u] = std::move(rec);
      continue;
    }

    PetsConfig run = cfg.pets;
    run.seed = rec.seed;
    run.initial_random_episodes = 0;
    run.initial_dataset =
        data::generate_babble(env::CartpoleState{}, count, cfg.babble_horizon,
                              derive_seed(rec.seed, 0x6ab), run.env);
    run.stop_at_reward = cfg.reward_threshold;
    if (!cfg.pets.out_dir.empty())
      run.out_dir = cfg.pets.out_dir /
                    ("count" + std::to_string(count) + "_seed" + std::to_string(seed_idx));
    run.config_hash = cfg.config_hash + "-" + std::to_string(u);

    const auto result = run_pets(run);
    rec.n_babble_transitions = static_cast<int>(run.initial_dataset->size());
    rec.trials_to_threshold = run.n_trials + 1;
    for (const auto& r : result.records) {
      rec.rewards.push_back(r.reward);
      if (cfg.reward_threshold > 0.0 && r.reward >= cfg.reward_threshold &&
          rec.trials_to_threshold > run.n_trials) {
        rec.trials_to_threshold = r.trial + 1;
      }
    }
    store.put(u, {std::to_string(count), std::to_string(rec.seed),
                  std::to_string(rec.n_babble_transitions),
                  std::to_string(rec.trials_to_threshold), join_doubles(rec.rewards)});
    records[u] = std::move(rec);
  }
  store.finish();
  write_manifest(cfg.pets.out_dir, cfg.config_hash, {cfg.pets.seed});
  return records;
}

// ---------------------------------------------------------------------------
// Goal generalization
// ---------------------------------------------------------------------------

std::vector<GoalGenRecord> goal_generalization(const GoalGenConfig& cfg) {
  if (cfg.checkpoints.empty() || cfg.goals.empty())
    throw std::invalid_argument("goal generalization needs checkpoints and goals");
  for (const double g : cfg.goals)
    if (!std::isfinite(g)) throw std::invalid_argument("goals must be finite");

  const int n_units = static_cast<int>(cfg.checkpoints.size() * cfg.goals.size());
  const std::vector<std::string> columns = {"checkpoint", "goal", "mean_reward",
                                            "frac_x_near_zero"};
  RecordStore store(cfg.out_dir, "records", columns, cfg.config_hash, n_units);

#pragma omp parallel for schedule(dynamic) if (n_units > 1)
  for (int u = 0; u < n_units; ++u) {
    if (store.is_done(u)) continue;
    const auto& ckpt = cfg.checkpoints[u / cfg.goals.size()];
    const double goal = cfg.goals[u % cfg.goals.size()];
    const auto m = model::DynamicsModel::load(ckpt);
    env::CartpoleParams ep = cfg.env;
    ep.x_goal = goal;
    const planner::ModelOracle oracle(m);
    const auto eval = planner::evaluate_mpc_reward(oracle, cfg.planner, ep, cfg.n_eval,
                                                   cfg.horizon, derive_seed(cfg.seed, 0x60a1));
    std::vector<double> xs;
    for (const auto& episode : eval.episodes)
      for (const auto& st : episode.states) xs.push_back(st.x);
    const auto hist = stats::histogram(xs, cfg.hist_lo, cfg.hist_hi, cfg.hist_bin);
    store.put(u, {ckpt, csv::format_double(goal), csv::format_double(eval.mean_reward),
                  csv::format_double(hist.fraction_within(0.0, 0.5))});
  }
  store.finish();

  std::vector<GoalGenRecord> records;
  for (int u = 0; u < n_units; ++u) {
    const auto row = store.get(u);
    records.push_back({row[0], csv::parse_double(row[1]), csv::parse_double(row[2]),
                       csv::parse_double(row[3])});
  }
  write_manifest(cfg.out_dir, cfg.config_hash, {cfg.seed});
  return records;
}

// ---------------------------------------------------------------------------
// Plan comparison
// ---------------------------------------------------------------------------

std::vector<ComparePlansRow> compare_plans(const ComparePlansConfig& cfg) {
  const auto model_a = model::DynamicsModel::load(cfg.model_a);
  const auto model_b = model::DynamicsModel::load(cfg.model_b);
  if (model_a.d_s() != model_b.d_s() || model_a.d_a() != model_b.d_a())
    throw std::invalid_argument("compare_plans models disagree on dims");

  data::TransitionSet expert = data::load(cfg.expert_episode, data::Provenance::Expert);
  if (expert.empty()) throw std::invalid_argument("expert episode is empty");
  // keep only the first episode
  if (expert.transitions.front().episode_id) {
    const auto first = *expert.transitions.front().episode_id;
    std::erase_if(expert.transitions,
                  [first](const data::Transition& t) { return t.episode_id != first; });
  }

  const int n_units = static_cast<int>(expert.size());
  std::vector<std::string> columns = {"step", "return_a", "return_b", "max_action_gap"};
  for (int t = 0; t < cfg.planner.horizon; ++t) columns.push_back("act_a_" + std::to_string(t));
  for (int t = 0; t < cfg.planner.horizon; ++t) columns.push_back("act_b_" + std::to_string(t));
  RecordStore store(cfg.out_dir, "records", columns, cfg.config_hash, n_units);

  const planner::RewardFn reward = planner::make_cartpole_reward(cfg.env);
  const planner::ModelOracle oracle_a(model_a);
  const planner::ModelOracle oracle_b(model_b);

#pragma omp parallel for schedule(dynamic) if (n_units > 1)
  for (int u = 0; u < n_units; ++u) {
    if (store.is_done(u)) continue;
    const auto& t = expert.transitions[u];
    planner::PlannerConfig pc = cfg.planner;
    pc.seed = derive_seed(cfg.seed, 0xc9a7e, u);
    const auto plan_a = planner::plan(oracle_a, t.s, pc, reward);
    const auto plan_b = planner::plan(oracle_b, t.s, pc, reward);

    double gap = 0.0;
    for (std::size_t k = 0; k < plan_a.actions.data.size(); ++k)
      gap = std::max(gap, std::abs(plan_a.actions.data[k] - plan_b.actions.data[k]));

    std::vector<std::string> row = {std::to_string(u),
                                    csv::format_double(plan_a.predicted_return),
                                    csv::format_double(plan_b.predicted_return),
                                    csv::format_double(gap)};
    for (const double v : plan_a.actions.data) row.push_back(csv::format_double(v));
    for (const double v : plan_b.actions.data) row.push_back(csv::format_double(v));
    store.put(u, std::move(row));
  }
  store.finish();

  std::vector<ComparePlansRow> rows;
  for (int u = 0; u < n_units; ++u) {
    const auto row = store.get(u);
    ComparePlansRow r;
    r.step = static_cast<int>(csv::parse_int(row[0]));
    r.return_a = csv::parse_double(row[1]);
    r.return_b = csv::parse_double(row[2]);
    r.max_action_gap = csv::parse_double(row[3]);
    for (int t = 0; t < cfg.planner.horizon; ++t)
      r.actions_a.push_back(csv::parse_double(row[4 + t]));
    for (int t = 0; t < cfg.planner.horizon; ++t)
      r.actions_b.push_back(csv::parse_double(row[4 + cfg.planner.horizon + t]));
    rows.push_back(std::move(r));
  }
  write_manifest(cfg.out_dir, cfg.config_hash, {cfg.seed});
  return rows;
}

// ---------------------------------------------------------------------------
// Dataset pipelines / calibration
// ---------------------------------------------------------------------------

namespace {

struct OwnedModelOracle final : planner::Oracle {
  std::shared_ptr<const model::DynamicsModel> model;
  planner::ModelOracle inner;
  explicit OwnedModelOracle(std::shared_ptr<const model::DynamicsModel> m)
      : model(std::move(m)), inner(*model) {}
  int state_dim() const override { return inner.state_dim(); }
  int action_dim() const override { return inner.action_dim(); }
  void step_batch(Matrix& states, const Matrix& actions,
                  std::vector<std::uint8_t>& valid) const override {
    inner.step_batch(states, actions, valid);
  }
};

}  // namespace

data::TransitionSet make_expert_dataset(const env::CartpoleParams& env,
                                        const planner::PlannerConfig& planner_cfg, int horizon,
                                        int n_trials, double reward_threshold, int max_attempts,
                                        std::uint64_t seed) {
  auto oracle = std::make_shared<planner::TrueDynamicsOracle>(env);
  auto factory =
      planner::mpc_policy_factory(oracle, planner_cfg, planner::make_cartpole_reward(env));
  return data::collect_expert(factory, horizon, n_trials, reward_threshold, max_attempts, seed,
                              env);
}

data::TransitionSet make_on_policy_dataset(const model::DynamicsModel& m,
                                           const env::CartpoleParams& env,
                                           const planner::PlannerConfig& planner_cfg,
                                           int n_trials, int horizon, std::uint64_t seed) {
  auto oracle = std::make_shared<OwnedModelOracle>(std::make_shared<model::DynamicsModel>(m));
  auto factory =
      planner::mpc_policy_factory(oracle, planner_cfg, planner::make_cartpole_reward(env));
  return data::collect_on_policy(factory, n_trials, horizon, seed, env);
}

double calibrate_rstar(const env::CartpoleParams& env, const planner::PlannerConfig& planner_cfg,
                       int n_seeds, int horizon, std::uint64_t seed) {
  if (n_seeds < 1) throw std::invalid_argument("calibration needs >= 1 seed");
  const planner::TrueDynamicsOracle oracle(env);
  const auto eval =
      planner::evaluate_mpc_reward(oracle, planner_cfg, env, n_seeds, horizon, seed);
  std::vector<double> totals;
  totals.reserve(eval.episodes.size());
  for (const auto& ep : eval.episodes) totals.push_back(ep.total_reward);
  return stats::median(totals);
}

}  // namespace mbrl::diag
