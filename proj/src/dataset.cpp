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

#include "mbrl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mbrl/csv.hpp"
#include "mbrl/kernels.hpp"
#include "mbrl/rng.hpp"

namespace mbrl::data {

namespace {

constexpr std::int64_t kPoolChunk = 8192;

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite ") + what);
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Grid: return "grid";
    case Provenance::Sampled: return "sampled";
    case Provenance::OnPolicy: return "on-policy";
    case Provenance::Expert: return "expert";
    case Provenance::Filtered: return "filtered";
    case Provenance::Babble: return "babble";
  }
  return "sampled";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "grid") return Provenance::Grid;
  if (s == "sampled") return Provenance::Sampled;
  if (s == "on-policy") return Provenance::OnPolicy;
  if (s == "expert") return Provenance::Expert;
  if (s == "filtered") return Provenance::Filtered;
  if (s == "babble") return Provenance::Babble;
  throw std::invalid_argument("unknown provenance tag: " + s);
}

void TransitionSet::validate() const {
  std::int64_t last_episode = std::numeric_limits<std::int64_t>::min();
  for (const auto& t : transitions) {
    if (static_cast<int>(t.s.size()) != d_s || static_cast<int>(t.s_next.size()) != d_s ||
        static_cast<int>(t.a.size()) != d_a)
      throw std::invalid_argument("transition dims inconsistent with set dims");
    check_finite(t.s, "state");
    check_finite(t.a, "action");
    check_finite(t.s_next, "next state");
    if (t.episode_id) {
      if (*t.episode_id < last_episode)
        throw std::invalid_argument("episode ids must be nondecreasing in storage order");
      last_episode = *t.episode_id;
    }
  }
}

Matrix TransitionSet::sa_matrix() const {
  Matrix m(static_cast<int>(size()), d_s + d_a);
  for (int i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    const auto& t = transitions[i];
    std::copy(t.s.begin(), t.s.end(), row);
    std::copy(t.a.begin(), t.a.end(), row + d_s);
  }
  return m;
}

Normalizer Normalizer::fit(const TransitionSet& set) {
  if (set.empty()) throw std::invalid_argument("cannot fit normalizer on empty set");
  const int dims = set.d_s + set.d_a;
  Normalizer n;
  n.mean.assign(dims, 0.0);
  n.std.assign(dims, 0.0);
  const double inv_n = 1.0 / static_cast<double>(set.size());
  for (const auto& t : set.transitions) {
    for (int d = 0; d < set.d_s; ++d) n.mean[d] += t.s[d];
    for (int d = 0; d < set.d_a; ++d) n.mean[set.d_s + d] += t.a[d];
  }
  for (double& m : n.mean) m *= inv_n;
  for (const auto& t : set.transitions) {
    for (int d = 0; d < set.d_s; ++d) {
      const double diff = t.s[d] - n.mean[d];
      n.std[d] += diff * diff;
    }
    for (int d = 0; d < set.d_a; ++d) {
      const double diff = t.a[d] - n.mean[set.d_s + d];
      n.std[set.d_s + d] += diff * diff;
    }
  }
  for (double& s : n.std) s = std::max(std::sqrt(s * inv_n), kStdFloor);
  return n;
}

Normalizer Normalizer::fit_rows(const Matrix& rows) {
  if (rows.rows < 1) throw std::invalid_argument("cannot fit normalizer on empty matrix");
  Normalizer n;
  n.mean.assign(rows.cols, 0.0);
  n.std.assign(rows.cols, 0.0);
  const double inv_n = 1.0 / rows.rows;
  for (int i = 0; i < rows.rows; ++i)
    for (int d = 0; d < rows.cols; ++d) n.mean[d] += rows.at(i, d);
  for (double& m : n.mean) m *= inv_n;
  for (int i = 0; i < rows.rows; ++i)
    for (int d = 0; d < rows.cols; ++d) {
      const double diff = rows.at(i, d) - n.mean[d];
      n.std[d] += diff * diff;
    }
  for (double& s : n.std) s = std::max(std::sqrt(s * inv_n), kStdFloor);
  return n;
}

Normalizer Normalizer::identity(int dims) {
  Normalizer n;
  n.mean.assign(dims, 0.0);
  n.std.assign(dims, 1.0);
  return n;
}

void Normalizer::apply(std::span<const double> in, std::span<double> out) const {
  for (std::size_t d = 0; d < in.size(); ++d) out[d] = (in[d] - mean[d]) / std[d];
}

void Normalizer::invert(std::span<const double> in, std::span<double> out) const {
  for (std::size_t d = 0; d < in.size(); ++d) out[d] = in[d] * std[d] + mean[d];
}

void Normalizer::apply_rows(Matrix& m) const {
  if (m.cols != dims()) throw std::invalid_argument("normalizer dim mismatch");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    for (int d = 0; d < m.cols; ++d) row[d] = (row[d] - mean[d]) / std[d];
  }
}

StepFn cartpole_step_fn(const env::CartpoleParams& params) {
  return [params](std::span<const double> s, std::span<const double> a) {
    const env::CartpoleState st{s[0], s[1], s[2], s[3]};
    const env::CartpoleState nx = env::step(st, a[0], params);
    return std::vector<double>{nx.x, nx.x_dot, nx.theta, nx.theta_dot};
  };
}

void Bounds::validate() const {
  if (lo.size() != hi.size() || lo.empty())
    throw std::invalid_argument("bounds lo/hi size mismatch");
  for (std::size_t d = 0; d < lo.size(); ++d)
    if (!(lo[d] < hi[d])) throw std::invalid_argument("bounds must satisfy lo < hi per dim");
}

Bounds cartpole_bounds() {
  const double pi = std::numbers::pi;
  return Bounds{{-3.0, -8.0, -pi, -8.0, -1.0}, {3.0, 8.0, pi, 8.0, 1.0}};
}

TransitionSet generate_grid(const StepFn& step_fn, int d_s, int d_a, const Bounds& bounds,
                            int slices, std::int64_t cap) {
  bounds.validate();
  const int dims = d_s + d_a;
  if (bounds.dims() != dims) throw std::invalid_argument("bounds dims != d_s + d_a");
  if (slices < 2) throw std::invalid_argument("slices_per_dim must be >= 2");

  std::int64_t total = 1;
  for (int d = 0; d < dims; ++d) {
    if (total > cap / slices + 1) throw std::runtime_error("grid size exceeds cap");
    total *= slices;
  }
  if (total > cap) throw std::runtime_error("grid size exceeds cap");

  TransitionSet set;
  set.d_s = d_s;
  set.d_a = d_a;
  set.provenance = Provenance::Grid;
  set.transitions.resize(total);

#pragma omp parallel for schedule(static)
  for (std::int64_t idx = 0; idx < total; ++idx) {
    std::vector<double> point(dims);
    std::int64_t rem = idx;
    for (int d = dims - 1; d >= 0; --d) {
      const int slot = static_cast<int>(rem % slices);
      rem /= slices;
      point[d] = bounds.lo[d] + (bounds.hi[d] - bounds.lo[d]) * slot / (slices - 1);
    }
    Transition t;
    t.s.assign(point.begin(), point.begin() + d_s);
    t.a.assign(point.begin() + d_s, point.end());
    t.s_next = step_fn(t.s, t.a);
    set.transitions[idx] = std::move(t);
  }
  return set;
}

TransitionSet generate_sampled(const StepFn& step_fn, int d_s, int d_a, const Bounds& bounds,
                               std::int64_t n, std::uint64_t seed) {
  bounds.validate();
  const int dims = d_s + d_a;
  if (bounds.dims() != dims) throw std::invalid_argument("bounds dims != d_s + d_a");
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");

  TransitionSet set;
  set.d_s = d_s;
  set.d_a = d_a;
  set.provenance = Provenance::Sampled;
  set.transitions.resize(n);

  const std::int64_t n_chunks = (n + kPoolChunk - 1) / kPoolChunk;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    Rng rng(derive_seed(seed, 0x5a3ed, c));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::int64_t begin = c * kPoolChunk;
    const std::int64_t end = std::min(n, begin + kPoolChunk);
    for (std::int64_t i = begin; i < end; ++i) {
      Transition t;
      t.s.resize(d_s);
      t.a.resize(d_a);
      for (int d = 0; d < d_s; ++d)
        t.s[d] = bounds.lo[d] + (bounds.hi[d] - bounds.lo[d]) * unit(rng);
      for (int d = 0; d < d_a; ++d)
        t.a[d] = bounds.lo[d_s + d] + (bounds.hi[d_s + d] - bounds.lo[d_s + d]) * unit(rng);
      t.s_next = step_fn(t.s, t.a);
      set.transitions[i] = std::move(t);
    }
  }
  return set;
}

void append_episode(TransitionSet& set, const env::EpisodeResult& ep, std::int64_t episode_id) {
  for (std::size_t k = 0; k < ep.actions.size(); ++k) {
    Transition t;
    const auto s = ep.states[k].as_array();
    const auto sn = ep.states[k + 1].as_array();
    t.s.assign(s.begin(), s.end());
    t.a = {ep.actions[k]};
    t.s_next.assign(sn.begin(), sn.end());
    t.episode_id = episode_id;
    t.step_index = static_cast<std::int64_t>(k);
    set.transitions.push_back(std::move(t));
  }
}

void append_set(TransitionSet& dst, const TransitionSet& src) {
  if (dst.empty() && dst.d_s == 0) {
    dst.d_s = src.d_s;
    dst.d_a = src.d_a;
  }
  if (dst.d_s != src.d_s || dst.d_a != src.d_a)
    throw std::invalid_argument("cannot append sets with different dims");
  dst.transitions.insert(dst.transitions.end(), src.transitions.begin(), src.transitions.end());
}

TransitionSet generate_babble(const env::CartpoleState& start, int count, int horizon,
                              std::uint64_t seed, const env::CartpoleParams& params) {
  if (count < 1 || horizon < 1) throw std::invalid_argument("babble count/horizon must be >= 1");
  TransitionSet set;
  set.d_s = 4;
  set.d_a = 1;
  set.provenance = Provenance::Babble;
  set.transitions.reserve(static_cast<std::size_t>(count) * horizon);
  for (int c = 0; c < count; ++c) {
    Rng rng(derive_seed(seed, 0xbabb1e, c));
    std::uniform_real_distribution<double> act(-1.0, 1.0);
    const auto ep = env::rollout_from(
        start, [&](const env::CartpoleState&) { return act(rng); }, horizon, params);
    append_episode(set, ep, c);
  }
  return set;
}

TransitionSet collect_on_policy(const PolicyFactory& agent, int n_trials, int horizon,
                                std::uint64_t seed, const env::CartpoleParams& params) {
  if (n_trials < 1 || horizon < 1)
    throw std::invalid_argument("on-policy trials/horizon must be >= 1");
  TransitionSet set;
  set.d_s = 4;
  set.d_a = 1;
  set.provenance = Provenance::OnPolicy;
  for (int trial = 0; trial < n_trials; ++trial) {
    const std::uint64_t ep_seed = derive_seed(seed, 0x0460, trial);
    const auto ep = env::rollout(agent(ep_seed), horizon, ep_seed, params);
    append_episode(set, ep, trial);
  }
  return set;
}

TransitionSet collect_expert(const PolicyFactory& planner_policy, int horizon, int n_trials,
                             double reward_threshold, int max_attempts, std::uint64_t seed,
                             const env::CartpoleParams& params) {
  if (n_trials < 1 || horizon < 1) throw std::invalid_argument("expert trials/horizon must be >= 1");
  TransitionSet set;
  set.d_s = 4;
  set.d_a = 1;
  set.provenance = Provenance::Expert;
  double best = -std::numeric_limits<double>::infinity();
  int kept = 0;
  for (int attempt = 0; attempt < max_attempts && kept < n_trials; ++attempt) {
    const std::uint64_t ep_seed = derive_seed(seed, 0xe74e87, attempt);
    const auto ep = env::rollout(planner_policy(ep_seed), horizon, ep_seed, params);
    best = std::max(best, ep.total_reward);
    if (ep.total_reward > reward_threshold) {
      append_episode(set, ep, kept);
      ++kept;
    }
  }
  if (kept < n_trials)
    throw std::runtime_error("expert collection failed: " + std::to_string(kept) + "/" +
                             std::to_string(n_trials) + " episodes above threshold " +
                             csv::format_double(reward_threshold) + ", best reward " +
                             csv::format_double(best));
  return set;
}

namespace {

// Normalized expert (s, a) rows plus the list of within-episode segments.
struct ExpertGeometry {
  Matrix points;
  std::vector<std::pair<int, int>> segments;
};

ExpertGeometry expert_geometry(const TransitionSet& expert, const Normalizer& norm,
                               DistanceMetric metric) {
  ExpertGeometry geo;
  geo.points = expert.sa_matrix();
  norm.apply_rows(geo.points);
  if (metric == DistanceMetric::SegmentProjection) {
    for (int i = 0; i + 1 < geo.points.rows; ++i) {
      const auto& a = expert.transitions[i];
      const auto& b = expert.transitions[i + 1];
      if (a.episode_id && b.episode_id && *a.episode_id != *b.episode_id) continue;
      geo.segments.emplace_back(i, i + 1);
    }
  }
  return geo;
}

double min_sq_dist_to_geometry(std::span<const double> qn, const ExpertGeometry& geo) {
  double best = std::numeric_limits<double>::infinity();
  const int dims = geo.points.cols;
  for (int j = 0; j < geo.points.rows; ++j) {
    const double* e = geo.points.row(j);
    double acc = 0.0;
    for (int d = 0; d < dims; ++d) {
      const double diff = qn[d] - e[d];
      acc += diff * diff;
    }
    best = std::min(best, acc);
  }
  for (const auto& [ia, ib] : geo.segments) {
    const double* pa = geo.points.row(ia);
    const double* pb = geo.points.row(ib);
    double dot = 0.0, len2 = 0.0;
    for (int d = 0; d < dims; ++d) {
      const double ab = pb[d] - pa[d];
      dot += (qn[d] - pa[d]) * ab;
      len2 += ab * ab;
    }
    if (len2 <= 0.0) continue;
    const double t = std::clamp(dot / len2, 0.0, 1.0);
    double acc = 0.0;
    for (int d = 0; d < dims; ++d) {
      const double proj = pa[d] + t * (pb[d] - pa[d]);
      const double diff = qn[d] - proj;
      acc += diff * diff;
    }
    best = std::min(best, acc);
  }
  return best;
}

}  // namespace

double min_distance_to_expert(std::span<const double> s, std::span<const double> a,
                              const TransitionSet& expert, const Normalizer& norm,
                              DistanceMetric metric) {
  if (expert.empty()) throw std::invalid_argument("expert set is empty");
  const int dims = expert.d_s + expert.d_a;
  if (static_cast<int>(s.size() + a.size()) != dims || norm.dims() != dims)
    throw std::invalid_argument("dim mismatch in min_distance_to_expert");

  std::vector<double> q(dims);
  std::copy(s.begin(), s.end(), q.begin());
  std::copy(a.begin(), a.end(), q.begin() + s.size());
  std::vector<double> qn(dims);
  norm.apply(q, qn);

  const ExpertGeometry geo = expert_geometry(expert, norm, metric);
  return std::sqrt(min_sq_dist_to_geometry(qn, geo));
}

void DistanceFilterSpec::validate() const {
  if (!expert || expert->empty()) throw std::invalid_argument("filter spec needs an expert set");
  if (!(epsilon > 0.0)) throw std::invalid_argument("filter epsilon must be > 0");
  if (keep_count < 1 || keep_count > pool_size)
    throw std::invalid_argument("filter requires 1 <= S <= pool_size");
}

FilterPool build_filter_pool(const StepFn& step_fn, int d_s, int d_a, const Bounds& bounds,
                             std::int64_t pool_size, std::uint64_t seed,
                             const TransitionSet& expert, DistanceMetric metric) {
  bounds.validate();
  const int dims = d_s + d_a;
  if (bounds.dims() != dims) throw std::invalid_argument("bounds dims != d_s + d_a");
  if (expert.empty()) throw std::invalid_argument("expert set is empty");

  FilterPool pool;
  pool.d_s = d_s;
  pool.d_a = d_a;
  pool.rows.resize(static_cast<int>(pool_size), dims + d_s);
  pool.dstar.assign(pool_size, 0.0);

  const Normalizer norm = Normalizer::fit(expert);
  const ExpertGeometry geo = expert_geometry(expert, norm, metric);

  const std::int64_t n_chunks = (pool_size + kPoolChunk - 1) / kPoolChunk;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    Rng rng(derive_seed(seed, 0xf111, c));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::int64_t begin = c * kPoolChunk;
    const std::int64_t end = std::min(pool_size, begin + kPoolChunk);
    std::vector<double> s(d_s), a(d_a);
    Matrix chunk_sa(static_cast<int>(end - begin), dims);
    for (std::int64_t i = begin; i < end; ++i) {
      double* row = pool.rows.row(static_cast<int>(i));
      for (int d = 0; d < dims; ++d)
        row[d] = bounds.lo[d] + (bounds.hi[d] - bounds.lo[d]) * unit(rng);
      std::copy(row, row + d_s, s.begin());
      std::copy(row + d_s, row + dims, a.begin());
      const auto sn = step_fn(s, a);
      std::copy(sn.begin(), sn.end(), row + dims);
      double* crow = chunk_sa.row(static_cast<int>(i - begin));
      norm.apply({row, static_cast<std::size_t>(dims)}, {crow, static_cast<std::size_t>(dims)});
    }
    if (metric == DistanceMetric::PointToPoint) {
      std::vector<double> d2(chunk_sa.rows);
      kern::serial::min_sq_dist(chunk_sa, geo.points, d2);
      for (std::int64_t i = begin; i < end; ++i)
        pool.dstar[i] = std::sqrt(d2[i - begin]);
    } else {
      for (std::int64_t i = begin; i < end; ++i)
        pool.dstar[i] =
            std::sqrt(min_sq_dist_to_geometry(chunk_sa.row_span(static_cast<int>(i - begin)),
                                              geo));
    }
  }
  return pool;
}

TransitionSet filter_pool(const FilterPool& pool, double epsilon, std::int64_t keep_count,
                          std::uint64_t seed) {
  std::vector<std::int64_t> survivors;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(pool.dstar.size()); ++i)
    if (pool.dstar[i] <= epsilon) survivors.push_back(i);

  if (static_cast<std::int64_t>(survivors.size()) < keep_count)
    throw std::runtime_error("distance filter infeasible: only " +
                             std::to_string(survivors.size()) + " survivors at epsilon " +
                             csv::format_double(epsilon) + ", need " +
                             std::to_string(keep_count));

  Rng rng(derive_seed(seed, 0x5e1ec7));
  std::shuffle(survivors.begin(), survivors.end(), rng);
  survivors.resize(keep_count);
  std::sort(survivors.begin(), survivors.end());

  TransitionSet set;
  set.d_s = pool.d_s;
  set.d_a = pool.d_a;
  set.provenance = Provenance::Filtered;
  set.transitions.reserve(keep_count);
  const int dims = pool.d_s + pool.d_a;
  for (const std::int64_t i : survivors) {
    const double* row = pool.rows.row(static_cast<int>(i));
    Transition t;
    t.s.assign(row, row + pool.d_s);
    t.a.assign(row + pool.d_s, row + dims);
    t.s_next.assign(row + dims, row + dims + pool.d_s);
    t.dstar = pool.dstar[i];
    set.transitions.push_back(std::move(t));
  }
  return set;
}

TransitionSet filter_by_distance(const StepFn& step_fn, int d_s, int d_a,
                                 const DistanceFilterSpec& spec, const Bounds& bounds) {
  spec.validate();
  const FilterPool pool = build_filter_pool(step_fn, d_s, d_a, bounds, spec.pool_size,
                                            spec.seed, *spec.expert, spec.metric);
  return filter_pool(pool, spec.epsilon, spec.keep_count, spec.seed);
}

std::pair<TransitionSet, TransitionSet> split(const TransitionSet& set, double train_fraction,
                                              std::uint64_t seed, SplitMode mode) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0, 1)");

  TransitionSet train, test;
  train.d_s = test.d_s = set.d_s;
  train.d_a = test.d_a = set.d_a;
  train.provenance = test.provenance = set.provenance;

  Rng rng(derive_seed(seed, 0x5b117));

  if (mode == SplitMode::ByTransition) {
    const std::int64_t n = static_cast<std::int64_t>(set.size());
    if (n < 2) throw std::invalid_argument("set too small to split");
    std::int64_t n_train = std::llround(train_fraction * static_cast<double>(n));
    n_train = std::clamp<std::int64_t>(n_train, 1, n - 1);
    std::vector<std::int64_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<bool> in_train(n, false);
    for (std::int64_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
    for (std::int64_t i = 0; i < n; ++i)
      (in_train[i] ? train : test).transitions.push_back(set.transitions[i]);
    return {std::move(train), std::move(test)};
  }

  // ByEpisode: partition whole episodes by episode count.
  std::vector<std::int64_t> episodes;
  for (const auto& t : set.transitions) {
    if (!t.episode_id) throw std::invalid_argument("episode split requires episode ids");
    if (episodes.empty() || episodes.back() != *t.episode_id) episodes.push_back(*t.episode_id);
  }
  const std::int64_t n_ep = static_cast<std::int64_t>(episodes.size());
  if (n_ep < 2) throw std::invalid_argument("need >= 2 episodes for an episode split");
  std::int64_t n_train = std::llround(train_fraction * static_cast<double>(n_ep));
  n_train = std::clamp<std::int64_t>(n_train, 1, n_ep - 1);
  std::vector<std::int64_t> order(n_ep);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::int64_t> train_eps(order.begin(), order.begin() + n_train);
  std::vector<bool> ep_in_train(n_ep, false);
  for (const std::int64_t e : train_eps) ep_in_train[e] = true;
  // map episode_id -> position in `episodes`
  for (const auto& t : set.transitions) {
    const auto it = std::lower_bound(episodes.begin(), episodes.end(), *t.episode_id);
    const std::int64_t pos = it - episodes.begin();
    (ep_in_train[pos] ? train : test).transitions.push_back(t);
  }
  return {std::move(train), std::move(test)};
}

std::vector<std::vector<int>> batches(const TransitionSet& set, int batch_size, BatchMode mode,
                                      std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  const int n = static_cast<int>(set.size());
  Rng rng(derive_seed(seed, 0xba7c4));
  std::vector<std::vector<int>> out;

  if (mode == BatchMode::Random) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int start = 0; start < n; start += batch_size) {
      const int end = std::min(n, start + batch_size);
      out.emplace_back(idx.begin() + start, idx.begin() + end);
    }
    return out;
  }

  // Trajectory mode: contiguous runs of one episode, chunked to batch_size.
  int start = 0;
  while (start < n) {
    const auto& t = set.transitions[start];
    if (!t.episode_id)
      throw std::invalid_argument("trajectory batching requires episode ids on every transition");
    int end = start + 1;
    while (end < n && set.transitions[end].episode_id &&
           *set.transitions[end].episode_id == *t.episode_id)
      ++end;
    for (int b = start; b < end; b += batch_size) {
      const int be = std::min(end, b + batch_size);
      std::vector<int> batch(be - b);
      std::iota(batch.begin(), batch.end(), b);
      out.push_back(std::move(batch));
    }
    start = end;
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

void save(const TransitionSet& set, const std::filesystem::path& path) {
  csv::Table t;
  for (int d = 0; d < set.d_s; ++d) t.header.push_back("s" + std::to_string(d));
  for (int d = 0; d < set.d_a; ++d) t.header.push_back("a" + std::to_string(d));
  for (int d = 0; d < set.d_s; ++d) t.header.push_back("sn" + std::to_string(d));
  t.header.insert(t.header.end(), {"episode_id", "step_index", "dstar"});

  t.rows.reserve(set.size());
  for (const auto& tr : set.transitions) {
    std::vector<std::string> row;
    row.reserve(t.header.size());
    for (const double v : tr.s) row.push_back(csv::format_double(v));
    for (const double v : tr.a) row.push_back(csv::format_double(v));
    for (const double v : tr.s_next) row.push_back(csv::format_double(v));
    row.push_back(tr.episode_id ? std::to_string(*tr.episode_id) : "");
    row.push_back(tr.step_index ? std::to_string(*tr.step_index) : "");
    row.push_back(tr.dstar ? csv::format_double(*tr.dstar) : "");
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

TransitionSet load(const std::filesystem::path& path, Provenance provenance) {
  const csv::Table t = csv::read_file(path);

  int d_s = 0, d_a = 0;
  for (const auto& name : t.header) {
    if (name.starts_with("s") && !name.starts_with("sn") && name != "step_index") ++d_s;
    else if (name.starts_with("a")) ++d_a;
  }
  if (d_s < 1 || t.column("episode_id") < 0 || t.column("step_index") < 0 ||
      t.column("dstar") < 0)
    throw std::runtime_error(path.string() + ":1: unrecognized dataset header");

  TransitionSet set;
  set.d_s = d_s;
  set.d_a = d_a;
  set.provenance = provenance;
  set.transitions.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      Transition tr;
      int col = 0;
      tr.s.resize(d_s);
      for (int d = 0; d < d_s; ++d) tr.s[d] = csv::parse_double(row[col++]);
      tr.a.resize(d_a);
      for (int d = 0; d < d_a; ++d) tr.a[d] = csv::parse_double(row[col++]);
      tr.s_next.resize(d_s);
      for (int d = 0; d < d_s; ++d) tr.s_next[d] = csv::parse_double(row[col++]);
      if (!row[col].empty()) tr.episode_id = csv::parse_int(row[col]);
      ++col;
      if (!row[col].empty()) tr.step_index = csv::parse_int(row[col]);
      ++col;
      if (!row[col].empty()) tr.dstar = csv::parse_double(row[col]);
      set.transitions.push_back(std::move(tr));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(r + 2) + ": " + e.what());
    }
  }
  return set;
}

}  // namespace mbrl::data
