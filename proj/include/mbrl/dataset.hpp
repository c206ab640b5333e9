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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbrl/cartpole.hpp"
#include "mbrl/matrix.hpp"

namespace mbrl::data {

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
  std::optional<std::int64_t> episode_id;
  std::optional<std::int64_t> step_index;
  std::optional<double> dstar;  // distance to the expert trajectory, when filtered

  bool operator==(const Transition&) const = default;
};

enum class Provenance { Grid, Sampled, OnPolicy, Expert, Filtered, Babble };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct TransitionSet {
  std::vector<Transition> transitions;
  int d_s = 0;
  int d_a = 0;
  Provenance provenance = Provenance::Sampled;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }

  // Equality over dims and transitions; provenance is metadata and is not
  // stored in the CSV format.
  bool operator==(const TransitionSet& o) const {
    return d_s == o.d_s && d_a == o.d_a && transitions == o.transitions;
  }

  // Throws std::invalid_argument on dim mismatches or non-finite values.
  void validate() const;

  // Row-major (s, a) matrix, one row per transition.
  Matrix sa_matrix() const;
};

// Per-dimension z-scoring statistics over the (s, a) columns of a set.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  static constexpr double kStdFloor = 1e-8;

  static Normalizer fit(const TransitionSet& set);
  // Column statistics of an arbitrary feature matrix (one sample per row).
  static Normalizer fit_rows(const Matrix& rows);
  static Normalizer identity(int dims);

  int dims() const { return static_cast<int>(mean.size()); }
  void apply(std::span<const double> in, std::span<double> out) const;
  void invert(std::span<const double> in, std::span<double> out) const;
  void apply_rows(Matrix& m) const;

  bool operator==(const Normalizer&) const = default;
};

// Completes a generated (s, a) point to a transition; the cartpole wiring
// binds env::step.
using StepFn =
    std::function<std::vector<double>(std::span<const double> s, std::span<const double> a)>;

StepFn cartpole_step_fn(const env::CartpoleParams& params);

// Per-dimension [lo, hi] over the concatenated (s, a) space.
struct Bounds {
  std::vector<double> lo;
  std::vector<double> hi;

  int dims() const { return static_cast<int>(lo.size()); }
  void validate() const;
};

// Default cartpole bounds: x in [-3,3], x_dot in [-8,8], theta in (-pi,pi],
// theta_dot in [-8,8], a in [-1,1].
Bounds cartpole_bounds();

// Cartesian product of `slices` evenly spaced values per dimension, each
// point completed via step_fn. Size = slices^(d_s+d_a); errors beyond cap.
TransitionSet generate_grid(const StepFn& step_fn, int d_s, int d_a, const Bounds& bounds,
                            int slices, std::int64_t cap = 10'000'000);

// n i.i.d. uniform (s, a) points completed via step_fn.
TransitionSet generate_sampled(const StepFn& step_fn, int d_s, int d_a, const Bounds& bounds,
                               std::int64_t n, std::uint64_t seed);

// `count` random-action rollouts of `horizon` steps, each starting exactly
// from the given state (no reset noise).
TransitionSet generate_babble(const env::CartpoleState& start, int count, int horizon,
                              std::uint64_t seed, const env::CartpoleParams& params);

// A fresh policy per episode; episode_seed also seeds the environment reset.
using PolicyFactory = std::function<env::Policy(std::uint64_t episode_seed)>;

// n_trials on-policy episodes with episode_id/step_index set.
TransitionSet collect_on_policy(const PolicyFactory& agent, int n_trials, int horizon,
                                std::uint64_t seed, const env::CartpoleParams& params);

// Runs episodes until n_trials of them exceed reward_threshold, attempting at
// most max_attempts episodes; throws with the best reward seen on failure.
TransitionSet collect_expert(const PolicyFactory& planner_policy, int horizon, int n_trials,
                             double reward_threshold, int max_attempts, std::uint64_t seed,
                             const env::CartpoleParams& params);

// Appends one episode as transitions tagged with episode_id.
void append_episode(TransitionSet& set, const env::EpisodeResult& ep, std::int64_t episode_id);

// Concatenates (episode ids must already be distinct between the parts).
void append_set(TransitionSet& dst, const TransitionSet& src);

// PointToPoint: min distance to the expert elements themselves.
// SegmentProjection: min distance to the polyline joining consecutive
// elements of each expert episode (orthogonal projection onto segments).
enum class DistanceMetric { PointToPoint, SegmentProjection };

// d* = min over the expert trajectory of the Euclidean distance between
// z-scored (s, a) vectors.
double min_distance_to_expert(std::span<const double> s, std::span<const double> a,
                              const TransitionSet& expert, const Normalizer& norm,
                              DistanceMetric metric = DistanceMetric::PointToPoint);

struct DistanceFilterSpec {
  const TransitionSet* expert = nullptr;  // the optimal trajectory
  double epsilon = 1.0;                   // max distance bound
  std::int64_t keep_count = 100;          // S, points retained
  std::int64_t pool_size = 1'000'000;     // uniform samples drawn before filtering
  std::uint64_t seed = 0;
  DistanceMetric metric = DistanceMetric::PointToPoint;

  void validate() const;
};

// Uniformly sampled pool of [s|a|s_next] rows plus the d* of every row; the
// pool is generated in fixed-size chunks with per-chunk RNG streams, so the
// result is independent of worker count. Exposed separately so sweeps can
// share one pool across many (S, epsilon) cells.
struct FilterPool {
  Matrix rows;                  // pool_size x (d_s + d_a + d_s)
  std::vector<double> dstar;    // pool_size
  int d_s = 0;
  int d_a = 0;
};

FilterPool build_filter_pool(const StepFn& step_fn, int d_s, int d_a, const Bounds& bounds,
                             std::int64_t pool_size, std::uint64_t seed,
                             const TransitionSet& expert,
                             DistanceMetric metric = DistanceMetric::PointToPoint);

// Survivor selection on a prebuilt pool: keeps d* <= epsilon, uniformly
// subsamples S of the survivors (seeded), errors when fewer than S survive.
TransitionSet filter_pool(const FilterPool& pool, double epsilon, std::int64_t keep_count,
                          std::uint64_t seed);

// One-shot variant per the dataset pipeline: pool + filter in one call.
TransitionSet filter_by_distance(const StepFn& step_fn, int d_s, int d_a,
                                 const DistanceFilterSpec& spec, const Bounds& bounds);

enum class SplitMode { ByTransition, ByEpisode };

std::pair<TransitionSet, TransitionSet> split(const TransitionSet& set, double train_fraction,
                                              std::uint64_t seed,
                                              SplitMode mode = SplitMode::ByTransition);

enum class BatchMode { Random, Trajectory };

// Index slices into the set. Random: shuffled fixed-size batches (last may be
// short). Trajectory: contiguous sub-sequences of single episodes, length <=
// batch_size, batch order shuffled.
std::vector<std::vector<int>> batches(const TransitionSet& set, int batch_size, BatchMode mode,
                                      std::uint64_t seed);

// CSV persistence (columns s0..,a0..,sn0..,episode_id,step_index,dstar);
// gzip-compressed when the filename ends in .gz.
void save(const TransitionSet& set, const std::filesystem::path& path);
TransitionSet load(const std::filesystem::path& path,
                   Provenance provenance = Provenance::Sampled);

}  // namespace mbrl::data
