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

#include "mbrl/dataset.hpp"
#include "mbrl/kernels.hpp"
#include "mbrl/matrix.hpp"
#include "mbrl/net.hpp"

namespace mbrl::model {

// D/P: single deterministic/probabilistic net; DE/PE: bootstrap ensembles.
enum class ModelKind { D, P, DE, PE };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);
bool is_probabilistic(ModelKind k);
bool is_ensemble(ModelKind k);

struct ModelConfig {
  ModelKind kind = ModelKind::P;
  int ensemble_size = 1;  // E; must be 1 for D/P and >= 2 for DE/PE
  int width = 500;
  int depth = 2;
  kern::Activation activation = kern::Activation::Swish;
  double learning_rate = 1e-4;
  int batch_size = 16;
  int epochs_full = 100;
  int epochs_initial = 100;
  int epochs_incremental = 10;
  double weight_decay = 0.0;
  double logvar_min = -10.0;
  double logvar_max = 0.5;
  std::uint64_t seed = 0;
  // State dims that live on a circle: the network input carries (sin, cos)
  // in place of the raw angle, deltas are computed as wrapped angle
  // differences and predictions are wrapped back (theta for cartpole).
  std::vector<int> angular_state_dims;

  void validate() const;
};

ModelConfig cartpole_model_config();

struct GaussianPrediction {
  std::vector<double> mean;    // predicted state delta
  std::vector<double> logvar;  // soft-bounded per-dim log variance
};

struct EnsemblePrediction {
  GaussianPrediction aggregate;  // mean = average of member means
  std::vector<GaussianPrediction> members;
};

// Per-sample Gaussian negative log-likelihood:
//   1/2 sum_d [ (delta_d - mu_d)^2 e^{-lv_d} + lv_d + log 2pi ].
double nll(const GaussianPrediction& pred, std::span<const double> observed_delta);

struct WeightSpec {
  enum class Mode { None, Distance, Reward };
  Mode mode = Mode::None;
  double scale = 1.0;  // c
  // Aligned with the training set; distance mode falls back to each
  // transition's stored d* when `distances` is empty.
  std::vector<double> distances;
  std::vector<double> rewards;
  // Hard-cutoff variant: weight 0 beyond this distance (off when nullopt).
  std::optional<double> cutoff_distance;
};

// Distance mode: w = c exp(-d*); reward mode: w = c (r - r_min)/(r_max -
// r_min); none: all ones. Throws when the required per-sample field is
// missing or misaligned.
std::vector<double> weights_from(const WeightSpec& spec, const data::TransitionSet& set);

// Weighted batch objective mean_i w_i * loss_i (NLL for probabilistic kinds,
// squared error otherwise) and its gradient w.r.t. the raw net output.
// Training and the finite-difference gradient checks share this path.
double training_loss_and_grad(const ModelConfig& cfg, int d_s, const Matrix& out,
                              const Matrix& y, std::span<const double> w, Matrix& d_out);

// The logvar soft-bound used by the probabilistic heads.
double bounded_logvar(double raw, double lv_min, double lv_max);

enum class TrainMode { Full, Incremental };

struct TrainEpoch {
  double train_loss = 0.0;        // mean over batches of the weighted batch loss
  double val_loss = 0.0;          // pooled mean over validation samples
  double val_loss_batches = 0.0;  // mean of per-batch means (differs for ragged batches)
};

struct TrainingHistory {
  std::vector<TrainEpoch> epochs;
};

struct LlEval {
  double mean_ll = 0.0;        // pooled mean log-likelihood per transition
  double batch_mean_ll = 0.0;  // mean of per-batch mean LLs
  std::vector<double> per_batch;
};

class DynamicsModel;

using EpochCallback = std::function<void(int epoch, const DynamicsModel& snapshot)>;

class DynamicsModel {
 public:
  DynamicsModel() = default;

  static DynamicsModel create(const ModelConfig& cfg, int d_s, int d_a);

  // Minimizes the mean weighted loss (NLL for P/PE, squared error for D/DE)
  // with Adam. Full mode re-initializes and runs epochs_full; Incremental
  // keeps weights and runs epochs_initial on the first call,
  // epochs_incremental afterwards. Ensemble members train on their own
  // bootstrap resamples. Throws on NaN loss naming epoch and batch.
  TrainingHistory train(const data::TransitionSet& train_set,
                        const data::TransitionSet& val_set, const WeightSpec& weights,
                        TrainMode mode = TrainMode::Full,
                        data::BatchMode val_batching = data::BatchMode::Random,
                        const EpochCallback& callback = {});

  EnsemblePrediction predict(std::span<const double> s, std::span<const double> a) const;

  // Predicted next state = s + aggregate mean delta (angular dims wrapped).
  std::vector<double> next_state(std::span<const double> s, std::span<const double> a) const;

  // Batched expectation propagation for the planner: predicted deltas for
  // each (state row, action row), ensemble-averaged. Scratch buffers are
  // reused across calls.
  struct BatchScratch {
    Matrix input;
    Matrix mean_sum;
    std::vector<Mlp::Cache> caches;
  };
  void predict_delta_batch(const Matrix& states, const Matrix& actions, Matrix& delta_out,
                           BatchScratch& scratch) const;

  // Mean log-likelihood per transition of the member-averaged density
  // (mixture of Gaussians); per-batch means retained for trajectory-mode
  // analysis. The pooled mean does not depend on the batching.
  LlEval evaluate_ll(const data::TransitionSet& set, int batch_size,
                     data::BatchMode batching, std::uint64_t batch_seed = 0) const;

  // Per-sample mixture log-densities, in set order.
  std::vector<double> per_sample_ll(const data::TransitionSet& set) const;

  // Unweighted mean training objective (NLL or squared error) on a set.
  double mean_loss(const data::TransitionSet& set) const;

  // Wrapped state difference consistent with angular_state_dims.
  std::vector<double> target_delta(std::span<const double> s,
                                   std::span<const double> s_next) const;

  // Raw (s, a) mapped to the network input row: angular dims expand to
  // (sin, cos), everything else passes through; z-scoring happens after.
  int input_dim() const { return d_s_ + static_cast<int>(cfg_.angular_state_dims.size()) + d_a_; }
  void featurize(std::span<const double> s, std::span<const double> a,
                 std::span<double> out) const;

  void save(const std::filesystem::path& path) const;
  static DynamicsModel load(const std::filesystem::path& path);

  const ModelConfig& config() const { return cfg_; }
  int d_s() const { return d_s_; }
  int d_a() const { return d_a_; }
  int n_members() const { return static_cast<int>(members_.size()); }
  const Mlp& member(int e) const { return members_.at(e); }
  Mlp& member(int e) { return members_.at(e); }
  const data::Normalizer& normalizer() const { return norm_; }
  const TrainingHistory& history() const { return history_; }

 private:
  friend struct ModelTestPeer;

  double soft_bound_logvar(double raw) const;

  ModelConfig cfg_;
  int d_s_ = 0;
  int d_a_ = 0;
  data::Normalizer norm_;
  std::vector<Mlp> members_;
  TrainingHistory history_;
  int train_calls_ = 0;
};

}  // namespace mbrl::model
