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

#include "mbrl/dynamics_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mbrl/cartpole.hpp"
#include "mbrl/rng.hpp"

namespace mbrl::model {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
constexpr int kEvalChunk = 4096;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct BoundedLogvar {
  double value;
  double dvalue_draw;  // derivative w.r.t. the raw head output
};

BoundedLogvar bound_logvar(double raw, double lv_min, double lv_max) {
  const double upper = lv_max - softplus(lv_max - raw);
  const double lv = lv_min + softplus(upper - lv_min);
  const double deriv = sigmoid(lv_max - raw) * sigmoid(upper - lv_min);
  return {std::clamp(lv, lv_min, lv_max), deriv};
}

}  // namespace

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::D: return "D";
    case ModelKind::P: return "P";
    case ModelKind::DE: return "DE";
    case ModelKind::PE: return "PE";
  }
  return "P";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "D") return ModelKind::D;
  if (s == "P") return ModelKind::P;
  if (s == "DE") return ModelKind::DE;
  if (s == "PE") return ModelKind::PE;
  throw std::invalid_argument("unknown model kind: " + s);
}

bool is_probabilistic(ModelKind k) { return k == ModelKind::P || k == ModelKind::PE; }
bool is_ensemble(ModelKind k) { return k == ModelKind::DE || k == ModelKind::PE; }

void ModelConfig::validate() const {
  if (is_ensemble(kind)) {
    if (ensemble_size < 2) throw std::invalid_argument("ensemble kinds require E >= 2");
  } else if (ensemble_size != 1) {
    throw std::invalid_argument("kinds D and P require E = 1");
  }
  if (width < 1 || depth < 1) throw std::invalid_argument("width and depth must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(logvar_min < logvar_max)) throw std::invalid_argument("logvar bounds inverted");
}

ModelConfig cartpole_model_config() {
  ModelConfig cfg;
  cfg.angular_state_dims = {2};  // theta
  return cfg;
}

double nll(const GaussianPrediction& pred, std::span<const double> observed_delta) {
  if (pred.mean.size() != observed_delta.size() || pred.logvar.size() != observed_delta.size())
    throw std::invalid_argument("nll dim mismatch");
  double acc = 0.0;
  for (std::size_t d = 0; d < observed_delta.size(); ++d) {
    const double diff = observed_delta[d] - pred.mean[d];
    const double lv = pred.logvar[d];
    acc += diff * diff * std::exp(-lv) + lv + kLog2Pi;
  }
  return 0.5 * acc;
}

std::vector<double> weights_from(const WeightSpec& spec, const data::TransitionSet& set) {
  const std::size_t n = set.size();
  std::vector<double> w(n, 1.0);
  switch (spec.mode) {
    case WeightSpec::Mode::None:
      return w;
    case WeightSpec::Mode::Distance: {
      std::vector<double> d;
      if (!spec.distances.empty()) {
        if (spec.distances.size() != n)
          throw std::invalid_argument("weight distances not aligned with the training set");
        d = spec.distances;
      } else {
        d.reserve(n);
        for (const auto& t : set.transitions) {
          if (!t.dstar)
            throw std::invalid_argument("distance weighting requires per-sample d*");
          d.push_back(*t.dstar);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (spec.cutoff_distance && d[i] > *spec.cutoff_distance)
          w[i] = 0.0;
        else
          w[i] = spec.scale * std::exp(-d[i]);
      }
      return w;
    }
    case WeightSpec::Mode::Reward: {
      if (spec.rewards.size() != n)
        throw std::invalid_argument("reward weighting requires per-sample rewards");
      const auto [lo, hi] = std::minmax_element(spec.rewards.begin(), spec.rewards.end());
      const double range = *hi - *lo;
      for (std::size_t i = 0; i < n; ++i)
        w[i] = range > 0.0 ? spec.scale * (spec.rewards[i] - *lo) / range : spec.scale;
      return w;
    }
  }
  return w;
}

DynamicsModel DynamicsModel::create(const ModelConfig& cfg, int d_s, int d_a) {
  cfg.validate();
  if (d_s < 1 || d_a < 1) throw std::invalid_argument("model dims must be >= 1");
  for (const int d : cfg.angular_state_dims)
    if (d < 0 || d >= d_s) throw std::invalid_argument("angular dim out of range");

  DynamicsModel m;
  m.cfg_ = cfg;
  m.d_s_ = d_s;
  m.d_a_ = d_a;
  m.norm_ = data::Normalizer::identity(m.input_dim());
  const int d_out = is_probabilistic(cfg.kind) ? 2 * d_s : d_s;
  m.members_.reserve(cfg.ensemble_size);
  for (int e = 0; e < cfg.ensemble_size; ++e)
    m.members_.push_back(Mlp::init(m.input_dim(), cfg.width, cfg.depth, d_out, cfg.activation,
                                   derive_seed(cfg.seed, 0x1417, e)));
  return m;
}

void DynamicsModel::featurize(std::span<const double> s, std::span<const double> a,
                              std::span<double> out) const {
  int idx = 0;
  for (int d = 0; d < d_s_; ++d) {
    const bool angular = std::find(cfg_.angular_state_dims.begin(),
                                   cfg_.angular_state_dims.end(), d) !=
                         cfg_.angular_state_dims.end();
    if (angular) {
      out[idx++] = std::sin(s[d]);
      out[idx++] = std::cos(s[d]);
    } else {
      out[idx++] = s[d];
    }
  }
  for (int d = 0; d < d_a_; ++d) out[idx++] = a[d];
}

double DynamicsModel::soft_bound_logvar(double raw) const {
  return bound_logvar(raw, cfg_.logvar_min, cfg_.logvar_max).value;
}

std::vector<double> DynamicsModel::target_delta(std::span<const double> s,
                                                std::span<const double> s_next) const {
  std::vector<double> delta(d_s_);
  for (int d = 0; d < d_s_; ++d) delta[d] = s_next[d] - s[d];
  for (const int d : cfg_.angular_state_dims) delta[d] = env::wrap_angle(delta[d]);
  return delta;
}

namespace {

// Normalized input and delta-target matrices for a transition set.
struct Prepared {
  Matrix x;
  Matrix y;
};

Prepared prepare(const data::TransitionSet& set, const data::Normalizer& norm,
                 const DynamicsModel& model) {
  Prepared p;
  const int n = static_cast<int>(set.size());
  const int d_in = model.input_dim();
  p.x.resize(n, d_in);
  p.y.resize(n, set.d_s);
  std::vector<double> features(d_in);
  for (int i = 0; i < n; ++i) {
    const auto& t = set.transitions[i];
    model.featurize(t.s, t.a, features);
    norm.apply(features, p.x.row_span(i));
    const auto delta = model.target_delta(t.s, t.s_next);
    std::copy(delta.begin(), delta.end(), p.y.row(i));
  }
  return p;
}

}  // namespace

EnsemblePrediction DynamicsModel::predict(std::span<const double> s,
                                          std::span<const double> a) const {
  if (static_cast<int>(s.size()) != d_s_ || static_cast<int>(a.size()) != d_a_)
    throw std::invalid_argument("predict dim mismatch");
  for (const double v : s)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite state in predict");
  for (const double v : a)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite action in predict");

  Matrix input(1, input_dim());
  std::vector<double> features(input_dim());
  featurize(s, a, features);
  norm_.apply(features, input.row_span(0));

  EnsemblePrediction out;
  Mlp::Cache cache;
  for (const Mlp& net : members_) {
    net.forward(input, cache);
    GaussianPrediction p;
    p.mean.assign(cache.out.row(0), cache.out.row(0) + d_s_);
    p.logvar.assign(d_s_, cfg_.logvar_min);
    if (is_probabilistic(cfg_.kind))
      for (int d = 0; d < d_s_; ++d)
        p.logvar[d] = soft_bound_logvar(cache.out.at(0, d_s_ + d));
    out.members.push_back(std::move(p));
  }

  if (out.members.size() == 1) {
    out.aggregate = out.members.front();
    return out;
  }
  const double inv_e = 1.0 / static_cast<double>(out.members.size());
  out.aggregate.mean.assign(d_s_, 0.0);
  out.aggregate.logvar.assign(d_s_, 0.0);
  for (int d = 0; d < d_s_; ++d) {
    double mean = 0.0;
    for (const auto& m : out.members) mean += m.mean[d];
    mean *= inv_e;
    double second_moment = 0.0;
    for (const auto& m : out.members)
      second_moment += std::exp(m.logvar[d]) + m.mean[d] * m.mean[d];
    second_moment *= inv_e;
    out.aggregate.mean[d] = mean;
    const double var = std::max(second_moment - mean * mean, std::exp(cfg_.logvar_min));
    out.aggregate.logvar[d] = std::log(var);
  }
  return out;
}

std::vector<double> DynamicsModel::next_state(std::span<const double> s,
                                              std::span<const double> a) const {
  const auto pred = predict(s, a);
  std::vector<double> next(d_s_);
  for (int d = 0; d < d_s_; ++d) next[d] = s[d] + pred.aggregate.mean[d];
  for (const int d : cfg_.angular_state_dims) next[d] = env::wrap_angle(next[d]);
  return next;
}

void DynamicsModel::predict_delta_batch(const Matrix& states, const Matrix& actions,
                                        Matrix& delta_out, BatchScratch& scratch) const {
  const int n = states.rows;
  const int d_in = input_dim();
  scratch.input.resize(n, d_in);
  for (int i = 0; i < n; ++i) {
    double* row = scratch.input.row(i);
    featurize(states.row_span(i), actions.row_span(i),
              {row, static_cast<std::size_t>(d_in)});
    for (int d = 0; d < d_in; ++d) row[d] = (row[d] - norm_.mean[d]) / norm_.std[d];
  }

  scratch.caches.resize(members_.size());
  delta_out.resize(n, d_s_);
  const double inv_e = 1.0 / static_cast<double>(members_.size());
  for (std::size_t e = 0; e < members_.size(); ++e) {
    members_[e].forward(scratch.input, scratch.caches[e]);
    const Matrix& out = scratch.caches[e].out;
    if (e == 0) {
      for (int i = 0; i < n; ++i) {
        const double* orow = out.row(i);
        double* drow = delta_out.row(i);
        for (int d = 0; d < d_s_; ++d) drow[d] = orow[d] * inv_e;
      }
    } else {
      for (int i = 0; i < n; ++i) {
        const double* orow = out.row(i);
        double* drow = delta_out.row(i);
        for (int d = 0; d < d_s_; ++d) drow[d] += orow[d] * inv_e;
      }
    }
  }
}

std::vector<double> DynamicsModel::per_sample_ll(const data::TransitionSet& set) const {
  if (set.empty()) throw std::invalid_argument("per_sample_ll on empty set");
  if (set.d_s != d_s_ || set.d_a != d_a_)
    throw std::invalid_argument("per_sample_ll dim mismatch");

  const Prepared prep = prepare(set, norm_, *this);
  const int n = static_cast<int>(set.size());
  const int n_members = static_cast<int>(members_.size());
  std::vector<double> member_ll(static_cast<std::size_t>(n) * n_members);

  Mlp::Cache cache;
  Matrix chunk;
  for (int begin = 0; begin < n; begin += kEvalChunk) {
    const int end = std::min(n, begin + kEvalChunk);
    chunk.resize(end - begin, prep.x.cols);
    std::copy(prep.x.row(begin), prep.x.row(begin) + chunk.size(), chunk.data.begin());
    for (int e = 0; e < n_members; ++e) {
      members_[e].forward(chunk, cache);
#pragma omp parallel for schedule(static)
      for (int i = 0; i < chunk.rows; ++i) {
        const double* orow = cache.out.row(i);
        const double* yrow = prep.y.row(begin + i);
        double acc = 0.0;
        for (int d = 0; d < d_s_; ++d) {
          const double lv = is_probabilistic(cfg_.kind)
                                ? bound_logvar(orow[d_s_ + d], cfg_.logvar_min, cfg_.logvar_max).value
                                : cfg_.logvar_min;
          const double diff = yrow[d] - orow[d];
          acc += diff * diff * std::exp(-lv) + lv + kLog2Pi;
        }
        member_ll[static_cast<std::size_t>(begin + i) * n_members + e] = -0.5 * acc;
      }
    }
  }

  std::vector<double> ll(n);
  const double log_e = std::log(static_cast<double>(n_members));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* row = member_ll.data() + static_cast<std::size_t>(i) * n_members;
    double best = row[0];
    for (int e = 1; e < n_members; ++e) best = std::max(best, row[e]);
    double acc = 0.0;
    for (int e = 0; e < n_members; ++e) acc += std::exp(row[e] - best);
    ll[i] = best + std::log(acc) - log_e;
  }
  return ll;
}

LlEval DynamicsModel::evaluate_ll(const data::TransitionSet& set, int batch_size,
                                  data::BatchMode batching, std::uint64_t batch_seed) const {
  const std::vector<double> ll = per_sample_ll(set);
  LlEval out;
  double total = 0.0;
  for (const double v : ll) total += v;
  out.mean_ll = total / static_cast<double>(ll.size());

  const auto slices = data::batches(set, batch_size, batching, batch_seed);
  out.per_batch.reserve(slices.size());
  for (const auto& slice : slices) {
    double acc = 0.0;
    for (const int i : slice) acc += ll[i];
    out.per_batch.push_back(acc / static_cast<double>(slice.size()));
  }
  double batch_total = 0.0;
  for (const double v : out.per_batch) batch_total += v;
  out.batch_mean_ll = batch_total / static_cast<double>(out.per_batch.size());
  return out;
}

double bounded_logvar(double raw, double lv_min, double lv_max) {
  return bound_logvar(raw, lv_min, lv_max).value;
}

double training_loss_and_grad(const ModelConfig& cfg, int d_s, const Matrix& out,
                              const Matrix& y, std::span<const double> w, Matrix& d_out) {
  const int n = out.rows;
  d_out.resize(out.rows, out.cols);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* orow = out.row(i);
    const double* yrow = y.row(i);
    double* grow = d_out.row(i);
    const double wi = w[i];
    double loss_i = 0.0;
    if (is_probabilistic(cfg.kind)) {
      for (int d = 0; d < d_s; ++d) {
        const auto bounded = bound_logvar(orow[d_s + d], cfg.logvar_min, cfg.logvar_max);
        const double lv = bounded.value;
        const double prec = std::exp(-lv);
        const double diff = yrow[d] - orow[d];
        loss_i += 0.5 * (diff * diff * prec + lv + kLog2Pi);
        grow[d] = wi * inv_n * (-diff * prec);
        grow[d_s + d] = wi * inv_n * 0.5 * (1.0 - diff * diff * prec) * bounded.dvalue_draw;
      }
    } else {
      for (int d = 0; d < d_s; ++d) {
        const double diff = yrow[d] - orow[d];
        loss_i += diff * diff;
        grow[d] = wi * inv_n * (-2.0 * diff);
      }
    }
    total += wi * loss_i;
  }
  return total * inv_n;
}

namespace {

// Unweighted per-sample objective (validation). `out` is indexed chunk-local,
// `y` by the sample's global row.
double plain_loss(const ModelConfig& cfg, int d_s, const Matrix& out, int out_row,
                  const Matrix& y, int y_row) {
  const double* orow = out.row(out_row);
  const double* yrow = y.row(y_row);
  double loss = 0.0;
  if (is_probabilistic(cfg.kind)) {
    for (int d = 0; d < d_s; ++d) {
      const double lv = bound_logvar(orow[d_s + d], cfg.logvar_min, cfg.logvar_max).value;
      const double diff = yrow[d] - orow[d];
      loss += 0.5 * (diff * diff * std::exp(-lv) + lv + kLog2Pi);
    }
  } else {
    for (int d = 0; d < d_s; ++d) {
      const double diff = yrow[d] - orow[d];
      loss += diff * diff;
    }
  }
  return loss;
}

struct MemberTrainState {
  Mlp* net = nullptr;
  AdamState adam;
  std::vector<int> indices;  // bootstrap resample (or identity)
  Rng rng;
  std::vector<Layer> grads;
  Mlp::Cache cache;
  Mlp::BackwardScratch scratch;
  Matrix batch_x, batch_y, d_out;
  std::vector<double> batch_w;
  // error reporting out of the parallel region
  bool failed = false;
  int fail_epoch = 0, fail_batch = 0;
  double epoch_train_loss = 0.0;
  std::vector<double> val_losses;  // per-sample, reused
};

}  // namespace

TrainingHistory DynamicsModel::train(const data::TransitionSet& train_set,
                                     const data::TransitionSet& val_set,
                                     const WeightSpec& weights, TrainMode mode,
                                     data::BatchMode val_batching,
                                     const EpochCallback& callback) {
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (train_set.d_s != d_s_ || train_set.d_a != d_a_)
    throw std::invalid_argument("training set dims do not match model");
  const std::vector<double> w = weights_from(weights, train_set);

  const int generation = train_calls_;
  auto fit_input_normalizer = [this, &train_set]() {
    Matrix features(static_cast<int>(train_set.size()), input_dim());
    for (int i = 0; i < features.rows; ++i)
      featurize(train_set.transitions[i].s, train_set.transitions[i].a, features.row_span(i));
    norm_ = data::Normalizer::fit_rows(features);
  };
  int epochs = 0;
  if (mode == TrainMode::Full) {
    epochs = cfg_.epochs_full;
    fit_input_normalizer();
    for (int e = 0; e < cfg_.ensemble_size; ++e)
      members_[e] = Mlp::init(input_dim(), cfg_.width, cfg_.depth, members_[e].d_out(),
                              cfg_.activation, derive_seed(cfg_.seed, 0x1417, e));
    history_.epochs.clear();
  } else {
    epochs = generation == 0 ? cfg_.epochs_initial : cfg_.epochs_incremental;
    if (generation == 0) fit_input_normalizer();
  }
  ++train_calls_;

  const Prepared train_prep = prepare(train_set, norm_, *this);
  const bool have_val = !val_set.empty();
  Prepared val_prep;
  std::vector<std::vector<int>> val_slices;
  if (have_val) {
    if (val_set.d_s != d_s_ || val_set.d_a != d_a_)
      throw std::invalid_argument("validation set dims do not match model");
    val_prep = prepare(val_set, norm_, *this);
    val_slices = data::batches(val_set, cfg_.batch_size, val_batching,
                               derive_seed(cfg_.seed, 0x7a1, generation));
  }

  const int n = static_cast<int>(train_set.size());
  const int n_members = cfg_.ensemble_size;
  std::vector<MemberTrainState> states(n_members);
  for (int e = 0; e < n_members; ++e) {
    auto& st = states[e];
    st.net = &members_[e];
    st.adam = AdamState::zero(*st.net);
    st.grads = zero_like(*st.net);
    st.rng.seed(derive_seed(cfg_.seed, 0x7a51, e * 1000003ULL + generation));
    st.indices.resize(n);
    if (is_ensemble(cfg_.kind)) {
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (int& idx : st.indices) idx = pick(st.rng);
    } else {
      std::iota(st.indices.begin(), st.indices.end(), 0);
    }
  }

  TrainingHistory history;
  history.epochs.resize(epochs);
  // per-member per-epoch losses, merged after training
  Matrix member_train_loss(n_members, epochs);
  Matrix member_val_loss(n_members, epochs);
  Matrix member_val_loss_batches(n_members, epochs);

  for (int epoch = 0; epoch < epochs; ++epoch) {
#pragma omp parallel for schedule(static) if (n_members > 1)
    for (int e = 0; e < n_members; ++e) {
      auto& st = states[e];
      if (st.failed) continue;
      std::shuffle(st.indices.begin(), st.indices.end(), st.rng);
      double loss_sum = 0.0;
      int n_batches = 0;
      for (int begin = 0; begin < n; begin += cfg_.batch_size) {
        const int end = std::min(n, begin + cfg_.batch_size);
        const int b = end - begin;
        st.batch_x.resize(b, train_prep.x.cols);
        st.batch_y.resize(b, train_prep.y.cols);
        st.batch_w.resize(b);
        for (int i = 0; i < b; ++i) {
          const int src = st.indices[begin + i];
          std::copy(train_prep.x.row(src), train_prep.x.row(src) + train_prep.x.cols,
                    st.batch_x.row(i));
          std::copy(train_prep.y.row(src), train_prep.y.row(src) + train_prep.y.cols,
                    st.batch_y.row(i));
          st.batch_w[i] = w[src];
        }
        st.net->forward(st.batch_x, st.cache);
        const double batch_loss =
            training_loss_and_grad(cfg_, d_s_, st.cache.out, st.batch_y, st.batch_w, st.d_out);
        if (!std::isfinite(batch_loss)) {
          st.failed = true;
          st.fail_epoch = epoch;
          st.fail_batch = n_batches;
          break;
        }
        st.net->backward(st.cache, st.d_out, st.grads, st.scratch);
        adam_step(*st.net, st.grads, st.adam, cfg_.learning_rate, cfg_.weight_decay);
        loss_sum += batch_loss;
        ++n_batches;
      }
      if (st.failed) continue;
      member_train_loss.at(e, epoch) = loss_sum / std::max(n_batches, 1);

      if (have_val) {
        const int vn = static_cast<int>(val_prep.x.rows);
        st.val_losses.resize(vn);
        for (int begin = 0; begin < vn; begin += kEvalChunk) {
          const int end = std::min(vn, begin + kEvalChunk);
          st.batch_x.resize(end - begin, val_prep.x.cols);
          std::copy(val_prep.x.row(begin),
                    val_prep.x.row(begin) + st.batch_x.size(), st.batch_x.data.begin());
          st.net->forward(st.batch_x, st.cache);
          for (int i = begin; i < end; ++i)
            st.val_losses[i] = plain_loss(cfg_, d_s_, st.cache.out, i - begin, val_prep.y, i);
        }
        double pooled = 0.0;
        for (const double v : st.val_losses) pooled += v;
        member_val_loss.at(e, epoch) = pooled / vn;
        double batch_means = 0.0;
        for (const auto& slice : val_slices) {
          double acc = 0.0;
          for (const int i : slice) acc += st.val_losses[i];
          batch_means += acc / static_cast<double>(slice.size());
        }
        member_val_loss_batches.at(e, epoch) =
            batch_means / static_cast<double>(val_slices.size());
      }
    }

    for (const auto& st : states)
      if (st.failed)
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(st.fail_epoch) + ", batch " +
                                 std::to_string(st.fail_batch));

    auto& entry = history.epochs[epoch];
    for (int e = 0; e < n_members; ++e) {
      entry.train_loss += member_train_loss.at(e, epoch);
      entry.val_loss += member_val_loss.at(e, epoch);
      entry.val_loss_batches += member_val_loss_batches.at(e, epoch);
    }
    entry.train_loss /= n_members;
    entry.val_loss /= n_members;
    entry.val_loss_batches /= n_members;

    if (callback) callback(epoch, *this);
  }

  history_ = history;
  return history;
}

double DynamicsModel::mean_loss(const data::TransitionSet& set) const {
  if (set.empty()) throw std::invalid_argument("mean_loss on empty set");
  const Prepared prep = prepare(set, norm_, *this);
  const int n = prep.x.rows;
  double total = 0.0;
  Mlp::Cache cache;
  Matrix chunk;
  for (const Mlp& net : members_) {
    for (int begin = 0; begin < n; begin += kEvalChunk) {
      const int end = std::min(n, begin + kEvalChunk);
      chunk.resize(end - begin, prep.x.cols);
      std::copy(prep.x.row(begin), prep.x.row(begin) + chunk.size(), chunk.data.begin());
      net.forward(chunk, cache);
      for (int i = begin; i < end; ++i)
        total += plain_loss(cfg_, d_s_, cache.out, i - begin, prep.y, i);
    }
  }
  return total / (static_cast<double>(n) * members_.size());
}

namespace {

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& out, T v) {
  write_bytes(out, &v, sizeof(T));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("truncated model checkpoint");
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  read_bytes(in, &v, sizeof(T));
  return v;
}

constexpr char kMagic[8] = {'M', 'B', 'R', 'L', 'D', 'Y', 'N', '1'};

}  // namespace

void DynamicsModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");

  write_bytes(out, kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, 1);  // version
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg_.kind));
  write_pod<std::uint32_t>(out, cfg_.ensemble_size);
  write_pod<std::uint32_t>(out, cfg_.width);
  write_pod<std::uint32_t>(out, cfg_.depth);
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg_.activation));
  write_pod<double>(out, cfg_.learning_rate);
  write_pod<std::uint32_t>(out, cfg_.batch_size);
  write_pod<std::uint32_t>(out, cfg_.epochs_full);
  write_pod<std::uint32_t>(out, cfg_.epochs_initial);
  write_pod<std::uint32_t>(out, cfg_.epochs_incremental);
  write_pod<double>(out, cfg_.weight_decay);
  write_pod<double>(out, cfg_.logvar_min);
  write_pod<double>(out, cfg_.logvar_max);
  write_pod<std::uint64_t>(out, cfg_.seed);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.angular_state_dims.size()));
  for (const int d : cfg_.angular_state_dims) write_pod<std::int32_t>(out, d);
  write_pod<std::uint32_t>(out, d_s_);
  write_pod<std::uint32_t>(out, d_a_);
  write_pod<std::uint32_t>(out, norm_.dims());
  for (const double v : norm_.mean) write_pod<double>(out, v);
  for (const double v : norm_.std) write_pod<double>(out, v);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(members_.size()));
  for (const Mlp& net : members_) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const Layer& l : net.layers) {
      write_pod<std::uint32_t>(out, l.w.rows);
      write_pod<std::uint32_t>(out, l.w.cols);
      write_bytes(out, l.w.data.data(), l.w.data.size() * sizeof(double));
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.b.size()));
      write_bytes(out, l.b.data(), l.b.size() * sizeof(double));
    }
  }
  if (!out) throw std::runtime_error("write error in " + path.string());
}

DynamicsModel DynamicsModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model checkpoint " + path.string());

  char magic[8];
  read_bytes(in, magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path.string() + " is not a model checkpoint");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  DynamicsModel m;
  m.cfg_.kind = static_cast<ModelKind>(read_pod<std::uint8_t>(in));
  m.cfg_.ensemble_size = static_cast<int>(read_pod<std::uint32_t>(in));
  m.cfg_.width = static_cast<int>(read_pod<std::uint32_t>(in));
  m.cfg_.depth = static_cast<int>(read_pod<std::uint32_t>(in));
  m.cfg_.activation = static_cast<kern::Activation>(read_pod<std::uint8_t>(in));
  m.cfg_.learning_rate = read_pod<double>(in);
  m.cfg_.batch_size = static_cast<int>(read_pod<std::uint32_t>(in));
  m.cfg_.epochs_full = static_cast<int>(read_pod<std::uint32_t>(in));
  m.cfg_.epochs_initial = static_cast<int>(read_pod<std::uint32_t>(in));
  m.cfg_.epochs_incremental = static_cast<int>(read_pod<std::uint32_t>(in));
  m.cfg_.weight_decay = read_pod<double>(in);
  m.cfg_.logvar_min = read_pod<double>(in);
  m.cfg_.logvar_max = read_pod<double>(in);
  m.cfg_.seed = read_pod<std::uint64_t>(in);
  const auto n_ang = read_pod<std::uint32_t>(in);
  m.cfg_.angular_state_dims.resize(n_ang);
  for (auto& d : m.cfg_.angular_state_dims) d = static_cast<int>(read_pod<std::int32_t>(in));
  m.d_s_ = static_cast<int>(read_pod<std::uint32_t>(in));
  m.d_a_ = static_cast<int>(read_pod<std::uint32_t>(in));
  const auto norm_dims = read_pod<std::uint32_t>(in);
  m.norm_.mean.resize(norm_dims);
  m.norm_.std.resize(norm_dims);
  for (auto& v : m.norm_.mean) v = read_pod<double>(in);
  for (auto& v : m.norm_.std) v = read_pod<double>(in);
  const auto n_members = read_pod<std::uint32_t>(in);
  m.members_.resize(n_members);
  for (Mlp& net : m.members_) {
    net.act = m.cfg_.activation;
    const auto n_layers = read_pod<std::uint32_t>(in);
    net.layers.resize(n_layers);
    for (Layer& l : net.layers) {
      const auto rows = read_pod<std::uint32_t>(in);
      const auto cols = read_pod<std::uint32_t>(in);
      l.w.resize(rows, cols);
      read_bytes(in, l.w.data.data(), l.w.data.size() * sizeof(double));
      const auto blen = read_pod<std::uint32_t>(in);
      l.b.resize(blen);
      read_bytes(in, l.b.data(), l.b.size() * sizeof(double));
    }
  }
  return m;
}

}  // namespace mbrl::model
