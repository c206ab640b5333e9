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

#include "mbrl/net.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "mbrl/rng.hpp"

namespace mbrl::model {

Mlp Mlp::init(int d_in, int width, int depth, int d_out, kern::Activation act,
              std::uint64_t seed) {
  if (d_in < 1 || width < 1 || depth < 1 || d_out < 1)
    throw std::invalid_argument("mlp dims must be >= 1");
  Mlp net;
  net.act = act;
  Rng rng(derive_seed(seed, 0x1417));
  auto make_layer = [&rng](int fan_in, int fan_out) {
    Layer l;
    l.w.resize(fan_in, fan_out);
    l.b.assign(fan_out, 0.0);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : l.w.data) v = u(rng);
    return l;
  };
  int in = d_in;
  for (int k = 0; k < depth; ++k) {
    net.layers.push_back(make_layer(in, width));
    in = width;
  }
  net.layers.push_back(make_layer(in, d_out));
  return net;
}

void Mlp::forward(const Matrix& x, Cache& cache) const {
  const int n_hidden = static_cast<int>(layers.size()) - 1;
  cache.pre.resize(n_hidden);
  cache.post.resize(n_hidden + 1);
  cache.post[0] = x;
  for (int k = 0; k < n_hidden; ++k) {
    kern::matmul(cache.post[k], layers[k].w, cache.pre[k]);
    kern::add_row_vector(cache.pre[k], layers[k].b);
    kern::activation(act, cache.pre[k], cache.post[k + 1]);
  }
  kern::matmul(cache.post[n_hidden], layers[n_hidden].w, cache.out);
  kern::add_row_vector(cache.out, layers[n_hidden].b);
}

void Mlp::backward(const Cache& cache, const Matrix& d_out, std::vector<Layer>& grads,
                   BackwardScratch& scratch) const {
  const int n_hidden = static_cast<int>(layers.size()) - 1;
  assert(static_cast<int>(grads.size()) == n_hidden + 1);

  const Matrix* upstream = &d_out;
  for (int k = n_hidden; k >= 0; --k) {
    kern::matmul_tn(cache.post[k], *upstream, grads[k].w);
    kern::col_sums(*upstream, grads[k].b);
    if (k == 0) break;
    kern::matmul_nt(*upstream, layers[k].w, scratch.d_act);
    kern::activation_backward(act, cache.pre[k - 1], scratch.d_act, scratch.d_pre);
    upstream = &scratch.d_pre;
  }
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

std::vector<Layer> zero_like(const Mlp& net) {
  std::vector<Layer> grads;
  grads.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    Layer g;
    g.w.resize(l.w.rows, l.w.cols);
    g.b.assign(l.b.size(), 0.0);
    grads.push_back(std::move(g));
  }
  return grads;
}

std::vector<double> flatten_layer(const Layer& layer) {
  std::vector<double> flat;
  flat.reserve(layer.w.size() + layer.b.size());
  flat.insert(flat.end(), layer.w.data.begin(), layer.w.data.end());
  flat.insert(flat.end(), layer.b.begin(), layer.b.end());
  return flat;
}

void unflatten_layer(std::span<const double> flat, Layer& layer) {
  if (flat.size() != layer.w.size() + layer.b.size())
    throw std::invalid_argument("layer parameter count mismatch");
  std::copy(flat.begin(), flat.begin() + layer.w.size(), layer.w.data.begin());
  std::copy(flat.begin() + layer.w.size(), flat.end(), layer.b.begin());
}

AdamState AdamState::zero(const Mlp& net) {
  AdamState s;
  s.m = zero_like(net);
  s.v = zero_like(net);
  s.t = 0;
  return s;
}

void adam_step(Mlp& net, const std::vector<Layer>& grads, AdamState& state, double lr,
               double weight_decay) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));

  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto update = [&](double& param, double grad, double& m, double& v) {
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad * grad;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      param -= lr * m_hat / (std::sqrt(v_hat) + eps);
    };
    auto& lw = net.layers[k].w.data;
    const auto& gw = grads[k].w.data;
    auto& mw = state.m[k].w.data;
    auto& vw = state.v[k].w.data;
    for (std::size_t i = 0; i < lw.size(); ++i) {
      const double g = gw[i] + weight_decay * lw[i];
      update(lw[i], g, mw[i], vw[i]);
    }
    auto& lb = net.layers[k].b;
    const auto& gb = grads[k].b;
    auto& mb = state.m[k].b;
    auto& vb = state.v[k].b;
    for (std::size_t i = 0; i < lb.size(); ++i) update(lb[i], gb[i], mb[i], vb[i]);
  }
}

}  // namespace mbrl::model
