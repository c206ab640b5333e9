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

#include <doctest.h>

#include <cmath>
#include <random>

#include "mbrl/dynamics_model.hpp"
#include "mbrl/rng.hpp"

using namespace mbrl;
using namespace mbrl::model;

namespace {

// Batch loss through forward + the shared training objective; this is the
// exact function whose gradient backward() reports.
double batch_loss(const Mlp& net, const ModelConfig& cfg, int d_s, const Matrix& x,
                  const Matrix& y, const std::vector<double>& w) {
  Mlp::Cache cache;
  net.forward(x, cache);
  Matrix unused;
  return training_loss_and_grad(cfg, d_s, cache.out, y, w, unused);
}

struct GradCheckCase {
  Mlp net;
  ModelConfig cfg;
  Matrix x, y;
  std::vector<double> w;
  int d_s;
};

GradCheckCase make_case(ModelKind kind, int d_in, int width, int depth, int d_s, int batch,
                        std::uint64_t seed) {
  GradCheckCase c;
  c.cfg.kind = kind;
  c.cfg.logvar_min = -10.0;
  c.cfg.logvar_max = 0.5;
  c.d_s = d_s;
  const int d_out = is_probabilistic(kind) ? 2 * d_s : d_s;
  c.net = Mlp::init(d_in, width, depth, d_out, kern::Activation::Swish, seed);
  Rng rng(derive_seed(seed, 1));
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> uw(0.2, 1.0);
  c.x.resize(batch, d_in);
  c.y.resize(batch, d_s);
  for (double& v : c.x.data) v = n(rng);
  for (double& v : c.y.data) v = n(rng);
  for (int i = 0; i < batch; ++i) c.w.push_back(uw(rng));
  return c;
}

// max relative error between analytic gradients and central differences
double max_grad_rel_err(GradCheckCase& c, double h) {
  Mlp::Cache cache;
  c.net.forward(c.x, cache);
  Matrix d_out;
  training_loss_and_grad(c.cfg, c.d_s, cache.out, c.y, c.w, d_out);
  auto grads = zero_like(c.net);
  Mlp::BackwardScratch scratch;
  c.net.backward(cache, d_out, grads, scratch);

  double worst = 0.0;
  for (std::size_t layer = 0; layer < c.net.layers.size(); ++layer) {
    auto probe = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double hi = batch_loss(c.net, c.cfg, c.d_s, c.x, c.y, c.w);
      param = saved - h;
      const double lo = batch_loss(c.net, c.cfg, c.d_s, c.x, c.y, c.w);
      param = saved;
      const double fd = (hi - lo) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(fd - analytic) / scale);
    };
    for (std::size_t i = 0; i < c.net.layers[layer].w.data.size(); ++i)
      probe(c.net.layers[layer].w.data[i], grads[layer].w.data[i]);
    for (std::size_t i = 0; i < c.net.layers[layer].b.size(); ++i)
      probe(c.net.layers[layer].b[i], grads[layer].b[i]);
  }
  return worst;
}

}  // namespace

TEST_CASE("backprop matches central finite differences (NLL and MSE)") {
  // several random small nets per loss, as the oracle suite requires
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto nll_case = make_case(ModelKind::P, 3, 8, 2, 2, 5, seed);
    CHECK(max_grad_rel_err(nll_case, 1e-5) < 1e-4);

    auto mse_case = make_case(ModelKind::D, 4, 6, 1, 3, 4, seed + 100);
    CHECK(max_grad_rel_err(mse_case, 1e-5) < 1e-4);
  }
}

TEST_CASE("init is seeded and shaped") {
  const Mlp a = Mlp::init(5, 16, 2, 8, kern::Activation::Swish, 7);
  const Mlp b = Mlp::init(5, 16, 2, 8, kern::Activation::Swish, 7);
  const Mlp c = Mlp::init(5, 16, 2, 8, kern::Activation::Swish, 8);
  CHECK(a == b);
  CHECK(a.layers.size() == 3);
  CHECK(a.layers[0].w.rows == 5);
  CHECK(a.layers[2].w.cols == 8);
  CHECK(a.param_count() == 5 * 16 + 16 + 16 * 16 + 16 + 16 * 8 + 8);
  bool differs = false;
  for (std::size_t i = 0; i < a.layers[0].w.data.size(); ++i)
    differs |= a.layers[0].w.data[i] != c.layers[0].w.data[i];
  CHECK(differs);
}

TEST_CASE("adam converges on a quadratic") {
  // fit an affine target with a small net via the adam updater
  Mlp net = Mlp::init(2, 8, 1, 1, kern::Activation::Swish, 3);
  AdamState adam = AdamState::zero(net);
  Matrix x(8, 2);
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (double& v : x.data) v = u(rng);
  std::vector<double> target(8);
  for (int i = 0; i < 8; ++i) target[i] = 2.0 * x.at(i, 0) - x.at(i, 1);

  Mlp::Cache cache;
  Mlp::BackwardScratch scratch;
  auto grads = zero_like(net);
  double last = 1e300;
  for (int it = 0; it < 4000; ++it) {
    net.forward(x, cache);
    Matrix d_out(8, 1);
    double loss = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double diff = cache.out.at(i, 0) - target[i];
      loss += diff * diff / 8.0;
      d_out.at(i, 0) = 2.0 * diff / 8.0;
    }
    net.backward(cache, d_out, grads, scratch);
    adam_step(net, grads, adam, 1e-2, 0.0);
    last = loss;
  }
  CHECK(last < 1e-4);
}

TEST_CASE("flatten/unflatten round trips") {
  Mlp net = Mlp::init(3, 4, 1, 2, kern::Activation::Swish, 11);
  const auto flat = flatten_layer(net.layers.back());
  CHECK(flat.size() == 4 * 2 + 2);
  Layer copy = net.layers.back();
  for (double& v : copy.w.data) v = 0.0;
  unflatten_layer(flat, copy);
  CHECK(copy == net.layers.back());
  CHECK_THROWS_AS(unflatten_layer(std::vector<double>(3), copy), std::invalid_argument);
}
