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
#include <vector>

#include "mbrl/kernels.hpp"
#include "mbrl/matrix.hpp"

namespace mbrl::model {

struct Layer {
  Matrix w;               // fan_in x fan_out
  std::vector<double> b;  // fan_out

  bool operator==(const Layer&) const = default;
};

// Plain feed-forward net: `depth` hidden layers of `width` units with the
// given activation, linear output. Batched forward/backward over row-major
// sample matrices; gradients verified against finite differences in tests.
struct Mlp {
  std::vector<Layer> layers;
  kern::Activation act = kern::Activation::Swish;

  static Mlp init(int d_in, int width, int depth, int d_out, kern::Activation act,
                  std::uint64_t seed);

  int d_in() const { return layers.front().w.rows; }
  int d_out() const { return layers.back().w.cols; }

  struct Cache {
    std::vector<Matrix> pre;   // pre-activations per hidden layer
    std::vector<Matrix> post;  // post[0] = input, post[k] = activation of layer k-1
    Matrix out;                // linear output
  };

  // Forward pass over a batch; the cache keeps what backward() needs and its
  // buffers are reused between calls.
  void forward(const Matrix& x, Cache& cache) const;

  // Gradients of a scalar loss given d(loss)/d(out); grads mirrors `layers`.
  // Scratch holds intermediate matrices so training loops do not reallocate.
  struct BackwardScratch {
    Matrix d_act;
    Matrix d_pre;
  };
  void backward(const Cache& cache, const Matrix& d_out, std::vector<Layer>& grads,
                BackwardScratch& scratch) const;

  std::size_t param_count() const;

  bool operator==(const Mlp&) const = default;
};

std::vector<Layer> zero_like(const Mlp& net);

// Flattened read/write of one layer's parameters, row-major weights then
// biases (used by the output-layer attack and the gradient checks).
std::vector<double> flatten_layer(const Layer& layer);
void unflatten_layer(std::span<const double> flat, Layer& layer);

struct AdamState {
  std::vector<Layer> m;
  std::vector<Layer> v;
  std::int64_t t = 0;

  static AdamState zero(const Mlp& net);
};

// One adaptive-moment-estimation update (beta1 0.9, beta2 0.999, eps 1e-8);
// weight_decay adds an L2 term on the weights (not biases).
void adam_step(Mlp& net, const std::vector<Layer>& grads, AdamState& state, double lr,
               double weight_decay);

}  // namespace mbrl::model
