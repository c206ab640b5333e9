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

#include <span>

#include "mbrl/matrix.hpp"

// Compute kernels behind the network, planner and dataset hot loops.
//
// Every kernel comes in two flavours: the OpenMP-parallel production version
// (kern::...) and a serial reference (kern::serial::...). The parallel
// versions split work over *output* elements only — each output is produced
// by one thread with a fixed-order inner accumulation — so results are
// bit-identical to the serial reference for any thread count. Tests assert
// this equivalence and bench/kernel_bench.cpp compares throughput.
namespace mbrl::kern {

enum class Activation { Swish, Relu, Tanh };

// C = A * B. A: m x k, B: k x n, C: m x n.
void matmul(const Matrix& a, const Matrix& b, Matrix& c);

// C = A^T * B. A: k x m, B: k x n, C: m x n.
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);

// C = A * B^T. A: m x k, B: n x k, C: m x n.
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);

// out[j] = sum_i A[i][j].
void col_sums(const Matrix& a, std::span<double> out);

// Adds the row vector b to every row of A in place.
void add_row_vector(Matrix& a, std::span<const double> b);

// out = f(in), elementwise.
void activation(Activation f, const Matrix& in, Matrix& out);

// grad_in = grad_out .* f'(pre), elementwise; `pre` holds pre-activations.
void activation_backward(Activation f, const Matrix& pre, const Matrix& grad_out,
                         Matrix& grad_in);

// out[i] = min_j sum_d (X[i][d] - Y[j][d])^2.
void min_sq_dist(const Matrix& x, const Matrix& y, std::span<double> out);

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
void col_sums(const Matrix& a, std::span<double> out);
void add_row_vector(Matrix& a, std::span<const double> b);
void activation(Activation f, const Matrix& in, Matrix& out);
void activation_backward(Activation f, const Matrix& pre, const Matrix& grad_out,
                         Matrix& grad_in);
void min_sq_dist(const Matrix& x, const Matrix& y, std::span<double> out);

}  // namespace serial

}  // namespace mbrl::kern
