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

#include "mbrl/kernels.hpp"

#include <cassert>
#include <cmath>
#include <limits>

namespace mbrl::kern {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double act_forward(Activation f, double x) {
  switch (f) {
    case Activation::Swish:
      return x * sigmoid(x);
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
    case Activation::Tanh:
      return std::tanh(x);
  }
  return x;
}

inline double act_derivative(Activation f, double x) {
  switch (f) {
    case Activation::Swish: {
      const double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
    case Activation::Relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

// One output row of C = A * B: accumulate over k in fixed order, inner loop
// over contiguous columns of B so it vectorizes.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, int i) {
  double* ci = c.row(i);
  const double* ai = a.row(i);
  for (int j = 0; j < c.cols; ++j) ci[j] = 0.0;
  for (int k = 0; k < a.cols; ++k) {
    const double aik = ai[k];
    const double* bk = b.row(k);
    for (int j = 0; j < c.cols; ++j) ci[j] += aik * bk[j];
  }
}

inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& c, int i) {
  // C[i][j] = sum_k A[k][i] * B[k][j]
  double* ci = c.row(i);
  for (int j = 0; j < c.cols; ++j) ci[j] = 0.0;
  for (int k = 0; k < a.rows; ++k) {
    const double aki = a.at(k, i);
    const double* bk = b.row(k);
    for (int j = 0; j < c.cols; ++j) ci[j] += aki * bk[j];
  }
}

inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& c, int i) {
  // C[i][j] = dot(A.row(i), B.row(j))
  double* ci = c.row(i);
  const double* ai = a.row(i);
  for (int j = 0; j < c.cols; ++j) {
    const double* bj = b.row(j);
    double acc = 0.0;
    for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
    ci[j] = acc;
  }
}

inline double min_sq_dist_row(const Matrix& x, const Matrix& y, int i) {
  const double* xi = x.row(i);
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < y.rows; ++j) {
    const double* yj = y.row(j);
    double acc = 0.0;
    for (int d = 0; d < x.cols; ++d) {
      const double diff = xi[d] - yj[d];
      acc += diff * diff;
    }
    if (acc < best) best = acc;
  }
  return best;
}

// Work below these thresholds runs serially; forking a team costs more than
// the loop itself. Results are identical either way (disjoint outputs,
// fixed-order inner sums), so the cutoffs affect speed only.
constexpr double kFlopCutoff = 1 << 16;
constexpr std::size_t kElemCutoff = 1 << 13;

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.rows);
  c.resize(a.rows, b.cols);
  const double work = static_cast<double>(a.rows) * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work >= kFlopCutoff)
  for (int i = 0; i < a.rows; ++i) matmul_row(a, b, c, i);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows == b.rows);
  c.resize(a.cols, b.cols);
  const double work = static_cast<double>(a.rows) * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work >= kFlopCutoff)
  for (int i = 0; i < a.cols; ++i) matmul_tn_row(a, b, c, i);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.cols);
  c.resize(a.rows, b.rows);
  const double work = static_cast<double>(a.rows) * a.cols * b.rows;
#pragma omp parallel for schedule(static) if (work >= kFlopCutoff)
  for (int i = 0; i < a.rows; ++i) matmul_nt_row(a, b, c, i);
}

void col_sums(const Matrix& a, std::span<double> out) {
  assert(static_cast<int>(out.size()) == a.cols);
#pragma omp parallel for schedule(static) if (a.size() >= kElemCutoff)
  for (int j = 0; j < a.cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < a.rows; ++i) acc += a.at(i, j);
    out[j] = acc;
  }
}

void add_row_vector(Matrix& a, std::span<const double> b) {
  assert(static_cast<int>(b.size()) == a.cols);
#pragma omp parallel for schedule(static) if (a.size() >= kElemCutoff)
  for (int i = 0; i < a.rows; ++i) {
    double* ai = a.row(i);
    for (int j = 0; j < a.cols; ++j) ai[j] += b[j];
  }
}

void activation(Activation f, const Matrix& in, Matrix& out) {
  out.resize(in.rows, in.cols);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static) if (in.size() >= kElemCutoff / 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) out.data[i] = act_forward(f, in.data[i]);
}

void activation_backward(Activation f, const Matrix& pre, const Matrix& grad_out,
                         Matrix& grad_in) {
  assert(pre.rows == grad_out.rows && pre.cols == grad_out.cols);
  grad_in.resize(pre.rows, pre.cols);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(pre.size());
#pragma omp parallel for schedule(static) if (pre.size() >= kElemCutoff / 4)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    grad_in.data[i] = grad_out.data[i] * act_derivative(f, pre.data[i]);
}

void min_sq_dist(const Matrix& x, const Matrix& y, std::span<double> out) {
  assert(x.cols == y.cols);
  assert(static_cast<int>(out.size()) == x.rows);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) out[i] = min_sq_dist_row(x, y, i);
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.rows);
  c.resize(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) matmul_row(a, b, c, i);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows == b.rows);
  c.resize(a.cols, b.cols);
  for (int i = 0; i < a.cols; ++i) matmul_tn_row(a, b, c, i);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.cols);
  c.resize(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) matmul_nt_row(a, b, c, i);
}

void col_sums(const Matrix& a, std::span<double> out) {
  assert(static_cast<int>(out.size()) == a.cols);
  for (int j = 0; j < a.cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < a.rows; ++i) acc += a.at(i, j);
    out[j] = acc;
  }
}

void add_row_vector(Matrix& a, std::span<const double> b) {
  assert(static_cast<int>(b.size()) == a.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* ai = a.row(i);
    for (int j = 0; j < a.cols; ++j) ai[j] += b[j];
  }
}

void activation(Activation f, const Matrix& in, Matrix& out) {
  out.resize(in.rows, in.cols);
  for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = act_forward(f, in.data[i]);
}

void activation_backward(Activation f, const Matrix& pre, const Matrix& grad_out,
                         Matrix& grad_in) {
  assert(pre.rows == grad_out.rows && pre.cols == grad_out.cols);
  grad_in.resize(pre.rows, pre.cols);
  for (std::size_t i = 0; i < pre.size(); ++i)
    grad_in.data[i] = grad_out.data[i] * act_derivative(f, pre.data[i]);
}

void min_sq_dist(const Matrix& x, const Matrix& y, std::span<double> out) {
  assert(x.cols == y.cols);
  assert(static_cast<int>(out.size()) == x.rows);
  for (int i = 0; i < x.rows; ++i) out[i] = min_sq_dist_row(x, y, i);
}

}  // namespace serial

}  // namespace mbrl::kern
