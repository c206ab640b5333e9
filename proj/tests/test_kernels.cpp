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

#include <doctest.h>

#include <random>

#include "mbrl/rng.hpp"

using namespace mbrl;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data) v = n(rng);
  return m;
}

}  // namespace

TEST_CASE("matmul hand case") {
  Matrix a(2, 3), b(3, 2), c;
  a.data = {1, 2, 3, 4, 5, 6};
  b.data = {7, 8, 9, 10, 11, 12};
  kern::matmul(a, b, c);
  CHECK(c.rows == 2);
  CHECK(c.cols == 2);
  CHECK(c.at(0, 0) == 58);
  CHECK(c.at(0, 1) == 64);
  CHECK(c.at(1, 0) == 139);
  CHECK(c.at(1, 1) == 154);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> dim(1, 40);
    const int m = dim(rng), k = dim(rng), n = dim(rng);
    const Matrix a = random_matrix(m, k, rng);
    const Matrix b = random_matrix(k, n, rng);
    Matrix c1, c2;
    kern::matmul(a, b, c1);
    kern::serial::matmul(a, b, c2);
    CHECK(c1 == c2);

    const Matrix at = random_matrix(k, m, rng);
    kern::matmul_tn(at, b, c1);
    kern::serial::matmul_tn(at, b, c2);
    CHECK(c1 == c2);

    const Matrix bt = random_matrix(n, k, rng);
    kern::matmul_nt(a, bt, c1);
    kern::serial::matmul_nt(a, bt, c2);
    CHECK(c1 == c2);

    std::vector<double> s1(m), s2(m);
    kern::col_sums(at, s1);
    kern::serial::col_sums(at, s2);
    CHECK(s1 == s2);

    Matrix o1, o2;
    kern::activation(kern::Activation::Swish, a, o1);
    kern::serial::activation(kern::Activation::Swish, a, o2);
    CHECK(o1 == o2);

    const Matrix g = random_matrix(m, k, rng);
    kern::activation_backward(kern::Activation::Swish, a, g, o1);
    kern::serial::activation_backward(kern::Activation::Swish, a, g, o2);
    CHECK(o1 == o2);

    const Matrix x = random_matrix(m, k, rng);
    const Matrix y = random_matrix(n, k, rng);
    std::vector<double> d1(m), d2(m);
    kern::min_sq_dist(x, y, d1);
    kern::serial::min_sq_dist(x, y, d2);
    CHECK(d1 == d2);
  }
}

TEST_CASE("min_sq_dist matches brute force") {
  Rng rng(7);
  const Matrix x = random_matrix(13, 4, rng);
  const Matrix y = random_matrix(9, 4, rng);
  std::vector<double> got(13);
  kern::min_sq_dist(x, y, got);
  for (int i = 0; i < 13; ++i) {
    double best = 1e300;
    for (int j = 0; j < 9; ++j) {
      double acc = 0.0;
      for (int d = 0; d < 4; ++d) {
        const double diff = x.at(i, d) - y.at(j, d);
        acc += diff * diff;
      }
      best = std::min(best, acc);
    }
    CHECK(got[i] == doctest::Approx(best).epsilon(1e-14));
  }
}

TEST_CASE("activation derivatives match finite differences") {
  const double h = 1e-6;
  for (const auto act :
       {kern::Activation::Swish, kern::Activation::Relu, kern::Activation::Tanh}) {
    Matrix in(1, 7), lo(1, 7), hi(1, 7), out_lo, out_hi, grad, ones(1, 7);
    in.data = {-2.0, -0.5, 0.3, 1.0, 2.5, -1.3, 0.9};
    for (int i = 0; i < 7; ++i) {
      lo.data[i] = in.data[i] - h;
      hi.data[i] = in.data[i] + h;
      ones.data[i] = 1.0;
    }
    kern::activation(act, lo, out_lo);
    kern::activation(act, hi, out_hi);
    kern::activation_backward(act, in, ones, grad);
    for (int i = 0; i < 7; ++i) {
      const double fd = (out_hi.data[i] - out_lo.data[i]) / (2 * h);
      CHECK(grad.data[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}
