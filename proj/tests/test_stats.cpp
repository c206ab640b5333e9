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

#include "mbrl/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "mbrl/rng.hpp"

using namespace mbrl;
using namespace mbrl::stats;

namespace {

// one-pass textbook formula as an independent oracle
double pearson_oracle(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("pearson exact cases") {
  std::vector<double> x = {0, 1, 2, 3};
  std::vector<double> line, anti;
  for (const double v : x) {
    line.push_back(2 * v + 1);
    anti.push_back(-v);
  }
  CHECK(pearson(x, line) == doctest::Approx(1.0));
  CHECK(pearson(x, anti) == doctest::Approx(-1.0));

  const std::vector<double> tri_x = {0, 1, 2}, tri_y = {0, 1, 0};
  CHECK(pearson(tri_x, tri_y) == doctest::Approx(0.0));
}

TEST_CASE("pearson matches the one-pass oracle on 1000 random samples") {
  Rng rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> usize(3, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = usize(rng);
    std::vector<double> x(m), y(m);
    for (int i = 0; i < m; ++i) {
      x[i] = n(rng);
      y[i] = 0.4 * x[i] + n(rng);
    }
    CHECK(pearson(x, y) == doctest::Approx(pearson_oracle(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("pearson is invariant to positive affine maps") {
  Rng rng(22);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(50), y(50), ax(50);
  for (int i = 0; i < 50; ++i) {
    x[i] = n(rng);
    y[i] = n(rng) - 0.3 * x[i];
    ax[i] = 3.7 * x[i] + 11.0;
  }
  CHECK(pearson(ax, y) == doctest::Approx(pearson(x, y)).epsilon(1e-12));
}

TEST_CASE("pearson rejects degenerate input") {
  const std::vector<double> two = {1, 2}, constant = {5, 5, 5}, x = {1, 2, 3};
  CHECK_THROWS_AS(pearson(two, two), std::invalid_argument);
  CHECK_THROWS_WITH_AS(pearson(x, constant), "degenerate sample", std::invalid_argument);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("histogram bins and tails") {
  const std::vector<double> v = {-3.5, -0.45, -0.05, 0.05, 0.45, 2.95, 3.5};
  const auto h = histogram(v, -3.0, 3.0, 0.1);
  CHECK(h.counts.size() == 60);
  CHECK(h.below == 1);
  CHECK(h.above == 1);
  CHECK(h.total == 7);
  CHECK(h.fraction_within(0.0, 0.5) == doctest::Approx(4.0 / 7.0));
}
