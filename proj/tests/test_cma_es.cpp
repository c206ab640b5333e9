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

#include "mbrl/cma_es.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

using namespace mbrl;
using namespace mbrl::es;

namespace {

double sphere(std::span<const double> x) {
  double acc = 0.0;
  for (const double v : x) acc += v * v;
  return acc;
}

// axis-aligned ellipsoid with condition number 1e4, translated off-origin
double ellipsoid(std::span<const double> x) {
  double acc = 0.0;
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    const double d = x[i] - 1.0;
    acc += std::pow(1e4, static_cast<double>(i) / (n - 1)) * d * d;
  }
  return acc;
}

}  // namespace

TEST_CASE("sphere dim 10 reaches 1e-6 within 200 generations (full mode)") {
  CmaConfig cfg;
  cfg.sigma0 = 1.0;
  cfg.max_generations = 200;
  cfg.seed = 1;
  const std::vector<double> x0(10, 2.0);
  const auto result = cma_es_minimize(ObjectiveFn(sphere), x0, cfg);
  CHECK(result.best_fitness < 1e-6);
  CHECK(result.generations <= 200);
}

TEST_CASE("translated ellipsoid dim 20 in diagonal mode") {
  CmaConfig cfg;
  cfg.covariance = CmaConfig::Covariance::Diagonal;
  cfg.sigma0 = 0.5;
  cfg.max_generations = 500;
  cfg.seed = 2;
  const std::vector<double> x0(20, 0.0);
  const auto result = cma_es_minimize(ObjectiveFn(ellipsoid), x0, cfg);
  CHECK(result.best_fitness < 1e-4);
}

TEST_CASE("dim 1: best-so-far bookkeeping is monotone") {
  CmaConfig cfg;
  cfg.sigma0 = 0.7;
  cfg.max_generations = 60;
  cfg.seed = 3;
  const std::vector<double> x0 = {3.0};
  const auto result = cma_es_minimize(ObjectiveFn(sphere), x0, cfg);
  REQUIRE(!result.best_fitness_history.empty());
  for (std::size_t g = 1; g < result.best_fitness_history.size(); ++g)
    CHECK(result.best_fitness_history[g] <= result.best_fitness_history[g - 1]);
  CHECK(result.best_fitness < 1e-8);
}

TEST_CASE("fully non-finite population twice in a row aborts") {
  CmaConfig cfg;
  cfg.sigma0 = 1.0;
  cfg.max_generations = 10;
  const std::vector<double> x0 = {0.0, 0.0};
  CHECK_THROWS_AS(cma_es_minimize(
                      ObjectiveFn([](std::span<const double>) {
                        return std::numeric_limits<double>::quiet_NaN();
                      }),
                      x0, cfg),
                  std::runtime_error);
}

TEST_CASE("generation callback can stop the run") {
  CmaConfig cfg;
  cfg.sigma0 = 1.0;
  cfg.max_generations = 100;
  cfg.seed = 5;
  int calls = 0;
  cfg.on_generation = [&calls](int, const Matrix&, const std::vector<double>&, double) {
    return ++calls < 7;
  };
  const std::vector<double> x0(4, 1.0);
  const auto result = cma_es_minimize(ObjectiveFn(sphere), x0, cfg);
  CHECK(result.generations == 7);
  CHECK(calls == 7);
}

TEST_CASE("batch and scalar objectives agree") {
  CmaConfig cfg;
  cfg.sigma0 = 0.6;
  cfg.max_generations = 30;
  cfg.seed = 8;
  const std::vector<double> x0(5, 1.5);
  const auto a = cma_es_minimize(ObjectiveFn(sphere), x0, cfg);
  const auto b = cma_es_minimize(
      [](const Matrix& pop) {
        std::vector<double> f(pop.rows);
        for (int i = 0; i < pop.rows; ++i) f[i] = sphere(pop.row_span(i));
        return f;
      },
      x0, cfg);
  CHECK(a.best_fitness == b.best_fitness);
  CHECK(a.best_x == b.best_x);
}
