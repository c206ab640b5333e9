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
#include <functional>
#include <span>
#include <vector>

#include "mbrl/matrix.hpp"

namespace mbrl::es {

struct CmaConfig {
  int population = 0;  // lambda; 0 resolves to 4 + floor(3 ln n)
  int parents = 0;     // mu; 0 resolves to population / 2
  double sigma0 = 0.5;
  int max_generations = 300;
  std::uint64_t seed = 0;
  enum class Covariance { Full, Diagonal };
  Covariance covariance = Covariance::Full;
  double sigma_stop = 1e-12;

  // Called after every generation with the evaluated population (row per
  // member), its fitness values and the current step size; returning false
  // stops the run.
  std::function<bool(int generation, const Matrix& population,
                     const std::vector<double>& fitness, double sigma)>
      on_generation;
};

struct CmaResult {
  std::vector<double> best_x;
  double best_fitness = 0.0;
  std::vector<double> best_fitness_history;  // best-so-far, non-increasing
  std::vector<double> sigma_history;
  int generations = 0;
};

using ObjectiveFn = std::function<double(std::span<const double>)>;
// Evaluates all rows of the population at once; lets callers parallelize
// member evaluations.
using BatchObjectiveFn = std::function<std::vector<double>(const Matrix& population)>;

// (mu/mu_w, lambda)-CMA-ES minimization: weighted recombination, cumulative
// step-size adaptation, rank-one plus rank-mu covariance update (Full) or the
// separable variance-only variant (Diagonal). Stops at max_generations or
// when sigma collapses below sigma_stop. Throws when the whole population
// evaluates non-finite twice in a row.
CmaResult cma_es_minimize(const BatchObjectiveFn& objective, std::span<const double> x0,
                          const CmaConfig& cfg);
CmaResult cma_es_minimize(const ObjectiveFn& objective, std::span<const double> x0,
                          const CmaConfig& cfg);

}  // namespace mbrl::es
