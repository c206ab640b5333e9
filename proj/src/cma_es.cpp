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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mbrl/rng.hpp"

namespace mbrl::es {

namespace {

// Jacobi eigendecomposition of a symmetric matrix; eigenvectors in columns.
void symmetric_eigen(const Matrix& c, Matrix& vectors, std::vector<double>& values) {
  const int n = c.rows;
  Matrix a = c;
  vectors.resize(n, n);
  for (int i = 0; i < n; ++i) vectors.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double app = a.at(p, p);
        const double aqq = a.at(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double cth = 1.0 / std::sqrt(1.0 + t * t);
        const double sth = t * cth;
        for (int k = 0; k < n; ++k) {
          const double akp = a.at(k, p);
          const double akq = a.at(k, q);
          a.at(k, p) = cth * akp - sth * akq;
          a.at(k, q) = sth * akp + cth * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a.at(p, k);
          const double aqk = a.at(q, k);
          a.at(p, k) = cth * apk - sth * aqk;
          a.at(q, k) = sth * apk + cth * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = vectors.at(k, p);
          const double vkq = vectors.at(k, q);
          vectors.at(k, p) = cth * vkp - sth * vkq;
          vectors.at(k, q) = sth * vkp + cth * vkq;
        }
      }
    }
  }
  values.resize(n);
  for (int i = 0; i < n; ++i) values[i] = a.at(i, i);
}

}  // namespace

CmaResult cma_es_minimize(const BatchObjectiveFn& objective, std::span<const double> x0,
                          const CmaConfig& cfg) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw std::invalid_argument("cma-es needs dim >= 1");
  if (!(cfg.sigma0 > 0.0)) throw std::invalid_argument("cma-es sigma0 must be > 0");

  const int lambda =
      cfg.population > 0 ? cfg.population : 4 + static_cast<int>(3.0 * std::log(n));
  int mu = cfg.parents > 0 ? cfg.parents : lambda / 2;
  mu = std::clamp(mu, 1, lambda);

  std::vector<double> weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  const double w_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= w_sum;
  double mu_eff = 0.0;
  for (const double w : weights) mu_eff += w * w;
  mu_eff = 1.0 / mu_eff;

  const bool diagonal = cfg.covariance == CmaConfig::Covariance::Diagonal;
  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                        ((n + 2.0) * (n + 2.0) + mu_eff));
  if (diagonal) {
    // separable variant learns n variances instead of n^2 covariances
    const double scale = (n + 2.0) / 3.0;
    c_1 = std::min(1.0, c_1 * scale);
    c_mu = std::min(1.0 - c_1, c_mu * scale);
  }
  const double chi_n = std::sqrt(static_cast<double>(n)) *
                       (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  std::vector<double> m(x0.begin(), x0.end());
  double sigma = cfg.sigma0;
  std::vector<double> p_sigma(n, 0.0), p_c(n, 0.0);
  Matrix cov;                // full mode
  std::vector<double> diag;  // diagonal mode
  if (diagonal) {
    diag.assign(n, 1.0);
  } else {
    cov.resize(n, n);
    for (int i = 0; i < n; ++i) cov.at(i, i) = 1.0;
  }
  Matrix eigvec;
  std::vector<double> eigval(n, 1.0);

  Rng rng(derive_seed(cfg.seed, 0xc3a));
  std::normal_distribution<double> gauss(0.0, 1.0);

  CmaResult result;
  result.best_x = m;
  result.best_fitness = std::numeric_limits<double>::infinity();

  Matrix z(lambda, n), y(lambda, n), population(lambda, n);
  int consecutive_bad = 0;

  for (int gen = 0; gen < cfg.max_generations; ++gen) {
    if (!diagonal) {
      symmetric_eigen(cov, eigvec, eigval);
      for (double& v : eigval) v = std::sqrt(std::max(v, 1e-30));
    }

    for (int i = 0; i < lambda; ++i) {
      double* zi = z.row(i);
      for (int d = 0; d < n; ++d) zi[d] = gauss(rng);
      double* yi = y.row(i);
      if (diagonal) {
        for (int d = 0; d < n; ++d) yi[d] = std::sqrt(diag[d]) * zi[d];
      } else {
        for (int d = 0; d < n; ++d) {
          double acc = 0.0;
          for (int k = 0; k < n; ++k) acc += eigvec.at(d, k) * eigval[k] * zi[k];
          yi[d] = acc;
        }
      }
      double* xi = population.row(i);
      for (int d = 0; d < n; ++d) xi[d] = m[d] + sigma * yi[d];
    }

    std::vector<double> fitness = objective(population);
    if (static_cast<int>(fitness.size()) != lambda)
      throw std::runtime_error("cma-es objective returned wrong fitness count");

    bool any_finite = false;
    for (double& f : fitness) {
      if (std::isfinite(f))
        any_finite = true;
      else
        f = std::numeric_limits<double>::infinity();
    }
    if (!any_finite) {
      if (++consecutive_bad >= 2)
        throw std::runtime_error(
            "cma-es aborted: whole population non-finite twice in a row");
    } else {
      consecutive_bad = 0;
    }

    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (fitness[a] != fitness[b]) return fitness[a] < fitness[b];
      return a < b;
    });

    if (fitness[order[0]] < result.best_fitness) {
      result.best_fitness = fitness[order[0]];
      result.best_x.assign(population.row(order[0]), population.row(order[0]) + n);
    }
    result.best_fitness_history.push_back(result.best_fitness);
    result.sigma_history.push_back(sigma);
    result.generations = gen + 1;

    if (any_finite) {
      std::vector<double> y_w(n, 0.0);
      for (int i = 0; i < mu; ++i) {
        const double* yi = y.row(order[i]);
        for (int d = 0; d < n; ++d) y_w[d] += weights[i] * yi[d];
      }
      for (int d = 0; d < n; ++d) m[d] += sigma * y_w[d];

      // C^{-1/2} y_w for the step-size path
      std::vector<double> c_inv_y(n, 0.0);
      if (diagonal) {
        for (int d = 0; d < n; ++d) c_inv_y[d] = y_w[d] / std::sqrt(diag[d]);
      } else {
        for (int k = 0; k < n; ++k) {
          double proj = 0.0;
          for (int d = 0; d < n; ++d) proj += eigvec.at(d, k) * y_w[d];
          proj /= eigval[k];
          for (int d = 0; d < n; ++d) c_inv_y[d] += eigvec.at(d, k) * proj;
        }
      }
      const double norm_factor = std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff);
      double ps_norm2 = 0.0;
      for (int d = 0; d < n; ++d) {
        p_sigma[d] = (1.0 - c_sigma) * p_sigma[d] + norm_factor * c_inv_y[d];
        ps_norm2 += p_sigma[d] * p_sigma[d];
      }
      const double ps_norm = std::sqrt(ps_norm2);
      sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

      const double hsig_denom =
          std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1)));
      const bool hsig = ps_norm / hsig_denom / chi_n < 1.4 + 2.0 / (n + 1.0);
      const double pc_factor = hsig ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0;
      for (int d = 0; d < n; ++d)
        p_c[d] = (1.0 - c_c) * p_c[d] + pc_factor * y_w[d];

      const double c1a = c_1 * (1.0 - (hsig ? 0.0 : 1.0) * c_c * (2.0 - c_c));
      if (diagonal) {
        for (int d = 0; d < n; ++d) {
          double rank_mu = 0.0;
          for (int i = 0; i < mu; ++i) {
            const double yd = y.at(order[i], d);
            rank_mu += weights[i] * yd * yd;
          }
          diag[d] = (1.0 - c1a - c_mu) * diag[d] + c_1 * p_c[d] * p_c[d] + c_mu * rank_mu;
          diag[d] = std::max(diag[d], 1e-30);
        }
      } else {
        for (int r = 0; r < n; ++r) {
          for (int col = 0; col < n; ++col) {
            double rank_mu = 0.0;
            for (int i = 0; i < mu; ++i)
              rank_mu += weights[i] * y.at(order[i], r) * y.at(order[i], col);
            cov.at(r, col) = (1.0 - c1a - c_mu) * cov.at(r, col) +
                             c_1 * p_c[r] * p_c[col] + c_mu * rank_mu;
          }
        }
        // keep exact symmetry against rounding drift
        for (int r = 0; r < n; ++r)
          for (int col = r + 1; col < n; ++col) {
            const double avg = 0.5 * (cov.at(r, col) + cov.at(col, r));
            cov.at(r, col) = avg;
            cov.at(col, r) = avg;
          }
      }
    }

    if (cfg.on_generation && !cfg.on_generation(gen, population, fitness, sigma)) break;
    if (sigma < cfg.sigma_stop) break;
  }
  return result;
}

CmaResult cma_es_minimize(const ObjectiveFn& objective, std::span<const double> x0,
                          const CmaConfig& cfg) {
  return cma_es_minimize(
      [&objective](const Matrix& population) {
        std::vector<double> fitness(population.rows);
        for (int i = 0; i < population.rows; ++i)
          fitness[i] = objective(population.row_span(i));
        return fitness;
      },
      x0, cfg);
}

}  // namespace mbrl::es
