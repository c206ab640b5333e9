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

#include "mbrl/cartpole.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numbers>
#include <random>

#include "mbrl/rng.hpp"

using namespace mbrl;
using namespace mbrl::env;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent fine-step explicit-Euler integration of the same ODE.
CartpoleState euler_oracle(const CartpoleState& s0, double action, const CartpoleParams& p,
                           int n_steps) {
  const double force = action * p.force_scale;
  const double h = p.dt / n_steps;
  std::array<double, 4> s = s0.as_array();
  for (int k = 0; k < n_steps; ++k) {
    const auto d = dynamics_deriv(s, force, p);
    for (int i = 0; i < 4; ++i) s[i] += h * d[i];
  }
  CartpoleState out = CartpoleState::from_array(s);
  out.theta = wrap_angle(out.theta);
  return out;
}

}  // namespace

TEST_CASE("equilibria are fixed points") {
  const CartpoleParams p;
  const CartpoleState upright{0, 0, 0, 0};
  const CartpoleState up_next = step(upright, 0.0, p);
  CHECK(up_next.x == doctest::Approx(0.0));
  CHECK(up_next.theta == doctest::Approx(0.0));

  const CartpoleState hanging{0, 0, kPi, 0};
  const CartpoleState down_next = step(hanging, 0.0, p);
  CHECK(down_next.x == doctest::Approx(0.0));
  CHECK(std::abs(down_next.theta) == doctest::Approx(kPi));
  CHECK(down_next.theta_dot == doctest::Approx(0.0));
}

TEST_CASE("step agrees with a fine-step Euler oracle") {
  const CartpoleParams p;
  const CartpoleState s0{0, 0, 0.1, 0};
  const CartpoleState rk4 = step(s0, 0.0, p);
  const CartpoleState fine = euler_oracle(s0, 0.0, p, 200000);
  CHECK(rk4.theta > s0.theta);  // unstable upright: perturbation grows
  CHECK(rk4.x == doctest::Approx(fine.x).epsilon(1e-6));
  CHECK(rk4.x_dot == doctest::Approx(fine.x_dot).epsilon(1e-6));
  CHECK(rk4.theta == doctest::Approx(fine.theta).epsilon(1e-6));
  CHECK(rk4.theta_dot == doctest::Approx(fine.theta_dot).epsilon(1e-6));
}

TEST_CASE("step is deterministic and rejects non-finite states") {
  const CartpoleParams p;
  const CartpoleState s{0.3, -1.2, 2.0, 0.4};
  const CartpoleState a = step(s, 0.7, p);
  const CartpoleState b = step(s, 0.7, p);
  CHECK(a.x == b.x);
  CHECK(a.x_dot == b.x_dot);
  CHECK(a.theta == b.theta);
  CHECK(a.theta_dot == b.theta_dot);

  CartpoleState bad = s;
  bad.x_dot = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(step(bad, 0.0, p), "invalid state", std::invalid_argument);
}

TEST_CASE("reward values") {
  CartpoleParams p;
  const CartpoleState upright{0, 0, 0, 0};
  CHECK(reward(upright, 0.0, p) == doctest::Approx(1.0));
  CHECK(reward(upright, 1.0, p) == doctest::Approx(0.99));

  const CartpoleState hanging{0, 0, kPi, 0};
  CHECK(reward(hanging, 0.0, p) == doctest::Approx(std::exp(-4.0)));
}

TEST_CASE("reward stays in (-penalty, 1]") {
  const CartpoleParams p;
  Rng rng(3);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  std::uniform_real_distribution<double> ua(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const CartpoleState s{u(rng), u(rng), wrap_angle(u(rng)), u(rng)};
    const double a = ua(rng);
    const double r = reward(s, a, p);
    CHECK(r > -p.action_penalty - 1e-15);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("reset is seeded and respects the noise scale") {
  CartpoleParams p;
  const CartpoleState a = reset(123, p);
  const CartpoleState b = reset(123, p);
  CHECK(a.x == b.x);
  CHECK(a.theta == b.theta);

  p.reset_noise_std = 0.0;
  const CartpoleState exact = reset(5, p);
  CHECK(exact.x == 0.0);
  CHECK(exact.x_dot == 0.0);
  CHECK(exact.theta == kPi);
  CHECK(exact.theta_dot == 0.0);

  p.reset_noise_std = 0.01;
  double sum = 0.0, sumsq = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    // measure deviation from pi on the circle
    const double dev = wrap_angle(reset(1000 + i, p).theta - kPi);
    sum += dev;
    sumsq += dev * dev;
  }
  const double var = (sumsq - sum * sum / n) / (n - 1);
  const double sd = std::sqrt(var);
  CHECK(sd > 0.008);
  CHECK(sd < 0.012);
}

TEST_CASE("rollout bookkeeping and hanging baseline") {
  const CartpoleParams p;
  const auto ep = rollout([](const CartpoleState&) { return 0.0; }, 200, 9, p);
  CHECK(ep.states.size() == 201);
  CHECK(ep.actions.size() == 200);
  CHECK(ep.rewards.size() == 200);

  double total = 0.0;
  for (std::size_t k = 0; k < ep.rewards.size(); ++k) {
    CHECK(ep.rewards[k] == reward(ep.states[k], ep.actions[k], p));
    total += ep.rewards[k];
  }
  CHECK(ep.total_reward == total);
  // hanging equilibrium with tiny reset noise stays near exp(-4) per step
  CHECK(ep.total_reward == doctest::Approx(200 * std::exp(-4.0)).epsilon(0.05));

  const auto one = rollout([](const CartpoleState&) { return 0.0; }, 1, 9, p);
  CHECK(one.rewards.size() == 1);
}

TEST_CASE("rollout reports the step of a non-finite action") {
  const CartpoleParams p;
  int count = 0;
  CHECK_THROWS_WITH_AS(rollout(
                           [&count](const CartpoleState&) {
                             return count++ < 3 ? 0.0
                                                : std::numeric_limits<double>::quiet_NaN();
                           },
                           10, 0, p),
                       "policy returned non-finite action at step 3", std::runtime_error);
}

TEST_CASE("energy drift under RK4 is below 0.1% over 200 steps") {
  const CartpoleParams p;
  Rng rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    CartpoleState s{u(rng), u(rng), wrap_angle(3.0 * u(rng)), u(rng)};
    const double e0 = mechanical_energy(s, p);
    // reference scale: worst-case mechanical energy swing of the pole
    const double scale = std::max(std::abs(e0), 2.0 * p.pole_mass * p.gravity * p.pole_length);
    for (int k = 0; k < 200; ++k) s = step(s, 0.0, p);
    const double e1 = mechanical_energy(s, p);
    CHECK(std::abs(e1 - e0) / scale < 1e-3);
  }
}

TEST_CASE("theta stays wrapped near the boundary") {
  const CartpoleParams p;
  for (const double eps : {1e-6, 1e-3, 0.05}) {
    for (const double theta0 : {kPi - eps, -kPi + eps}) {
      CartpoleState s{0, 0, theta0, 2.0};
      for (int k = 0; k < 50; ++k) {
        s = step(s, 0.3, p);
        CHECK(s.theta <= kPi);
        CHECK(s.theta > -kPi);
      }
    }
  }
}

TEST_CASE("wrap_angle maps onto (-pi, pi]") {
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(7 * kPi) == doctest::Approx(kPi));
}
