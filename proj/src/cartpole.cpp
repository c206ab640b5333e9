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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mbrl/rng.hpp"

namespace mbrl::env {

namespace {
constexpr double kPi = std::numbers::pi;
}

bool CartpoleState::finite() const {
  return std::isfinite(x) && std::isfinite(x_dot) && std::isfinite(theta) &&
         std::isfinite(theta_dot);
}

void CartpoleParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("cartpole param must be > 0: ") + name);
  };
  positive(cart_mass, "cart_mass");
  positive(pole_mass, "pole_mass");
  positive(pole_length, "pole_length");
  positive(dt, "dt");
  positive(reward_lengthscale, "reward_lengthscale");
  if (substeps < 1) throw std::invalid_argument("cartpole param must be > 0: substeps");
}

double wrap_angle(double theta) {
  theta = std::fmod(theta + kPi, 2.0 * kPi);
  if (theta <= 0.0) theta += 2.0 * kPi;
  return theta - kPi;
}

std::array<double, 4> dynamics_deriv(const std::array<double, 4>& s, double force,
                                     const CartpoleParams& p) {
  const double theta = s[2];
  const double theta_dot = s[3];
  const double sin_t = std::sin(theta);
  const double cos_t = std::cos(theta);
  const double total_mass = p.cart_mass + p.pole_mass;
  const double l = p.pole_length;

  // Frictionless cart-pole (pole = uniform rod of half-length l, pivot at the
  // cart), theta measured from upright.
  const double temp = (force + p.pole_mass * l * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc = (p.gravity * sin_t - cos_t * temp) /
                           (l * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - p.pole_mass * l * theta_acc * cos_t / total_mass;

  return {s[1], x_acc, theta_dot, theta_acc};
}

CartpoleState step(const CartpoleState& state, double action, const CartpoleParams& p) {
  if (!state.finite()) throw std::invalid_argument("invalid state");
  const double a = std::clamp(action, -1.0, 1.0);
  const double force = a * p.force_scale;
  const double h = p.dt / p.substeps;

  std::array<double, 4> s = state.as_array();
  for (int k = 0; k < p.substeps; ++k) {
    const auto k1 = dynamics_deriv(s, force, p);
    std::array<double, 4> s2;
    for (int i = 0; i < 4; ++i) s2[i] = s[i] + 0.5 * h * k1[i];
    const auto k2 = dynamics_deriv(s2, force, p);
    std::array<double, 4> s3;
    for (int i = 0; i < 4; ++i) s3[i] = s[i] + 0.5 * h * k2[i];
    const auto k3 = dynamics_deriv(s3, force, p);
    std::array<double, 4> s4;
    for (int i = 0; i < 4; ++i) s4[i] = s[i] + h * k3[i];
    const auto k4 = dynamics_deriv(s4, force, p);
    for (int i = 0; i < 4; ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }

  CartpoleState out = CartpoleState::from_array(s);
  out.theta = wrap_angle(out.theta);
  return out;
}

double reward(const CartpoleState& state, double action, const CartpoleParams& p) {
  const double len = 2.0 * p.pole_length;
  const double tip_x = state.x + len * std::sin(state.theta);
  const double tip_y = len * std::cos(state.theta);
  const double dx = tip_x - p.x_goal;
  const double dy = tip_y - len;
  const double d2 = dx * dx + dy * dy;
  const double ls2 = p.reward_lengthscale * p.reward_lengthscale;
  return std::exp(-d2 / ls2) - p.action_penalty * action * action;
}

CartpoleState reset(std::uint64_t seed, const CartpoleParams& p) {
  Rng rng(derive_seed(seed, 0xc0ffee));
  std::normal_distribution<double> noise(0.0, p.reset_noise_std);
  CartpoleState s;
  if (p.reset_noise_std > 0.0) {
    s.x = noise(rng);
    s.x_dot = noise(rng);
    s.theta = kPi + noise(rng);
    s.theta_dot = noise(rng);
  } else {
    s.theta = kPi;
  }
  s.theta = wrap_angle(s.theta);
  return s;
}

EpisodeResult rollout_from(const CartpoleState& start, const Policy& policy, int horizon,
                           const CartpoleParams& p) {
  if (horizon < 1) throw std::invalid_argument("rollout horizon must be >= 1");
  EpisodeResult ep;
  ep.states.reserve(horizon + 1);
  ep.actions.reserve(horizon);
  ep.rewards.reserve(horizon);
  ep.states.push_back(start);
  for (int t = 0; t < horizon; ++t) {
    double a = policy(ep.states.back());
    if (!std::isfinite(a))
      throw std::runtime_error("policy returned non-finite action at step " + std::to_string(t));
    a = std::clamp(a, -1.0, 1.0);
    const double r = reward(ep.states.back(), a, p);
    ep.states.push_back(step(ep.states.back(), a, p));
    ep.actions.push_back(a);
    ep.rewards.push_back(r);
    ep.total_reward += r;
  }
  return ep;
}

EpisodeResult rollout(const Policy& policy, int horizon, std::uint64_t seed,
                      const CartpoleParams& p) {
  return rollout_from(reset(seed, p), policy, horizon, p);
}

double mechanical_energy(const CartpoleState& state, const CartpoleParams& p) {
  const double l = p.pole_length;
  const double cos_t = std::cos(state.theta);
  // centre-of-mass velocity: (x_dot + l theta_dot cos, -l theta_dot sin)
  const double v2 = state.x_dot * state.x_dot +
                    2.0 * l * state.theta_dot * state.x_dot * cos_t +
                    l * l * state.theta_dot * state.theta_dot;
  const double inertia_com = p.pole_mass * (2.0 * l) * (2.0 * l) / 12.0;
  const double kinetic = 0.5 * p.cart_mass * state.x_dot * state.x_dot +
                         0.5 * p.pole_mass * v2 +
                         0.5 * inertia_com * state.theta_dot * state.theta_dot;
  const double potential = p.pole_mass * p.gravity * l * cos_t;
  return kinetic + potential;
}

}  // namespace mbrl::env
