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

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace mbrl::env {

// State of the swing-up cartpole. theta is measured from upright (theta = 0
// is the pole pointing up, theta = pi hanging down) and is kept wrapped to
// (-pi, pi] by step() and reset().
struct CartpoleState {
  double x = 0.0;          // cart position (m)
  double x_dot = 0.0;      // cart velocity (m/s)
  double theta = 0.0;      // pole angle from upright (rad)
  double theta_dot = 0.0;  // pole angular velocity (rad/s)

  std::array<double, 4> as_array() const { return {x, x_dot, theta, theta_dot}; }
  static CartpoleState from_array(const std::array<double, 4>& v) {
    return {v[0], v[1], v[2], v[3]};
  }
  bool finite() const;
};

struct CartpoleParams {
  double cart_mass = 1.0;    // kg
  double pole_mass = 0.1;    // kg
  double pole_length = 0.3;  // half-length, m (pole tip sits at 2 * pole_length)
  double gravity = 9.81;     // m/s^2
  double force_scale = 10.0; // N per unit action
  double dt = 0.05;          // control period, s
  int substeps = 4;          // RK4 sub-intervals per control period
  double x_goal = 0.0;       // target cart position (m)
  double reward_lengthscale = 0.6;  // m
  double action_penalty = 0.01;
  double reset_noise_std = 0.01;

  void validate() const;  // throws std::invalid_argument on bad values
};

struct EpisodeResult {
  std::vector<CartpoleState> states;  // horizon + 1 entries
  std::vector<double> actions;        // horizon entries, clamped to [-1, 1]
  std::vector<double> rewards;        // horizon entries
  double total_reward = 0.0;
};

// Maps any angle to (-pi, pi].
double wrap_angle(double theta);

// Time derivative of [x, x_dot, theta, theta_dot] under applied force (N).
std::array<double, 4> dynamics_deriv(const std::array<double, 4>& s, double force,
                                     const CartpoleParams& p);

// Advances one control period of p.dt via RK4 over p.substeps sub-intervals.
// The action is clamped to [-1, 1] and scaled by p.force_scale.
// Throws std::invalid_argument if the input state is non-finite.
CartpoleState step(const CartpoleState& state, double action, const CartpoleParams& p);

// exp(-d^2 / lengthscale^2) - action_penalty * a^2, with d the distance from
// the pole tip (x + L sin theta, L cos theta), L = 2 * pole_length, to the
// upright target tip (x_goal, L).
double reward(const CartpoleState& state, double action, const CartpoleParams& p);

// Pole hanging down: theta = pi + noise, the rest ~ N(0, reset_noise_std^2).
CartpoleState reset(std::uint64_t seed, const CartpoleParams& p);

using Policy = std::function<double(const CartpoleState&)>;

// Resets with the given seed, then applies the policy for `horizon` steps.
// Throws std::runtime_error naming the step if the policy returns a
// non-finite action; finite actions are clamped to [-1, 1].
EpisodeResult rollout(const Policy& policy, int horizon, std::uint64_t seed,
                      const CartpoleParams& p);

// As rollout(), but from an explicit initial state (used by babbling
// generation, which pins the start state instead of sampling reset noise).
EpisodeResult rollout_from(const CartpoleState& start, const Policy& policy, int horizon,
                           const CartpoleParams& p);

// Total mechanical energy (kinetic + pole potential); conserved when the
// action is zero, used by the integrator drift test.
double mechanical_energy(const CartpoleState& state, const CartpoleParams& p);

}  // namespace mbrl::env
