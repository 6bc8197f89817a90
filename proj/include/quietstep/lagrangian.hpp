// Copyright (c) 2026 The QuietStep Authors
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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quietstep/error.hpp"

namespace quietstep {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

/// Generalized advantage estimation over one rollout segment.
///
/// `dones[t]` marks that the episode ended after step t, which cuts both the bootstrap and the
/// advantage recursion. `bootstrap_value` is V of the state following the last step.
inline GaeResult gae(std::span<const double> values, double bootstrap_value,
                     std::span<const double> rewards, std::span<const std::uint8_t> dones,
                     double gamma, double lambda_gae) {
  if (values.size() != rewards.size() || dones.size() != rewards.size()) {
    throw Error(Errc::length_mismatch, "gae: values, rewards and dones must have equal length");
  }
  const std::size_t n = rewards.size();
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = (t + 1 == n) ? bootstrap_value : values[t + 1];
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    running = delta + gamma * lambda_gae * live * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

/// Lagrangian-combined advantage: (A_r - lambda * A_c) / (1 + lambda).
inline double combined_advantage(double a_r, double a_c, double lambda) {
  if (!(lambda >= 0.0)) {
    throw Error(Errc::negative_lambda, "Lagrange multiplier must be non-negative");
  }
  return (a_r - lambda * a_c) / (1.0 + lambda);
}

/// Shifts to zero mean and scales to unit standard deviation (population), in place.
inline void normalize_advantages(std::span<double> a) {
  if (a.empty()) return;
  double mean = 0.0;
  for (double x : a) mean += x;
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double inv_std = 1.0 / (std::sqrt(var / static_cast<double>(a.size())) + 1e-8);
  for (double& x : a) x = (x - mean) * inv_std;
}

struct PidGains {
  double kp = 0.5;
  double ki = 0.05;
  double kd = 0.1;

  bool operator==(const PidGains&) const = default;
};

/// PID-controlled multiplier for one constraint level.
struct LagrangeState {
  double lambda = 0.0;
  double integral = 0.0;
  double prev_error = 0.0;
  PidGains gains;
  double integral_max = 100.0;
};

/// One PID step on the constraint error e = measured_cost - eps. The multiplier is projected
/// onto lambda >= 0 and the integral is clamped to [0, integral_max].
inline LagrangeState update_lagrange(const LagrangeState& state, double measured_cost, double eps) {
  if (!std::isfinite(measured_cost)) {
    throw Error(Errc::non_finite, "measured cost is not finite");
  }
  LagrangeState next = state;
  const double e = measured_cost - eps;
  next.integral = std::clamp(state.integral + e, 0.0, state.integral_max);
  const double derivative = e - state.prev_error;
  next.lambda = std::max(0.0, state.gains.kp * e + state.gains.ki * next.integral +
                                  state.gains.kd * derivative);
  next.prev_error = e;
  return next;
}

/// Logistic weight 1 / (1 + exp(k (t - t0))): 1 early, 0.5 at t0, 0 late.
inline double reward_weight_schedule(double t, double t0, double k) {
  return 1.0 / (1.0 + std::exp(k * (t - t0)));
}

/// Per-sample clipped objective min(eta A, clip(eta, 1-c, 1+c) A).
inline double clipped_objective(double ratio, double advantage, double eps_clip) {
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  return std::min(ratio * advantage, clipped * advantage);
}

/// d/d(ratio) of clipped_objective: A where the unclipped branch is active, 0 otherwise.
inline double clipped_objective_slope(double ratio, double advantage, double eps_clip) {
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

}  // namespace quietstep
