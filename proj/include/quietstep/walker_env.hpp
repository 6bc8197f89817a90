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
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quietstep/error.hpp"
#include "quietstep/noise_cost.hpp"

namespace quietstep {

// 1-D point-mass walker with cyclic stance feet. Thrust drives the body, impact vigor sets
// traction, and both show up in the contact snapshot that feeds the noise cost.

struct EnvParams {
  double dt = 0.02;           // s (50 Hz)
  double c1 = 8.0;            // m/s^2 per unit thrust
  double c2 = 2.0;            // 1/s
  double v0 = 0.5;            // m/s, traction softness
  double u_max = 1.0;
  double vimp_max = 2.0;      // m/s
  double F_base = 30.0;       // N
  double c3 = 70.0;           // N per unit thrust
  int episode_len = 200;
  double v_target_min = 0.5;  // m/s
  double v_target_max = 2.25; // m/s
  double sigma_track = 0.25;  // m^2/s^2
  /// Feet striking per step, starting at the stance foot: 1 (rotating single foot), 2 or 4.
  int strike_feet = 4;

  void validate() const {
    auto bad = [](const char* field) {
      throw Error(Errc::invalid_params, std::string("env parameter out of range: ") + field);
    };
    if (!(dt > 0)) bad("dt");
    if (!(c1 > 0)) bad("c1");
    if (!(c2 > 0)) bad("c2");
    if (!(v0 > 0)) bad("v0");
    if (!(u_max > 0)) bad("u_max");
    if (!(vimp_max > 0)) bad("vimp_max");
    if (!(F_base > 0)) bad("F_base");
    if (!(c3 > 0)) bad("c3");
    if (episode_len <= 0) bad("episode_len");
    if (!(sigma_track > 0)) bad("sigma_track");
    if (!(v_target_min >= 0.0 && v_target_max <= 5.0 && v_target_min <= v_target_max))
      bad("v_target_range");
    if (strike_feet != 1 && strike_feet != 2 && strike_feet != 4) bad("strike_feet");
  }

  bool operator==(const EnvParams&) const = default;
};

struct EnvState {
  double v = 0.0;
  double v_target = 0.0;
  int phase = 0;
  int t = 0;

  bool operator==(const EnvState&) const = default;
};

inline constexpr std::size_t kObsDim = 6;
inline constexpr std::size_t kActDim = 2;

struct Observation {
  double v = 0.0;
  double v_target = 0.0;
  std::array<double, kNumFeet> phase_one_hot{};

  std::array<double, kObsDim> to_array() const {
    return {v, v_target, phase_one_hot[0], phase_one_hot[1], phase_one_hot[2], phase_one_hot[3]};
  }

  bool operator==(const Observation&) const = default;
};

struct Action {
  double u = 0.0;  // thrust command
  double w = 0.0;  // impact-vigor command

  Action clamped() const { return {std::clamp(u, -1.0, 1.0), std::clamp(w, -1.0, 1.0)}; }

  bool operator==(const Action&) const = default;
};

struct Transition {
  Observation obs;
  Action action;
  double reward = 0.0;
  double cost = 0.0;
  Observation next_obs;
  bool done = false;
  ContactSnapshot contact;

  bool operator==(const Transition&) const = default;
};

inline Observation observe(const EnvState& s) {
  Observation o;
  o.v = s.v;
  o.v_target = s.v_target;
  o.phase_one_hot[static_cast<std::size_t>(s.phase)] = 1.0;
  return o;
}

inline EnvState reset(std::uint64_t seed, const EnvParams& params) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(params.v_target_min, params.v_target_max);
  EnvState s;
  s.v_target = dist(rng);
  return s;
}

/// Steady-state speed for a held (thrust, vigor) pair in physical units.
inline double steady_state_velocity(double thrust, double vigor, const EnvParams& p) {
  const double traction = vigor / (vigor + p.v0);
  return p.c1 * thrust * traction / p.c2;
}

struct StepResult {
  EnvState state;
  Transition transition;
};

inline StepResult step(const EnvState& state, const Action& action, const EnvParams& params,
                       const CostParams& cost_params = {}) {
  if (state.t >= params.episode_len) {
    throw Error(Errc::episode_finished, "step called after the episode finished");
  }
  const Action a = action.clamped();
  const double thrust = params.u_max * (a.u + 1.0) / 2.0;
  const double vigor = params.vimp_max * (a.w + 1.0) / 2.0;
  const double traction = vigor / (vigor + params.v0);

  EnvState next = state;
  next.v = state.v + params.dt * (params.c1 * thrust * traction - params.c2 * state.v);
  next.phase = (state.phase + 1) % static_cast<int>(kNumFeet);
  next.t = state.t + 1;

  Transition tr;
  tr.obs = observe(state);
  tr.action = a;
  for (int j = 0; j < params.strike_feet; ++j) {
    const auto foot = static_cast<std::size_t>((state.phase + j) % static_cast<int>(kNumFeet));
    tr.contact.forces[foot] = params.F_base + params.c3 * thrust;
    tr.contact.impact_velocities[foot] = vigor;
  }
  const double err = next.v - state.v_target;
  tr.reward = std::exp(-err * err / params.sigma_track);
  tr.cost = normalized_cost(tr.contact, cost_params);
  tr.next_obs = observe(next);
  tr.done = next.t == params.episode_len;
  return {next, tr};
}

/// Steps every (state, action) pair independently; element i equals step(states[i], actions[i]).
inline std::vector<StepResult> batch_step(std::span<const EnvState> states,
                                          std::span<const Action> actions,
                                          const EnvParams& params,
                                          const CostParams& cost_params = {}) {
  if (states.size() != actions.size()) {
    throw Error(Errc::length_mismatch, "batch_step: " + std::to_string(states.size()) +
                                           " states vs " + std::to_string(actions.size()) +
                                           " actions");
  }
  std::vector<StepResult> out;
  out.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out.push_back(step(states[i], actions[i], params, cost_params));
  }
  return out;
}

}  // namespace quietstep
