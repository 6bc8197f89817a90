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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quietstep/agent.hpp"
#include "quietstep/walker_env.hpp"

namespace quietstep {

/// One evaluation cell: a deterministic rollout at a fixed (eps, v_target, seed).
struct EvalRecord {
  std::string method;
  double epsilon = 0.0;
  double v_target = 0.0;
  std::uint64_t seed = 0;
  double mean_cost = 0.0;       // mean per-step normalized cost
  double tracking_error = 0.0;  // mean |v - v_target| over the episode, m/s
  std::uint64_t train_seed = 0;

  bool operator==(const EvalRecord&) const = default;
};

struct Rollout {
  std::vector<double> velocities;  // realized v after each step
  std::vector<double> costs;
  double v_target = 0.0;
};

/// Runs one full episode with the agent's mean action, commanding `v_target`.
template <typename Scalar>
Rollout deterministic_rollout(const Agent<Scalar>& agent, const EnvParams& env,
                              const CostParams& cost, double eps, double v_target,
                              std::uint64_t seed) {
  EnvState s = reset(seed, env);
  s.v_target = v_target;
  Rollout r;
  r.v_target = v_target;
  r.velocities.reserve(static_cast<std::size_t>(env.episode_len));
  r.costs.reserve(static_cast<std::size_t>(env.episode_len));
  for (int t = 0; t < env.episode_len; ++t) {
    const auto a = agent.act_mean(observe(s), eps);
    const auto res = step(s, a, env, cost);
    r.velocities.push_back(res.state.v);
    r.costs.push_back(res.transition.cost);
    s = res.state;
  }
  return r;
}

template <typename Scalar>
EvalRecord evaluate_cell(const Agent<Scalar>& agent, const EnvParams& env, const CostParams& cost,
                         double eps, double v_target, std::uint64_t seed,
                         const std::string& method = {}) {
  const auto r = deterministic_rollout(agent, env, cost, eps, v_target, seed);
  EvalRecord rec{method, eps, v_target, seed, 0.0, 0.0};
  for (std::size_t t = 0; t < r.costs.size(); ++t) {
    rec.mean_cost += r.costs[t];
    rec.tracking_error += std::abs(r.velocities[t] - v_target);
  }
  rec.mean_cost /= static_cast<double>(r.costs.size());
  rec.tracking_error /= static_cast<double>(r.costs.size());
  return rec;
}

struct EvalGrid {
  std::vector<double> epsilons{0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> v_targets{0.5, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25};
  int seeds = 3;

  bool operator==(const EvalGrid&) const = default;
};

/// Every (eps, v_target, seed) cell of the grid. A checkpoint trained for one fixed level
/// (`fixed_epsilon`) is evaluated at that level only.
template <typename Scalar>
std::vector<EvalRecord> evaluate_grid(const Agent<Scalar>& agent, const EnvParams& env,
                                      const CostParams& cost, const EvalGrid& grid,
                                      const std::string& method,
                                      std::optional<double> fixed_epsilon = std::nullopt) {
  std::vector<double> eps_list = grid.epsilons;
  if (fixed_epsilon) eps_list = {*fixed_epsilon};
  std::vector<EvalRecord> out;
  for (double eps : eps_list) {
    for (double vt : grid.v_targets) {
      for (int s = 0; s < grid.seeds; ++s) {
        out.push_back(evaluate_cell(agent, env, cost, eps, vt, static_cast<std::uint64_t>(s), method));
      }
    }
  }
  return out;
}

}  // namespace quietstep
