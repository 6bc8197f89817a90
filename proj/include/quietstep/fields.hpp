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

// Field lists for the configuration structs. One visit_fields overload per struct drives the
// YAML config reader/writer and the JSON checkpoint encoder alike.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "quietstep/agent.hpp"
#include "quietstep/evaluation.hpp"
#include "quietstep/noise_cost.hpp"
#include "quietstep/trainer.hpp"
#include "quietstep/walker_env.hpp"

namespace quietstep {

template <typename V>
void visit_fields(EnvParams& p, V&& v) {
  v("dt", p.dt);
  v("c1", p.c1);
  v("c2", p.c2);
  v("v0", p.v0);
  v("u_max", p.u_max);
  v("vimp_max", p.vimp_max);
  v("F_base", p.F_base);
  v("c3", p.c3);
  v("episode_len", p.episode_len);
  v("v_target_min", p.v_target_min);
  v("v_target_max", p.v_target_max);
  v("sigma_track", p.sigma_track);
  v("strike_feet", p.strike_feet);
}

template <typename V>
void visit_fields(CostParams& p, V&& v) {
  v("lambda1", p.lambda1);
  v("lambda2", p.lambda2);
  v("sigma_F", p.sigma_F);
  v("sigma_v", p.sigma_v);
  v("F_max", p.F_max);
  v("v_clip", p.v_clip);
  v("convention", p.convention);
}

template <typename V>
void visit_fields(PidGains& p, V&& v) {
  v("kp", p.kp);
  v("ki", p.ki);
  v("kd", p.kd);
}

template <typename V>
void visit_fields(TrainerConfig& p, V&& v) {
  v("num_levels", p.num_levels);
  v("gamma", p.gamma);
  v("lambda_gae", p.lambda_gae);
  v("eps_clip", p.eps_clip);
  v("epochs_per_iter", p.epochs_per_iter);
  v("minibatch_size", p.minibatch_size);
  v("iterations", p.iterations);
  v("horizon", p.horizon);
  v("actor_lr", p.actor_lr);
  v("critic_lr", p.critic_lr);
  v("seed", p.seed);
  v("entropy_coef", p.entropy_coef);
  v("max_grad_norm", p.max_grad_norm);
  v("pid", p.pid);
  v("integral_max", p.integral_max);
  v("aux_reward_scale", p.aux_reward_scale);
  v("curriculum_t0", p.curriculum_t0);
  v("curriculum_k", p.curriculum_k);
  v("freeze_lambda", p.freeze_lambda);
  v("checkpoint_every", p.checkpoint_every);
}

template <typename V>
void visit_fields(ConditioningMode& p, V&& v) {
  v("kind", p.kind);
  v("rc_repeat", p.rc_repeat);
}

template <typename V>
void visit_fields(AgentSpec& p, V&& v) {
  v("hidden_dims", p.hidden_dims);
  v("feature_dim", p.feature_dim);
  v("activation", p.activation);
  v("conditioning", p.mode);
  v("init_log_std", p.init_log_std);
}

template <typename V>
void visit_fields(EvalGrid& p, V&& v) {
  v("epsilons", p.epsilons);
  v("v_targets", p.v_targets);
  v("seeds", p.seeds);
}

template <typename T>
concept FieldStruct = requires(T& t) { visit_fields(t, [](const char*, auto&) {}); };

// Enum <-> text used by both encoders.

inline std::string enum_name(CostConvention c) {
  return c == CostConvention::monotone ? "monotone" : "literal";
}
inline void enum_parse(std::string_view s, CostConvention& out) {
  if (s == "monotone") out = CostConvention::monotone;
  else if (s == "literal") out = CostConvention::literal;
  else throw Error(Errc::config_parse, "unknown cost convention '" + std::string(s) + "'");
}

inline std::string enum_name(Activation a) { return a == Activation::elu ? "elu" : "tanh"; }
inline void enum_parse(std::string_view s, Activation& out) {
  if (s == "elu") out = Activation::elu;
  else if (s == "tanh") out = Activation::tanh;
  else throw Error(Errc::config_parse, "unknown activation '" + std::string(s) + "'");
}

inline std::string enum_name(Conditioning c) { return std::string(to_string(c)); }
inline void enum_parse(std::string_view s, Conditioning& out) {
  try {
    out = parse_conditioning(s);
  } catch (const Error& e) {
    throw Error(Errc::config_parse, e.what());
  }
}

template <typename T>
concept NamedEnum = std::is_enum_v<T> && requires(T t) { enum_name(t); };

}  // namespace quietstep
