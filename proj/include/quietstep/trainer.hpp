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
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "quietstep/agent.hpp"
#include "quietstep/error.hpp"
#include "quietstep/lagrangian.hpp"
#include "quietstep/walker_env.hpp"

namespace quietstep {

enum class TrainMode {
  lagrangian,     // PID-Lagrangian PPO, one multiplier per constraint level
  unconstrained,  // plain PPO on the tracking reward, cost ignored
  morl,           // plain PPO on r - beta * c
};

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::lagrangian: return "lagrangian";
    case TrainMode::unconstrained: return "unconstrained";
    case TrainMode::morl: return "morl";
  }
  return "unknown";
}

struct TrainerConfig {
  int num_levels = 16;
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double eps_clip = 0.2;
  int epochs_per_iter = 5;
  int minibatch_size = 1024;
  int iterations = 2000;
  int horizon = 256;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  std::uint64_t seed = 0;
  double entropy_coef = 0.0;
  double max_grad_norm = 1.0;
  PidGains pid;
  double integral_max = 100.0;
  /// Auxiliary action-smoothness bonus, faded out by reward_weight_schedule.
  double aux_reward_scale = 0.1;
  double curriculum_t0 = 100.0;
  double curriculum_k = 0.05;
  /// Keep every multiplier at zero (plain-PPO equivalence checks).
  bool freeze_lambda = false;
  int checkpoint_every = 0;

  void validate() const {
    auto bad = [](const char* f) {
      throw Error(Errc::invalid_params, std::string("trainer parameter out of range: ") + f);
    };
    if (num_levels < 1) bad("num_levels");
    if (!(gamma > 0.0 && gamma < 1.0)) bad("gamma");
    if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0)) bad("lambda_gae");
    if (!(eps_clip > 0.0)) bad("eps_clip");
    if (epochs_per_iter < 1) bad("epochs_per_iter");
    if (minibatch_size < 1) bad("minibatch_size");
    if (iterations < 0) bad("iterations");
    if (horizon < 0) bad("horizon");
    if (!(actor_lr > 0.0)) bad("actor_lr");
    if (!(critic_lr > 0.0)) bad("critic_lr");
    if (!(integral_max >= 0.0)) bad("integral_max");
  }

  bool operator==(const TrainerConfig&) const = default;
};

/// Constraint levels spaced uniformly over [0, 1], first 0 and last 1.
struct ConstraintSchedule {
  std::vector<double> levels;

  static ConstraintSchedule uniform(int n) {
    if (n < 1) throw Error(Errc::invalid_params, "schedule needs at least one level");
    ConstraintSchedule s;
    if (n == 1) {
      s.levels = {0.0};
      return s;
    }
    for (int i = 0; i < n; ++i) s.levels.push_back(static_cast<double>(i) / (n - 1));
    s.levels.back() = 1.0;
    return s;
  }
};

struct StepRecord {
  Observation obs;
  std::array<double, kActDim> raw_action{};
  double log_prob = 0.0;
  double reward = 0.0;        // training reward (tracking + aux, minus beta * cost for morl)
  double env_reward = 0.0;    // tracking reward only
  double cost = 0.0;
  double cost_signal = 0.0;   // cost fed to GAE
  double value_r = 0.0;
  double value_c = 0.0;
  double tracking_error = 0.0;  // |v' - v_target|
  std::uint8_t done = 0;
};

/// Transitions gathered under one constraint level during one iteration.
struct RolloutBuffer {
  double epsilon = 0.0;
  std::vector<StepRecord> steps;
  double bootstrap_r = 0.0;
  double bootstrap_c = 0.0;
  std::vector<double> episode_mean_costs;  // episodes that finished inside this buffer
};

struct LevelMetrics {
  double epsilon = 0.0;
  double lambda = 0.0;
  double mean_cost = 0.0;
  double measured_cost = 0.0;
  double mean_reward = 0.0;
  double mean_tracking_error = 0.0;
};

struct IterationMetrics {
  int iteration = 0;
  long long env_steps = 0;
  double reward_weight = 0.0;
  double actor_loss = 0.0;
  double critic_loss_r = 0.0;
  double critic_loss_c = 0.0;
  std::vector<LevelMetrics> levels;
};

template <typename Scalar>
struct SurrogateResult {
  double loss = 0.0;           // negated clipped objective minus entropy bonus
  double objective = 0.0;      // weighted clipped objective
  Vector<Scalar> grad_mean_net;
  Vector<Scalar> grad_log_std;
};

/// Weighted clipped surrogate over a batch: loss = -sum_b w_b min(eta_b A_b, clip(eta_b) A_b)
/// - entropy_coef * H. Uniform weights 1/n give the per-buffer mean.
template <typename Scalar>
SurrogateResult<Scalar> weighted_surrogate(const Agent<Scalar>& agent,
                                           std::span<const Observation> obs,
                                           std::span<const double> eps,
                                           std::span<const std::array<double, kActDim>> raw_actions,
                                           std::span<const double> old_log_probs,
                                           std::span<const double> advantages,
                                           std::span<const double> weights, double eps_clip,
                                           double entropy_coef) {
  const std::size_t n = obs.size();
  if (n == 0) throw Error(Errc::empty_batch, "surrogate loss on an empty buffer");
  if (raw_actions.size() != n || old_log_probs.size() != n || advantages.size() != n ||
      weights.size() != n || eps.size() != n) {
    throw Error(Errc::length_mismatch, "surrogate loss inputs differ in length");
  }
  using Mat = Matrix<Scalar>;
  typename Mlp<Scalar>::Cache cache;
  const Mat mean = agent.policy_net().forward(agent.policy().mean_net, agent.policy_inputs(obs, eps), cache);
  if (!mean.allFinite()) throw Error(Errc::policy_divergence, "non-finite policy output");
  const auto& log_std = agent.policy().log_std;

  SurrogateResult<Scalar> r;
  Mat cot(static_cast<Eigen::Index>(kActDim), static_cast<Eigen::Index>(n));
  std::array<double, kActDim> dlog_std{};
  for (std::size_t b = 0; b < n; ++b) {
    const auto bb = static_cast<Eigen::Index>(b);
    std::array<double, kActDim> m{};
    for (std::size_t j = 0; j < kActDim; ++j) m[j] = static_cast<double>(mean(static_cast<Eigen::Index>(j), bb));
    const double lp = gaussian_log_prob<Scalar>(raw_actions[b], m, log_std);
    const double ratio = std::exp(lp - old_log_probs[b]);
    r.objective += weights[b] * clipped_objective(ratio, advantages[b], eps_clip);
    // d loss / d log_prob
    const double g = -weights[b] * clipped_objective_slope(ratio, advantages[b], eps_clip) * ratio;
    for (std::size_t j = 0; j < kActDim; ++j) {
      const double ls = static_cast<double>(log_std[static_cast<Eigen::Index>(j)]);
      const double inv_var = std::exp(-2.0 * ls);
      const double diff = raw_actions[b][j] - m[j];
      cot(static_cast<Eigen::Index>(j), bb) = static_cast<Scalar>(g * diff * inv_var);
      dlog_std[j] += g * (diff * diff * inv_var - 1.0);
    }
  }
  double entropy = 0.0;
  constexpr double half_log_2pi_e = 1.41893853320467274178;
  for (std::size_t j = 0; j < kActDim; ++j) {
    entropy += static_cast<double>(log_std[static_cast<Eigen::Index>(j)]) + half_log_2pi_e;
    dlog_std[j] -= entropy_coef;
  }
  r.loss = -r.objective - entropy_coef * entropy;
  r.grad_mean_net = agent.policy_net().backward(agent.policy().mean_net, cache, cot).params;
  r.grad_log_std = Vector<Scalar>(static_cast<Eigen::Index>(kActDim));
  for (std::size_t j = 0; j < kActDim; ++j) {
    r.grad_log_std[static_cast<Eigen::Index>(j)] = static_cast<Scalar>(dlog_std[j]);
  }
  return r;
}

/// Per-buffer clipped surrogate loss L_i (mean over the buffer's samples).
template <typename Scalar>
SurrogateResult<Scalar> surrogate_loss(const Agent<Scalar>& agent, const RolloutBuffer& buffer,
                                       std::span<const double> advantages, double eps_clip,
                                       double entropy_coef = 0.0) {
  const std::size_t n = buffer.steps.size();
  if (n == 0) throw Error(Errc::empty_batch, "surrogate loss on an empty buffer");
  std::vector<Observation> obs;
  std::vector<std::array<double, kActDim>> raw;
  std::vector<double> old_lp;
  for (const auto& s : buffer.steps) {
    obs.push_back(s.obs);
    raw.push_back(s.raw_action);
    old_lp.push_back(s.log_prob);
  }
  const std::vector<double> eps(n, buffer.epsilon);
  const std::vector<double> w(n, 1.0 / static_cast<double>(n));
  return weighted_surrogate(agent, obs, eps, raw, old_lp, advantages, w, eps_clip, entropy_coef);
}

template <typename Scalar>
void clip_grad_norm(std::initializer_list<Vector<Scalar>*> grads, double max_norm) {
  if (!(max_norm > 0.0)) return;
  double sq = 0.0;
  for (auto* g : grads) sq += static_cast<double>(g->squaredNorm());
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const auto scale = static_cast<Scalar>(max_norm / (norm + 1e-12));
    for (auto* g : grads) *g *= scale;
  }
}

/// Environment instance bound to one constraint level, with per-episode bookkeeping.
struct LevelRunner {
  EnvState state;
  Action prev_action;
  double episode_cost = 0.0;
  int episode_steps = 0;
};

/// PPO trainer over a set of constraint levels. Each level owns an environment, a rollout
/// buffer and a Lagrange multiplier; the actor loss averages the per-level surrogates.
template <typename Scalar>
class Trainer {
 public:
  struct Setup {
    EnvParams env;
    CostParams cost;
    AgentSpec agent;
    TrainerConfig config;
    TrainMode mode = TrainMode::lagrangian;
    std::vector<double> levels;  // empty: uniform schedule with config.num_levels entries
    double morl_beta = 0.0;
  };

  explicit Trainer(Setup setup) : setup_(std::move(setup)), rng_(setup_.config.seed) {
    setup_.config.validate();
    setup_.env.validate();
    setup_.cost.validate();
    if (setup_.levels.empty()) {
      setup_.levels = ConstraintSchedule::uniform(setup_.config.num_levels).levels;
    }
    for (double e : setup_.levels) check_epsilon(e);
    if (setup_.mode == TrainMode::morl && !(setup_.morl_beta >= 0.0)) {
      throw Error(Errc::invalid_params, "morl reward scale must be >= 0");
    }
    agent_ = Agent<Scalar>::create(setup_.agent, setup_.config.seed);
    for (std::size_t i = 0; i < setup_.levels.size(); ++i) {
      LagrangeState ls;
      ls.gains = setup_.config.pid;
      ls.integral_max = setup_.config.integral_max;
      lagrange_.push_back(ls);
      LevelRunner r;
      r.state = reset(rng_(), setup_.env);
      runners_.push_back(r);
    }
    init_optimizers();
  }

  const Setup& setup() const { return setup_; }
  const Agent<Scalar>& agent() const { return agent_; }
  Agent<Scalar>& agent() { return agent_; }
  const std::vector<LagrangeState>& lagrange_states() const { return lagrange_; }
  std::vector<LagrangeState>& lagrange_states() { return lagrange_; }
  const std::vector<double>& levels() const { return setup_.levels; }
  int iteration() const { return iteration_; }
  bool uses_cost_critic() const { return setup_.mode == TrainMode::lagrangian; }

  /// Acts with the current policy for `horizon` steps in every level's environment.
  std::vector<RolloutBuffer> collect_rollouts() {
    const auto& cfg = setup_.config;
    const std::size_t n_levels = setup_.levels.size();
    std::vector<RolloutBuffer> buffers(n_levels);
    for (std::size_t i = 0; i < n_levels; ++i) {
      buffers[i].epsilon = setup_.levels[i];
      buffers[i].steps.reserve(static_cast<std::size_t>(cfg.horizon));
    }
    const double aux_weight = cfg.aux_reward_scale *
        reward_weight_schedule(iteration_, cfg.curriculum_t0, cfg.curriculum_k);
    std::vector<Observation> obs(n_levels);
    for (int t = 0; t < cfg.horizon; ++t) {
      for (std::size_t i = 0; i < n_levels; ++i) obs[i] = observe(runners_[i].state);
      const auto means = agent_.action_means(obs, setup_.levels);
      const auto v_r = agent_.values(obs, setup_.levels, Stream::reward);
      Vector<Scalar> v_c;
      if (uses_cost_critic()) v_c = agent_.values(obs, setup_.levels, Stream::cost);
      for (std::size_t i = 0; i < n_levels; ++i) {
        auto& run = runners_[i];
        const auto act = agent_.sample_from(means.col(static_cast<Eigen::Index>(i)), rng_);
        const auto res = step(run.state, act.action, setup_.env, setup_.cost);
        const auto& tr = res.transition;
        StepRecord rec;
        rec.obs = obs[i];
        rec.raw_action = act.raw;
        rec.log_prob = act.log_prob;
        rec.env_reward = tr.reward;
        rec.cost = tr.cost;
        const double du = tr.action.u - run.prev_action.u;
        const double dw = tr.action.w - run.prev_action.w;
        rec.reward = tr.reward + aux_weight * std::exp(-(du * du + dw * dw));
        if (setup_.mode == TrainMode::morl) rec.reward -= setup_.morl_beta * tr.cost;
        rec.value_r = static_cast<double>(v_r[static_cast<Eigen::Index>(i)]);
        rec.value_c = uses_cost_critic() ? static_cast<double>(v_c[static_cast<Eigen::Index>(i)]) : 0.0;
        rec.tracking_error = std::abs(tr.next_obs.v - run.state.v_target);
        rec.done = tr.done ? 1 : 0;
        rec.cost_signal = tr.cost;
        if (tr.done) {
          // Episodes end on a time limit the observation cannot see, so the step that hits it
          // carries the discounted value of the state it would have continued from.
          const double eps_i = setup_.levels[i];
          rec.reward += cfg.gamma * agent_.value(tr.next_obs, eps_i, Stream::reward);
          if (uses_cost_critic()) {
            rec.cost_signal += cfg.gamma * agent_.value(tr.next_obs, eps_i, Stream::cost);
          }
        }
        buffers[i].steps.push_back(rec);

        run.episode_cost += tr.cost;
        run.episode_steps += 1;
        run.prev_action = tr.action;
        run.state = res.state;
        if (tr.done) {
          buffers[i].episode_mean_costs.push_back(run.episode_cost / run.episode_steps);
          run = LevelRunner{};
          run.state = reset(rng_(), setup_.env);
        }
      }
    }
    for (std::size_t i = 0; i < n_levels; ++i) obs[i] = observe(runners_[i].state);
    if (cfg.horizon > 0) {
      const auto v_r = agent_.values(obs, setup_.levels, Stream::reward);
      for (std::size_t i = 0; i < n_levels; ++i) {
        buffers[i].bootstrap_r = static_cast<double>(v_r[static_cast<Eigen::Index>(i)]);
      }
      if (uses_cost_critic()) {
        const auto v_c = agent_.values(obs, setup_.levels, Stream::cost);
        for (std::size_t i = 0; i < n_levels; ++i) {
          buffers[i].bootstrap_c = static_cast<double>(v_c[static_cast<Eigen::Index>(i)]);
        }
      }
    }
    return buffers;
  }

  /// Advantages, multiplier updates and several epochs of actor/critic updates on fresh buffers.
  IterationMetrics train_iteration(std::vector<RolloutBuffer>& buffers) {
    const auto& cfg = setup_.config;
    const std::size_t n_levels = buffers.size();
    if (n_levels != setup_.levels.size()) {
      throw Error(Errc::length_mismatch, "one rollout buffer per constraint level is required");
    }
    IterationMetrics metrics;
    metrics.iteration = iteration_;
    metrics.reward_weight = reward_weight_schedule(iteration_, cfg.curriculum_t0, cfg.curriculum_k);

    std::vector<std::vector<double>> adv(n_levels), ret_r(n_levels), ret_c(n_levels);
    for (std::size_t i = 0; i < n_levels; ++i) {
      auto& buf = buffers[i];
      const std::size_t n = buf.steps.size();
      metrics.env_steps += static_cast<long long>(n);
      LevelMetrics lm;
      lm.epsilon = buf.epsilon;
      std::vector<double> rew(n), cost(n), vr(n), vc(n);
      std::vector<std::uint8_t> done(n);
      for (std::size_t t = 0; t < n; ++t) {
        const auto& s = buf.steps[t];
        rew[t] = s.reward;
        cost[t] = s.cost_signal;
        vr[t] = s.value_r;
        vc[t] = s.value_c;
        done[t] = s.done;
        lm.mean_cost += s.cost;
        lm.mean_reward += s.env_reward;
        lm.mean_tracking_error += s.tracking_error;
      }
      if (n > 0) {
        lm.mean_cost /= static_cast<double>(n);
        lm.mean_reward /= static_cast<double>(n);
        lm.mean_tracking_error /= static_cast<double>(n);
      }
      auto gr = gae(vr, buf.bootstrap_r, rew, done, cfg.gamma, cfg.lambda_gae);
      ret_r[i] = gr.returns;
      adv[i] = std::move(gr.advantages);
      normalize_advantages(adv[i]);

      if (uses_cost_critic()) {
        auto gc = gae(vc, buf.bootstrap_c, cost, done, cfg.gamma, cfg.lambda_gae);
        ret_c[i] = gc.returns;
        normalize_advantages(gc.advantages);
        lm.measured_cost = buf.episode_mean_costs.empty()
            ? lm.mean_cost
            : std::accumulate(buf.episode_mean_costs.begin(), buf.episode_mean_costs.end(), 0.0) /
                  static_cast<double>(buf.episode_mean_costs.size());
        if (!cfg.freeze_lambda && n > 0) {
          lagrange_[i] = update_lagrange(lagrange_[i], lm.measured_cost, buf.epsilon);
        }
        const double lambda = lagrange_[i].lambda;
        for (std::size_t t = 0; t < n; ++t) adv[i][t] = combined_advantage(adv[i][t], gc.advantages[t], lambda);
      } else {
        lm.measured_cost = lm.mean_cost;
      }
      lm.lambda = lagrange_[i].lambda;
      metrics.levels.push_back(lm);
    }

    const std::size_t per_level = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.minibatch_size) / std::max<std::size_t>(1, n_levels));
    double actor_loss_sum = 0.0, cr_sum = 0.0, cc_sum = 0.0;
    int updates = 0;
    std::vector<std::vector<std::size_t>> order(n_levels);
    for (int epoch = 0; epoch < cfg.epochs_per_iter; ++epoch) {
      std::size_t max_len = 0;
      for (std::size_t i = 0; i < n_levels; ++i) {
        order[i].resize(buffers[i].steps.size());
        std::iota(order[i].begin(), order[i].end(), std::size_t{0});
        std::shuffle(order[i].begin(), order[i].end(), rng_);
        max_len = std::max(max_len, order[i].size());
      }
      for (std::size_t start = 0; start < max_len; start += per_level) {
        Minibatch mb;
        std::size_t levels_present = 0;
        for (std::size_t i = 0; i < n_levels; ++i) {
          if (start < order[i].size()) ++levels_present;
        }
        for (std::size_t i = 0; i < n_levels; ++i) {
          const std::size_t end = std::min(order[i].size(), start + per_level);
          if (start >= end) continue;
          const double w = 1.0 / (static_cast<double>(levels_present) * static_cast<double>(end - start));
          for (std::size_t k = start; k < end; ++k) {
            const auto& s = buffers[i].steps[order[i][k]];
            mb.obs.push_back(s.obs);
            mb.eps.push_back(buffers[i].epsilon);
            mb.raw.push_back(s.raw_action);
            mb.old_lp.push_back(s.log_prob);
            mb.adv.push_back(adv[i][order[i][k]]);
            mb.weight.push_back(w);
            mb.ret_r.push_back(ret_r[i][order[i][k]]);
            if (uses_cost_critic()) mb.ret_c.push_back(ret_c[i][order[i][k]]);
          }
        }
        if (mb.obs.empty()) continue;
        const auto losses = update_on(mb);
        actor_loss_sum += losses[0];
        cr_sum += losses[1];
        cc_sum += losses[2];
        ++updates;
      }
    }
    if (updates > 0) {
      metrics.actor_loss = actor_loss_sum / updates;
      metrics.critic_loss_r = cr_sum / updates;
      metrics.critic_loss_c = cc_sum / updates;
    }
    ++iteration_;
    return metrics;
  }

  IterationMetrics iterate() {
    auto buffers = collect_rollouts();
    return train_iteration(buffers);
  }

 private:
  struct Minibatch {
    std::vector<Observation> obs;
    std::vector<double> eps;
    std::vector<std::array<double, kActDim>> raw;
    std::vector<double> old_lp, adv, weight, ret_r, ret_c;
  };

  struct CriticOptim {
    AdamState<Scalar> main;
    AdamState<Scalar> weight;
  };

  void init_optimizers() {
    const auto& p = agent_.policy();
    opt_mean_ = AdamState<Scalar>(p.mean_net.size());
    opt_log_std_ = AdamState<Scalar>(p.log_std.size());
    for (auto f : {Stream::reward, Stream::cost}) {
      auto& o = critic_opt(f);
      const auto& c = agent_.critics();
      if (agent_.decomposed()) {
        o.main = AdamState<Scalar>(c.feature(f).size());
        o.weight = AdamState<Scalar>(c.weight(f).size());
      } else {
        o.main = AdamState<Scalar>(c.plain(f).size());
      }
    }
  }

  CriticOptim& critic_opt(Stream f) { return f == Stream::reward ? opt_r_ : opt_c_; }

  double update_critic(Stream f, const Minibatch& mb, const std::vector<double>& targets) {
    auto res = agent_.critic_loss(mb.obs, mb.eps, targets, f);
    check_finite(res.loss, f == Stream::reward ? "reward critic loss" : "cost critic loss");
    AdamConfig ac{setup_.config.critic_lr};
    auto& o = critic_opt(f);
    auto& c = agent_.critics();
    if (agent_.decomposed()) {
      clip_grad_norm<Scalar>({&res.grads.main, &res.grads.weight}, setup_.config.max_grad_norm);
      adam_update(c.feature(f), res.grads.main, o.main, ac);
      adam_update(c.weight(f), res.grads.weight, o.weight, ac);
    } else {
      clip_grad_norm<Scalar>({&res.grads.main}, setup_.config.max_grad_norm);
      adam_update(c.plain(f), res.grads.main, o.main, ac);
    }
    return res.loss;
  }

  std::array<double, 3> update_on(const Minibatch& mb) {
    const auto& cfg = setup_.config;
    auto sur = weighted_surrogate(agent_, mb.obs, mb.eps, mb.raw, mb.old_lp, mb.adv, mb.weight,
                                  cfg.eps_clip, cfg.entropy_coef);
    check_finite(sur.loss, "actor loss");
    clip_grad_norm<Scalar>({&sur.grad_mean_net, &sur.grad_log_std}, cfg.max_grad_norm);
    AdamConfig aa{cfg.actor_lr};
    adam_update(agent_.policy().mean_net, sur.grad_mean_net, opt_mean_, aa);
    adam_update(agent_.policy().log_std, sur.grad_log_std, opt_log_std_, aa);
    agent_.clamp_log_std();
    const double lr = update_critic(Stream::reward, mb, mb.ret_r);
    const double lc = uses_cost_critic() ? update_critic(Stream::cost, mb, mb.ret_c) : 0.0;
    return {sur.loss, lr, lc};
  }

  void check_finite(double v, const char* what) const {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << what << " is not finite at iteration " << iteration_;
      for (std::size_t i = 0; i < lagrange_.size(); ++i) {
        os << (i == 0 ? "; lambda = [" : ", ") << lagrange_[i].lambda;
      }
      if (!lagrange_.empty()) os << "]";
      throw Error(Errc::training_divergence, os.str());
    }
  }

  Setup setup_;
  std::mt19937_64 rng_;
  Agent<Scalar> agent_;
  std::vector<LagrangeState> lagrange_;
  std::vector<LevelRunner> runners_;
  AdamState<Scalar> opt_mean_;
  AdamState<Scalar> opt_log_std_;
  CriticOptim opt_r_;
  CriticOptim opt_c_;
  int iteration_ = 0;
};

}  // namespace quietstep
