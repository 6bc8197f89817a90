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
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "quietstep/error.hpp"
#include "quietstep/mlp.hpp"
#include "quietstep/walker_env.hpp"

namespace quietstep {

/// How the constraint level reaches the networks.
enum class Conditioning {
  none,  // unconditioned (oracles, unconstrained baseline)
  cncp,  // actor: obs ++ [eps]; critics: xi(obs)^T w(eps)
  conc,  // actor and critics: obs ++ [eps]
  rc,    // actor and critics: obs ++ [eps] * repeat
};

inline std::string_view to_string(Conditioning c) {
  switch (c) {
    case Conditioning::none: return "none";
    case Conditioning::cncp: return "cncp";
    case Conditioning::conc: return "conc";
    case Conditioning::rc: return "rc";
  }
  return "unknown";
}

inline Conditioning parse_conditioning(std::string_view s) {
  if (s == "none") return Conditioning::none;
  if (s == "cncp") return Conditioning::cncp;
  if (s == "conc") return Conditioning::conc;
  if (s == "rc") return Conditioning::rc;
  throw Error(Errc::invalid_params, "unknown conditioning mode '" + std::string(s) + "'");
}

struct ConditioningMode {
  Conditioning kind = Conditioning::cncp;
  int rc_repeat = 10;

  std::size_t appended() const {
    switch (kind) {
      case Conditioning::none: return 0;
      case Conditioning::rc: return static_cast<std::size_t>(rc_repeat);
      default: return 1;
    }
  }
  std::size_t input_dim() const { return kObsDim + appended(); }

  void validate() const {
    if (rc_repeat < 1) throw Error(Errc::invalid_params, "rc repeat count must be >= 1");
  }

  bool operator==(const ConditioningMode&) const = default;
};

inline void check_epsilon(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw Error(Errc::out_of_bounds, "constraint level must lie in [0, 1], got " + std::to_string(eps));
  }
}

template <typename Scalar>
void write_conditioned(const Observation& obs, double eps, const ConditioningMode& mode,
                       Eigen::Ref<Vector<Scalar>> out) {
  const auto base = obs.to_array();
  for (std::size_t k = 0; k < kObsDim; ++k) out[static_cast<Eigen::Index>(k)] = static_cast<Scalar>(base[k]);
  for (std::size_t k = 0; k < mode.appended(); ++k) {
    out[static_cast<Eigen::Index>(kObsDim + k)] = static_cast<Scalar>(eps);
  }
}

template <typename Scalar = double>
Vector<Scalar> condition_input(const Observation& obs, double eps, const ConditioningMode& mode) {
  check_epsilon(eps);
  Vector<Scalar> out(static_cast<Eigen::Index>(mode.input_dim()));
  write_conditioned<Scalar>(obs, eps, mode, out);
  return out;
}

enum class Stream { reward, cost };

struct AgentSpec {
  std::vector<std::size_t> hidden_dims{64, 64};
  std::size_t feature_dim = 16;
  Activation activation = Activation::elu;
  ConditioningMode mode;
  double init_log_std = -0.5;

  bool operator==(const AgentSpec&) const = default;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;

template <typename Scalar>
struct PolicyParams {
  Vector<Scalar> mean_net;
  Vector<Scalar> log_std;  // state-independent, one per action dim
};

/// Critic parameters. CNCP fills the xi/w networks, the baselines fill the plain ones.
template <typename Scalar>
struct CriticPair {
  Vector<Scalar> xi_r, xi_c;  // obs -> d features
  Vector<Scalar> w_r, w_c;    // eps -> d weights
  Vector<Scalar> plain_r, plain_c;  // conditioned input -> scalar

  Vector<Scalar>& feature(Stream f) { return f == Stream::reward ? xi_r : xi_c; }
  const Vector<Scalar>& feature(Stream f) const { return f == Stream::reward ? xi_r : xi_c; }
  Vector<Scalar>& weight(Stream f) { return f == Stream::reward ? w_r : w_c; }
  const Vector<Scalar>& weight(Stream f) const { return f == Stream::reward ? w_r : w_c; }
  Vector<Scalar>& plain(Stream f) { return f == Stream::reward ? plain_r : plain_c; }
  const Vector<Scalar>& plain(Stream f) const { return f == Stream::reward ? plain_r : plain_c; }
};

/// Log density of a diagonal Gaussian at `x`.
template <typename Scalar>
double gaussian_log_prob(std::span<const double> x, std::span<const double> mean,
                         const Vector<Scalar>& log_std) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double ls = static_cast<double>(log_std[static_cast<Eigen::Index>(j)]);
    const double z = (x[j] - mean[j]) * std::exp(-ls);
    lp += -0.5 * z * z - ls - half_log_2pi;
  }
  return lp;
}

struct ActResult {
  Action action;                        // clamped to [-1, 1]
  std::array<double, kActDim> raw{};    // pre-clamp sample
  std::array<double, kActDim> mean{};
  double log_prob = 0.0;                // of the pre-clamp sample
};

/// Constraint-conditioned Gaussian actor plus reward/cost critics.
template <typename Scalar>
class Agent {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  Agent() = default;

  explicit Agent(AgentSpec spec) : spec_(std::move(spec)) {
    spec_.mode.validate();
    if (spec_.feature_dim == 0) throw Error(Errc::invalid_params, "feature_dim must be >= 1");
    const auto in = spec_.mode.input_dim();
    policy_net_ = Mlp<Scalar>(MlpSpec{in, spec_.hidden_dims, kActDim, spec_.activation});
    if (decomposed()) {
      feature_net_ = Mlp<Scalar>(MlpSpec{kObsDim, spec_.hidden_dims, spec_.feature_dim, spec_.activation});
      weight_net_ = Mlp<Scalar>(MlpSpec{1, spec_.hidden_dims, spec_.feature_dim, spec_.activation});
    } else {
      plain_net_ = Mlp<Scalar>(MlpSpec{in, spec_.hidden_dims, 1, spec_.activation});
    }
  }

  /// Fresh parameters; the actor head is scaled down so initial means sit near zero.
  static Agent create(AgentSpec spec, std::uint64_t seed) {
    Agent a(std::move(spec));
    std::seed_seq seq{seed, std::uint64_t{0x51ed}};
    std::vector<std::uint64_t> seeds(6);
    seq.generate(seeds.begin(), seeds.end());
    a.policy_.mean_net = a.policy_net_.init(seeds[0]);
    const auto last = a.policy_net_.num_layers() - 1;
    a.policy_net_.weight(a.policy_.mean_net, last) *= Scalar(0.01);
    a.policy_.log_std = Vec::Constant(kActDim, static_cast<Scalar>(a.spec_.init_log_std));
    if (a.decomposed()) {
      a.critics_.xi_r = a.feature_net_.init(seeds[1]);
      a.critics_.xi_c = a.feature_net_.init(seeds[2]);
      a.critics_.w_r = a.weight_net_.init(seeds[3]);
      a.critics_.w_c = a.weight_net_.init(seeds[4]);
    } else {
      a.critics_.plain_r = a.plain_net_.init(seeds[1]);
      a.critics_.plain_c = a.plain_net_.init(seeds[2]);
    }
    return a;
  }

  const AgentSpec& spec() const { return spec_; }
  const ConditioningMode& mode() const { return spec_.mode; }
  bool decomposed() const { return spec_.mode.kind == Conditioning::cncp; }

  PolicyParams<Scalar>& policy() { return policy_; }
  const PolicyParams<Scalar>& policy() const { return policy_; }
  CriticPair<Scalar>& critics() { return critics_; }
  const CriticPair<Scalar>& critics() const { return critics_; }

  const Mlp<Scalar>& policy_net() const { return policy_net_; }
  const Mlp<Scalar>& feature_net() const { return feature_net_; }
  const Mlp<Scalar>& weight_net() const { return weight_net_; }
  const Mlp<Scalar>& plain_net() const { return plain_net_; }

  void clamp_log_std() {
    policy_.log_std = policy_.log_std.cwiseMax(Scalar(kLogStdMin)).cwiseMin(Scalar(kLogStdMax));
  }

  /// Conditioned actor inputs for a batch, one column per sample.
  Mat policy_inputs(std::span<const Observation> obs, std::span<const double> eps) const {
    check_batch(obs, eps);
    Mat x(static_cast<Eigen::Index>(spec_.mode.input_dim()), static_cast<Eigen::Index>(obs.size()));
    for (std::size_t b = 0; b < obs.size(); ++b) {
      write_conditioned<Scalar>(obs[b], eps[b], spec_.mode, x.col(static_cast<Eigen::Index>(b)));
    }
    return x;
  }

  static Mat observation_matrix(std::span<const Observation> obs) {
    Mat x(static_cast<Eigen::Index>(kObsDim), static_cast<Eigen::Index>(obs.size()));
    for (std::size_t b = 0; b < obs.size(); ++b) {
      const auto arr = obs[b].to_array();
      for (std::size_t k = 0; k < kObsDim; ++k) {
        x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = static_cast<Scalar>(arr[k]);
      }
    }
    return x;
  }

  Mat action_means(std::span<const Observation> obs, std::span<const double> eps) const {
    Mat mean = policy_net_.forward(policy_.mean_net, policy_inputs(obs, eps));
    if (!mean.allFinite()) throw Error(Errc::policy_divergence, "non-finite policy output");
    return mean;
  }

  /// Samples a ~ N(mean, exp(log_std)^2); the returned action is clamped, log_prob is not.
  template <typename Rng>
  ActResult act(const Observation& obs, double eps, Rng& rng) const {
    const Mat mean = action_means(std::span(&obs, 1), std::span(&eps, 1));
    return sample_from(mean.col(0), rng);
  }

  template <typename Rng>
  ActResult sample_from(const Eigen::Ref<const Vec>& mean, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    ActResult r;
    for (std::size_t j = 0; j < kActDim; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      r.mean[j] = static_cast<double>(mean[jj]);
      r.raw[j] = r.mean[j] + std::exp(static_cast<double>(policy_.log_std[jj])) * normal(rng);
    }
    r.log_prob = gaussian_log_prob<Scalar>(r.raw, r.mean, policy_.log_std);
    r.action = Action{r.raw[0], r.raw[1]}.clamped();
    return r;
  }

  /// Deterministic evaluation action: the clamped mean.
  Action act_mean(const Observation& obs, double eps) const {
    const Mat mean = action_means(std::span(&obs, 1), std::span(&eps, 1));
    return Action{static_cast<double>(mean(0, 0)), static_cast<double>(mean(1, 0))}.clamped();
  }

  double log_prob(const Observation& obs, double eps, std::span<const double> raw_action) const {
    const Mat mean = action_means(std::span(&obs, 1), std::span(&eps, 1));
    const std::array<double, kActDim> m{static_cast<double>(mean(0, 0)), static_cast<double>(mean(1, 0))};
    return gaussian_log_prob<Scalar>(raw_action, m, policy_.log_std);
  }

  /// Intermediate results of a batched critic evaluation, reused by the backward pass.
  struct ValueCache {
    typename Mlp<Scalar>::Cache main;      // xi net (cncp) or plain net
    typename Mlp<Scalar>::Cache weight;    // w net over the distinct eps values
    std::vector<Eigen::Index> eps_slot;    // column -> distinct-eps column
    Mat features;                          // d x B (cncp)
    Mat weights;                           // d x U (cncp)
  };

  Vec values(std::span<const Observation> obs, std::span<const double> eps, Stream f,
             ValueCache& cache) const {
    check_batch(obs, eps);
    const auto B = static_cast<Eigen::Index>(obs.size());
    if (!decomposed()) {
      Mat out = plain_net_.forward(critics_.plain(f), policy_inputs(obs, eps), cache.main);
      return out.row(0).transpose();
    }
    cache.features = feature_net_.forward(critics_.feature(f), observation_matrix(obs), cache.main);
    // w(eps) depends on eps alone, so evaluate it once per distinct level.
    std::map<double, Eigen::Index> slots;
    cache.eps_slot.resize(obs.size());
    std::vector<double> distinct;
    for (std::size_t b = 0; b < obs.size(); ++b) {
      auto [it, inserted] = slots.emplace(eps[b], static_cast<Eigen::Index>(distinct.size()));
      if (inserted) distinct.push_back(eps[b]);
      cache.eps_slot[b] = it->second;
    }
    Mat eps_row(1, static_cast<Eigen::Index>(distinct.size()));
    for (std::size_t u = 0; u < distinct.size(); ++u) {
      eps_row(0, static_cast<Eigen::Index>(u)) = static_cast<Scalar>(distinct[u]);
    }
    cache.weights = weight_net_.forward(critics_.weight(f), eps_row, cache.weight);
    Vec v(B);
    for (Eigen::Index b = 0; b < B; ++b) {
      v[b] = cache.features.col(b).dot(cache.weights.col(cache.eps_slot[static_cast<std::size_t>(b)]));
    }
    return v;
  }

  Vec values(std::span<const Observation> obs, std::span<const double> eps, Stream f) const {
    ValueCache cache;
    return values(obs, eps, f, cache);
  }

  double value(const Observation& obs, double eps, Stream f) const {
    return static_cast<double>(values(std::span(&obs, 1), std::span(&eps, 1), f)[0]);
  }

  struct CriticGradients {
    Vec main;    // xi net (cncp) or plain net
    Vec weight;  // w net (cncp only)
  };

  /// Gradient of sum_b cot_b * V(s_b, eps_b) for the stream's critic networks.
  CriticGradients value_backward(Stream f, const ValueCache& cache, const Vec& cot) const {
    CriticGradients g;
    if (!decomposed()) {
      Mat c = cot.transpose();
      g.main = plain_net_.backward(critics_.plain(f), cache.main, c).params;
      return g;
    }
    const auto B = cot.size();
    Mat feat_cot(cache.features.rows(), B);
    Mat weight_cot = Mat::Zero(cache.weights.rows(), cache.weights.cols());
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto slot = cache.eps_slot[static_cast<std::size_t>(b)];
      feat_cot.col(b) = cot[b] * cache.weights.col(slot);
      weight_cot.col(slot) += cot[b] * cache.features.col(b);
    }
    g.main = feature_net_.backward(critics_.feature(f), cache.main, feat_cot).params;
    g.weight = weight_net_.backward(critics_.weight(f), cache.weight, weight_cot).params;
    return g;
  }

  struct CriticLoss {
    double loss = 0.0;
    CriticGradients grads;
  };

  /// Mean squared error between V_f(s, eps) and the targets, with gradients for the critic nets.
  CriticLoss critic_loss(std::span<const Observation> obs, std::span<const double> eps,
                         std::span<const double> targets, Stream f) const {
    if (obs.empty()) throw Error(Errc::empty_batch, "critic_loss on an empty batch");
    if (targets.size() != obs.size()) {
      throw Error(Errc::length_mismatch, "critic_loss: targets and observations differ in length");
    }
    ValueCache cache;
    const Vec v = values(obs, eps, f, cache);
    const auto n = static_cast<double>(obs.size());
    Vec cot(v.size());
    double loss = 0.0;
    for (Eigen::Index b = 0; b < v.size(); ++b) {
      const double err = static_cast<double>(v[b]) - targets[static_cast<std::size_t>(b)];
      loss += err * err;
      cot[b] = static_cast<Scalar>(2.0 * err / n);
    }
    return {loss / n, value_backward(f, cache, cot)};
  }

 private:
  void check_batch(std::span<const Observation> obs, std::span<const double> eps) const {
    if (obs.size() != eps.size()) {
      throw Error(Errc::dim_mismatch, "observation and constraint-level batches differ in length");
    }
    for (double e : eps) check_epsilon(e);
  }

  AgentSpec spec_;
  Mlp<Scalar> policy_net_;
  Mlp<Scalar> feature_net_;
  Mlp<Scalar> weight_net_;
  Mlp<Scalar> plain_net_;
  PolicyParams<Scalar> policy_;
  CriticPair<Scalar> critics_;
};

}  // namespace quietstep
