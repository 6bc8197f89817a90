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
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "quietstep/error.hpp"

namespace quietstep {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Activation { tanh, elu };

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims{64, 64};
  std::size_t output_dim = 1;
  Activation activation = Activation::elu;

  /// input, hidden..., output
  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(hidden_dims.size() + 2);
    sizes.push_back(input_dim);
    sizes.insert(sizes.end(), hidden_dims.begin(), hidden_dims.end());
    sizes.push_back(output_dim);
    return sizes;
  }

  std::size_t num_params() const {
    const auto sizes = layer_sizes();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * (sizes[l] + 1);
    return n;
  }

  void validate() const {
    for (auto d : layer_sizes()) {
      if (d == 0) throw Error(Errc::invalid_params, "MLP dimensions must be >= 1");
    }
  }

  bool operator==(const MlpSpec&) const = default;
};

/// Fully connected network with a fixed activation between layers and a linear head.
///
/// Parameters live in one flat vector. Layer l stores its weight matrix (out x in, column-major)
/// followed by its bias, layers in order. Batches are column-major too: one sample per column.
template <typename Scalar>
class Mlp {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  struct Cache {
    std::vector<Mat> pre;   // pre-activation per layer
    std::vector<Mat> post;  // post[0] = input, post[l+1] = activation(pre[l])
  };

  struct Gradients {
    Vec params;
    Mat input;
  };

  Mlp() : Mlp(MlpSpec{}) {}

  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    sizes_ = spec_.layer_sizes();
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += sizes_[l + 1] * (sizes_[l] + 1);
    }
    num_params_ = offset;
  }

  const MlpSpec& spec() const { return spec_; }
  std::size_t num_params() const { return num_params_; }
  std::size_t num_layers() const { return offsets_.size(); }
  std::size_t input_dim() const { return spec_.input_dim; }
  std::size_t output_dim() const { return spec_.output_dim; }

  /// Weights ~ N(0, 1/fan_in), biases zero.
  Vec init(std::uint64_t seed) const {
    Vec params = Vec::Zero(static_cast<Eigen::Index>(num_params_));
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < num_layers(); ++l) {
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(sizes_[l])));
      const std::size_t n = sizes_[l + 1] * sizes_[l];
      for (std::size_t k = 0; k < n; ++k) {
        params[static_cast<Eigen::Index>(offsets_[l] + k)] = static_cast<Scalar>(dist(rng));
      }
    }
    return params;
  }

  Eigen::Map<const Mat> weight(const Vec& params, std::size_t l) const {
    return {params.data() + offsets_[l], rows(l), cols(l)};
  }
  Eigen::Map<Mat> weight(Vec& params, std::size_t l) const {
    return {params.data() + offsets_[l], rows(l), cols(l)};
  }
  Eigen::Map<const Vec> bias(const Vec& params, std::size_t l) const {
    return {params.data() + offsets_[l] + rows(l) * cols(l), rows(l)};
  }
  Eigen::Map<Vec> bias(Vec& params, std::size_t l) const {
    return {params.data() + offsets_[l] + rows(l) * cols(l), rows(l)};
  }

  Mat forward(const Vec& params, const Mat& input) const {
    Cache cache;
    return forward(params, input, cache);
  }

  Vec forward_one(const Vec& params, const Vec& input) const {
    Mat in = input;
    return forward(params, in).col(0);
  }

  Mat forward(const Vec& params, const Mat& input, Cache& cache) const {
    check_params(params);
    if (static_cast<std::size_t>(input.rows()) != spec_.input_dim) {
      throw Error(Errc::dim_mismatch, "MLP input has " + std::to_string(input.rows()) +
                                          " rows, expected " + std::to_string(spec_.input_dim));
    }
    cache.pre.resize(num_layers());
    cache.post.resize(num_layers() + 1);
    cache.post[0] = input;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      cache.pre[l].noalias() = weight(params, l) * cache.post[l];
      cache.pre[l].colwise() += bias(params, l);
      if (l + 1 == num_layers()) {
        cache.post[l + 1] = cache.pre[l];
      } else {
        cache.post[l + 1] = activate(cache.pre[l]);
      }
    }
    return cache.post.back();
  }

  /// Reverse-mode gradient of sum_b <output_b, cotangent_b>, using a cache from forward().
  Gradients backward(const Vec& params, const Cache& cache, const Mat& cotangent) const {
    check_params(params);
    if (static_cast<std::size_t>(cotangent.rows()) != spec_.output_dim ||
        cotangent.cols() != cache.post.back().cols()) {
      throw Error(Errc::dim_mismatch, "MLP cotangent shape does not match the forward output");
    }
    Gradients g;
    g.params = Vec::Zero(static_cast<Eigen::Index>(num_params_));
    Mat delta = cotangent;
    for (std::size_t l = num_layers(); l-- > 0;) {
      if (l + 1 != num_layers()) delta.array() *= activation_derivative(cache.pre[l]).array();
      Eigen::Map<Mat>(g.params.data() + offsets_[l], rows(l), cols(l)).noalias() =
          delta * cache.post[l].transpose();
      Eigen::Map<Vec>(g.params.data() + offsets_[l] + rows(l) * cols(l), rows(l)) =
          delta.rowwise().sum();
      Mat next = weight(params, l).transpose() * delta;
      delta = std::move(next);
    }
    g.input = std::move(delta);
    return g;
  }

  Gradients backward(const Vec& params, const Mat& input, const Mat& cotangent) const {
    Cache cache;
    forward(params, input, cache);
    return backward(params, cache, cotangent);
  }

 private:
  Eigen::Index rows(std::size_t l) const { return static_cast<Eigen::Index>(sizes_[l + 1]); }
  Eigen::Index cols(std::size_t l) const { return static_cast<Eigen::Index>(sizes_[l]); }

  void check_params(const Vec& params) const {
    if (static_cast<std::size_t>(params.size()) != num_params_) {
      throw Error(Errc::dim_mismatch, "parameter vector has " + std::to_string(params.size()) +
                                          " entries, expected " + std::to_string(num_params_));
    }
  }

  Mat activate(const Mat& x) const {
    if (spec_.activation == Activation::tanh) return x.array().tanh().matrix();
    return (x.array() > Scalar(0)).select(x.array(), x.array().exp() - Scalar(1)).matrix();
  }

  Mat activation_derivative(const Mat& x) const {
    if (spec_.activation == Activation::tanh) {
      return (Scalar(1) - x.array().tanh().square()).matrix();
    }
    return (x.array() > Scalar(0)).select(Mat::Ones(x.rows(), x.cols()).array(), x.array().exp())
        .matrix();
  }

  MlpSpec spec_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t num_params_ = 0;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Vector<Scalar>::Zero(n)), v(Vector<Scalar>::Zero(n)) {}
};

/// One bias-corrected Adam step. A non-finite gradient leaves params and state untouched.
template <typename Scalar>
void adam_update(Vector<Scalar>& params, const Vector<Scalar>& grad, AdamState<Scalar>& state,
                 const AdamConfig& cfg) {
  if (params.size() != grad.size()) {
    throw Error(Errc::length_mismatch, "adam_update: gradient length differs from parameters");
  }
  if (!grad.allFinite()) throw Error(Errc::reject_update, "non-finite gradient");
  if (state.m.size() != params.size()) state = AdamState<Scalar>(params.size());
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  state.step += 1;
  state.m = b1 * state.m + (Scalar(1) - b1) * grad;
  state.v = b2 * state.v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const auto step_size = static_cast<Scalar>(cfg.lr / c1);
  const auto v_scale = static_cast<Scalar>(1.0 / std::sqrt(c2));
  params.array() -=
      step_size * state.m.array() / (state.v.array().sqrt() * v_scale + static_cast<Scalar>(cfg.eps));
}

}  // namespace quietstep
