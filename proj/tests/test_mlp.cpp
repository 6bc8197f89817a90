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

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "quietstep/mlp.hpp"

namespace qs = quietstep;
using Vec = qs::Vector<double>;
using Mat = qs::Matrix<double>;

namespace {

double loss(const qs::Mlp<double>& net, const Vec& p, const Mat& x, const Mat& cot) {
  return (net.forward(p, x).array() * cot.array()).sum();
}

double rel_err(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

}  // namespace

TEST(Mlp, LayoutAndInit) {
  qs::MlpSpec spec{3, {5, 4}, 2, qs::Activation::tanh};
  qs::Mlp<double> net(spec);
  EXPECT_EQ(net.num_params(), (5u * 3 + 5) + (4u * 5 + 4) + (2u * 4 + 2));
  const Vec p = net.init(7);
  EXPECT_EQ(p, net.init(7));
  EXPECT_NE(p, net.init(8));
  for (std::size_t l = 0; l < net.num_layers(); ++l) EXPECT_TRUE(net.bias(p, l).isZero());
}

TEST(Mlp, ForwardMatchesHandComputation) {
  qs::MlpSpec spec{2, {3}, 1, qs::Activation::tanh};
  qs::Mlp<double> net(spec);
  Vec p = net.init(1);
  Mat x(2, 1);
  x << 0.3, -0.7;
  const Mat w0 = net.weight(p, 0), w1 = net.weight(p, 1);
  const Vec h = (w0 * x).array().tanh();
  const double expected = (w1 * h)(0, 0);
  EXPECT_NEAR(net.forward(p, x)(0, 0), expected, 1e-14);
}

// Backward pass against central differences on 100 random small networks.
TEST(Mlp, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 6), depth(0, 3), batch(1, 4), act(0, 1);
  std::normal_distribution<double> n01;
  double worst_p = 0.0, worst_x = 0.0;
  for (int k = 0; k < 100; ++k) {
    qs::MlpSpec spec;
    spec.input_dim = static_cast<std::size_t>(dim(rng));
    spec.output_dim = static_cast<std::size_t>(dim(rng));
    spec.hidden_dims.clear();
    for (int l = depth(rng); l > 0; --l) spec.hidden_dims.push_back(static_cast<std::size_t>(dim(rng)));
    spec.activation = act(rng) ? qs::Activation::tanh : qs::Activation::elu;
    qs::Mlp<double> net(spec);
    Vec p = net.init(rng());
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.1 * n01(rng);  // non-zero biases too
    const int b = batch(rng);
    Mat x(static_cast<Eigen::Index>(spec.input_dim), b), cot(static_cast<Eigen::Index>(spec.output_dim), b);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
    for (Eigen::Index i = 0; i < cot.size(); ++i) cot.data()[i] = n01(rng);

    const auto g = net.backward(p, x, cot);
    const double h = 1e-6;
    Vec num(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Vec pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      num[i] = (loss(net, pp, x, cot) - loss(net, pm, x, cot)) / (2 * h);
    }
    Mat numx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Mat xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      numx.data()[i] = (loss(net, p, xp, cot) - loss(net, p, xm, cot)) / (2 * h);
    }
    worst_p = std::max(worst_p, rel_err(g.params, num));
    worst_x = std::max(worst_x, rel_err(g.input, numx));
  }
  EXPECT_LT(worst_p, 1e-5);
  EXPECT_LT(worst_x, 1e-5);
}

TEST(Mlp, CachedForwardAgreesWithPlainForward) {
  qs::Mlp<float> net(qs::MlpSpec{4, {8, 8}, 3, qs::Activation::elu});
  const auto p = net.init(3);
  qs::Matrix<float> x = qs::Matrix<float>::Random(4, 5);
  qs::Mlp<float>::Cache cache;
  EXPECT_EQ(net.forward(p, x), net.forward(p, x, cache));
  // One column and a batch go through different product kernels, so only closeness holds.
  EXPECT_TRUE(net.forward_one(p, x.col(2)).isApprox(net.forward(p, x).col(2), 1e-6f));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vec p = Vec::Zero(3), g(3);
  g << 2.0, -0.5, 0.0;
  qs::AdamState<double> st;
  qs::AdamConfig cfg;
  cfg.lr = 0.01;
  qs::adam_update(p, g, st, cfg);
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-9);
  EXPECT_EQ(p[2], 0.0);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, MinimizesQuadratic) {
  Vec p(2);
  p << 3.0, -2.0;
  qs::AdamState<double> st;
  qs::AdamConfig cfg;
  cfg.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    Vec g = 2.0 * p;
    qs::adam_update(p, g, st, cfg);
  }
  EXPECT_LT(p.norm(), 1e-2);
}

TEST(Adam, RejectsBadGradients) {
  Vec p = Vec::Ones(2), g(2);
  g << 1.0, std::numeric_limits<double>::quiet_NaN();
  qs::AdamState<double> st;
  try {
    qs::adam_update(p, g, st, {});
    FAIL();
  } catch (const qs::Error& e) {
    EXPECT_EQ(e.code(), qs::Errc::reject_update);
  }
  EXPECT_EQ(p, Vec::Ones(2));
  EXPECT_EQ(st.step, 0);
  Vec short_g = Vec::Ones(1);
  EXPECT_THROW(qs::adam_update(p, short_g, st, {}), qs::Error);
}

TEST(Mlp, InitVarianceMatchesFanIn) {
  qs::Mlp<double> net(qs::MlpSpec{256, {256}, 4, qs::Activation::elu});
  const Vec p = net.init(99);
  const auto w = net.weight(p, 0);
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  EXPECT_NEAR(var, 1.0 / 256.0, 0.2 / 256.0);
}

TEST(Mlp, ZeroParamsGiveZeroOutputAndBatchMatchesSamples) {
  qs::Mlp<double> net(qs::MlpSpec{3, {4}, 2, qs::Activation::tanh});
  const Mat x = Mat::Random(3, 6);
  EXPECT_TRUE(net.forward(Vec::Zero(static_cast<Eigen::Index>(net.num_params())), x).isZero());
  const Vec p = net.init(5);
  const Mat batched = net.forward(p, x);
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    const Vec xb = x.col(b);
    EXPECT_EQ(net.forward_one(p, xb), batched.col(b));
  }
  EXPECT_THROW(net.forward(p, Mat::Random(2, 1)), qs::Error);
}

TEST(Mlp, LinearGradientAndZeroCotangent) {
  qs::Mlp<double> lin(qs::MlpSpec{1, {}, 1, qs::Activation::tanh});
  Vec p(2);
  p << 1.5, 0.25;  // weight, bias
  Mat x(1, 1), cot(1, 1);
  x << 0.8;
  cot << -2.0;
  const auto g = lin.backward(p, x, cot);
  EXPECT_DOUBLE_EQ(g.params[0], 0.8 * -2.0);
  EXPECT_DOUBLE_EQ(g.params[1], -2.0);

  qs::Mlp<double> net(qs::MlpSpec{3, {4, 4}, 2, qs::Activation::elu});
  const Vec q = net.init(1);
  const Vec before = q;
  const auto z = net.backward(q, Mat::Random(3, 2), Mat::Zero(2, 2));
  EXPECT_TRUE(z.params.isZero());
  EXPECT_EQ(q, before);
}

TEST(Adam, ZeroGradientDecaysMomentsOnly) {
  Vec p(2);
  p << 1.0, -1.0;
  qs::AdamState<double> st;
  qs::adam_update(p, Vec(Vec::Constant(2, 1.0)), st, {});
  const Vec after_one = p;
  const Vec m1 = st.m, v1 = st.v;
  qs::AdamConfig cfg;
  cfg.lr = 0.0;  // isolate the moment update
  qs::adam_update(p, Vec(Vec::Zero(2)), st, cfg);
  EXPECT_EQ(p, after_one);
  EXPECT_TRUE(st.m.isApprox(0.9 * m1));
  EXPECT_TRUE(st.v.isApprox(0.999 * v1));

  // With lr > 0 and a fresh state, a zero gradient leaves params unchanged.
  qs::AdamState<double> fresh;
  Vec r = p;
  qs::adam_update(r, Vec(Vec::Zero(2)), fresh, {});
  EXPECT_EQ(r, p);
}

TEST(Adam, TwoStepsFollowHandRecurrence) {
  Vec p(2);
  p << 0.5, -0.3;
  Vec g1(2), g2(2);
  g1 << 0.2, -1.0;
  g2 << -0.4, 0.5;
  qs::AdamConfig cfg;
  cfg.lr = 0.1;
  qs::AdamState<double> st;
  qs::adam_update(p, g1, st, cfg);
  qs::adam_update(p, g2, st, cfg);

  double expected[2];
  const double init[2] = {0.5, -0.3};
  for (int i = 0; i < 2; ++i) {
    double m = 0, v = 0, x = init[i];
    const double gs[2] = {g1[i], g2[i]};
    for (int t = 1; t <= 2; ++t) {
      m = 0.9 * m + 0.1 * gs[t - 1];
      v = 0.999 * v + 0.001 * gs[t - 1] * gs[t - 1];
      const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
      x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    expected[i] = x;
  }
  EXPECT_NEAR(p[0], expected[0], 1e-12);
  EXPECT_NEAR(p[1], expected[1], 1e-12);
}
