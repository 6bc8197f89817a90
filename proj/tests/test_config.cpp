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

#include <random>
#include <string>

#include <gtest/gtest.h>

#include "quietstep/config.hpp"

namespace qs = quietstep;

namespace {

qs::Error parse_failure(const std::string& text) {
  try {
    qs::parse_config(text);
  } catch (const qs::Error& e) {
    return e;
  }
  ADD_FAILURE() << "accepted:\n" << text;
  return qs::Error(qs::Errc::io, "");
}

}  // namespace

TEST(Config, DefaultsAndEmptyDocument) {
  const auto cfg = qs::parse_config("");
  EXPECT_EQ(cfg, qs::ExperimentConfig{});
  EXPECT_EQ(cfg.eval.epsilons.size(), 8u);
  EXPECT_EQ(cfg.eval.v_targets.size(), 7u);
  EXPECT_EQ(cfg.eval.seeds, 3);
  EXPECT_EQ(cfg.cost.F_max, 100.0);
  EXPECT_EQ(cfg.trainer.pid.kp, 0.5);
}

TEST(Config, RoundTripIsFieldwiseIdentical) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int i = 0; i < 50; ++i) {
    qs::ExperimentConfig cfg;
    cfg.cost.sigma_F = u(rng) * 40;
    cfg.cost.lambda1 = u(rng) / 3;
    cfg.cost.convention = i % 2 ? qs::CostConvention::literal : qs::CostConvention::monotone;
    cfg.env.c1 = u(rng);
    cfg.trainer.actor_lr = u(rng) * 1e-4;
    cfg.trainer.seed = rng();
    cfg.trainer.freeze_lambda = i % 3 == 0;
    cfg.agent.hidden_dims = {static_cast<std::size_t>(8 + i), 32, 4};
    cfg.agent.mode.kind = static_cast<qs::Conditioning>(i % 3);
    cfg.eval.epsilons = {0.0, u(rng) / 3, 1.0};
    const auto text = qs::serialize_config(cfg);
    const auto back = qs::parse_config(text);
    EXPECT_EQ(back, cfg) << text;
    EXPECT_EQ(qs::serialize_config(back), text);
  }
}

TEST(Config, SerializedFormIsNestedWithComments) {
  const auto text = qs::serialize_config(qs::ExperimentConfig{});
  EXPECT_EQ(text.rfind("#", 0), 0u);
  EXPECT_NE(text.find("trainer:"), std::string::npos);
  EXPECT_NE(text.find("  pid:"), std::string::npos);
}

TEST(Config, UnknownFieldReportsLineAndPath) {
  const auto e = parse_failure("env:\n  dt: 0.02\n  colour: red\n");
  EXPECT_EQ(e.code(), qs::Errc::config_parse);
  EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("env.colour"), std::string::npos) << e.what();

  const auto top = parse_failure("bogus: 1\n");
  EXPECT_NE(std::string(top.what()).find("bogus"), std::string::npos);
}

TEST(Config, WrongTypeReportsLineAndPath) {
  const auto e = parse_failure("trainer:\n  pid:\n    kp: fast\n");
  EXPECT_EQ(e.code(), qs::Errc::config_parse);
  EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("trainer.pid.kp"), std::string::npos) << e.what();

  const auto en = parse_failure("cost:\n  convention: loud\n");
  EXPECT_NE(std::string(en.what()).find("cost.convention"), std::string::npos) << en.what();
  EXPECT_EQ(parse_failure("env: 3\n").code(), qs::Errc::config_parse);
  EXPECT_EQ(parse_failure("env: [unclosed\n").code(), qs::Errc::config_parse);
}

TEST(Config, SemanticValidation) {
  EXPECT_EQ(parse_failure("eval:\n  epsilons: [0.0, 1.5]\n").code(), qs::Errc::config_parse);
  EXPECT_EQ(parse_failure("eval:\n  seeds: 0\n").code(), qs::Errc::config_parse);
  EXPECT_EQ(parse_failure("eval:\n  v_targets: []\n").code(), qs::Errc::config_parse);
  EXPECT_THROW(qs::parse_config("cost:\n  sigma_F: -1\n"), qs::Error);
  EXPECT_THROW(qs::parse_config("trainer:\n  gamma: 1.5\n"), qs::Error);
}

TEST(Config, DottedOverrides) {
  auto cfg = qs::parse_config("trainer:\n  iterations: 10\n");
  qs::apply_override(cfg, "trainer.iterations", "25");
  qs::apply_override(cfg, "trainer.pid.ki", "0.2");
  qs::apply_override(cfg, "agent.conditioning.kind", "rc");
  qs::apply_override(cfg, "eval.epsilons", "[0, 0.5]");
  EXPECT_EQ(cfg.trainer.iterations, 25);
  EXPECT_EQ(cfg.trainer.pid.ki, 0.2);
  EXPECT_EQ(cfg.agent.mode.kind, qs::Conditioning::rc);
  EXPECT_EQ(cfg.eval.epsilons, (std::vector<double>{0.0, 0.5}));
  const auto before = cfg;
  EXPECT_THROW(qs::apply_override(cfg, "trainer.nope", "1"), qs::Error);
  EXPECT_THROW(qs::apply_override(cfg, "trainer.iterations", "many"), qs::Error);
  EXPECT_EQ(cfg, before);
}

TEST(Config, HashTracksContent) {
  qs::ExperimentConfig a;
  auto b = a;
  EXPECT_EQ(qs::config_hash(a), qs::config_hash(b));
  EXPECT_EQ(qs::config_hash(a).size(), 16u);
  b.agent.mode.kind = qs::Conditioning::none;
  EXPECT_NE(qs::config_hash(a), qs::config_hash(b));
  EXPECT_EQ(qs::config_hash(qs::parse_config(qs::serialize_config(a))), qs::config_hash(a));
  // FNV-1a 64 reference vectors.
  EXPECT_EQ(qs::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(qs::fnv1a_hex("a"), "af63dc4c8601ec8c");
}
