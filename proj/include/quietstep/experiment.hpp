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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quietstep/checkpoint.hpp"
#include "quietstep/config.hpp"
#include "quietstep/error.hpp"
#include "quietstep/evaluation.hpp"
#include "quietstep/records.hpp"
#include "quietstep/trainer.hpp"

namespace quietstep {

/// Training recipe selected by --mode.
///   cncp | conc | rc      conditional policy, PID-Lagrangian over all levels
///   ppo                   unconditioned PPO on the tracking reward only
///   oracle_safe:E         unconditioned PPO-Lagrangian at the single budget E
///   oracle_morl:B         unconditioned PPO on reward - B * cost
struct MethodSpec {
  std::string name;
  TrainMode mode = TrainMode::lagrangian;
  Conditioning conditioning = Conditioning::cncp;
  std::optional<double> fixed_epsilon;
  double morl_beta = 0.0;

  /// Directory-safe identifier, e.g. "oracle_safe_e0.2".
  std::string tag() const {
    std::ostringstream os;
    os << name;
    if (fixed_epsilon) os << "_e" << *fixed_epsilon;
    if (mode == TrainMode::morl) os << "_b" << morl_beta;
    return os.str();
  }
};

namespace detail {

inline double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::invalid_params, "bad " + what + " '" + s + "'");
}

}  // namespace detail

/// Parses a mode string. "oracle_safe" without a budget returns nullopt fixed_epsilon; the
/// caller expands it over the evaluation budgets.
inline MethodSpec parse_method(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::optional<std::string> arg =
      colon == std::string::npos ? std::nullopt : std::optional<std::string>(text.substr(colon + 1));
  MethodSpec m;
  m.name = head;
  if (head == "cncp" || head == "conc" || head == "rc") {
    if (arg) throw Error(Errc::invalid_params, "mode " + head + " takes no argument");
    m.conditioning = parse_conditioning(head);
    return m;
  }
  m.conditioning = Conditioning::none;
  if (head == "ppo") {
    if (arg) throw Error(Errc::invalid_params, "mode ppo takes no argument");
    m.mode = TrainMode::unconstrained;
    return m;
  }
  if (head == "oracle_safe") {
    if (arg) {
      m.fixed_epsilon = detail::parse_number(*arg, "budget");
      check_epsilon(*m.fixed_epsilon);
    }
    return m;
  }
  if (head == "oracle_morl") {
    if (!arg) throw Error(Errc::invalid_params, "oracle_morl needs a cost weight, e.g. oracle_morl:0.5");
    m.mode = TrainMode::morl;
    m.morl_beta = detail::parse_number(*arg, "cost weight");
    if (m.morl_beta < 0.0) throw Error(Errc::invalid_params, "cost weight must be >= 0");
    return m;
  }
  throw Error(Errc::invalid_params, "unknown mode '" + text + "'");
}

/// The config a method actually trains with: only the agent's conditioning changes.
inline ExperimentConfig method_config(ExperimentConfig cfg, const MethodSpec& m) {
  cfg.agent.mode.kind = m.conditioning;
  return cfg;
}

template <typename Scalar = float>
typename Trainer<Scalar>::Setup make_setup(const ExperimentConfig& cfg, const MethodSpec& m) {
  typename Trainer<Scalar>::Setup su;
  su.env = cfg.env;
  su.cost = cfg.cost;
  su.agent = cfg.agent;
  su.agent.mode.kind = m.conditioning;
  su.config = cfg.trainer;
  su.mode = m.mode;
  su.morl_beta = m.morl_beta;
  // Oracles keep num_levels parallel rollouts so every method sees the same step budget.
  if (m.fixed_epsilon) su.levels.assign(static_cast<std::size_t>(cfg.trainer.num_levels), *m.fixed_epsilon);
  return su;
}

inline std::string file_hash(const std::filesystem::path& path) { return fnv1a_hex(read_text(path)); }

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path checkpoint() const { return dir / "checkpoint.json"; }
  std::filesystem::path metrics() const { return dir / "metrics.jsonl"; }
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
};

inline nlohmann::json make_manifest(const ExperimentConfig& cfg, const MethodSpec& m, const std::string& version) {
  nlohmann::json j;
  j["kind"] = "manifest";
  j["method"] = m.name;
  j["mode"] = m.tag();
  j["train_mode"] = std::string(to_string(m.mode));
  j["fixed_epsilon"] = m.fixed_epsilon ? nlohmann::json(*m.fixed_epsilon) : nlohmann::json(nullptr);
  j["morl_beta"] = m.morl_beta;
  j["seed"] = cfg.trainer.seed;
  j["config_hash"] = config_hash(cfg);
  j["config"] = to_json_fields(cfg);
  j["version"] = version;
  return j;
}

/// Method and config recorded in a manifest; enough to repeat the run.
inline std::pair<ExperimentConfig, MethodSpec> manifest_run(const nlohmann::json& j) {
  try {
    auto cfg = from_json_fields<ExperimentConfig>(j.at("config"));
    cfg.validate();
    std::string mode = j.at("method").get<std::string>();
    if (!j.at("fixed_epsilon").is_null()) mode += ":" + std::to_string(j.at("fixed_epsilon").get<double>());
    auto m = parse_method(mode);
    if (m.fixed_epsilon) m.fixed_epsilon = j.at("fixed_epsilon").get<double>();  // exact value
    if (j.at("train_mode").get<std::string>() == "morl") {
      m.mode = TrainMode::morl;
      m.morl_beta = j.at("morl_beta").get<double>();
    }
    return {cfg, m};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema_mismatch, std::string("manifest: ") + e.what());
  }
}

using ProgressFn = std::function<void(const IterationMetrics&)>;

/// Trains one method and writes checkpoint.json, metrics.jsonl and manifest.json into `dir`.
/// Returns the final checkpoint.
inline Checkpoint<float> train_run(const ExperimentConfig& base, const MethodSpec& m,
                                   const std::filesystem::path& dir, const std::string& version,
                                   const ProgressFn& progress = {}) {
  if (m.name == "oracle_safe" && !m.fixed_epsilon) {
    throw Error(Errc::invalid_params, "oracle_safe run needs a budget");
  }
  const auto cfg = method_config(base, m);
  cfg.validate();
  std::filesystem::create_directories(dir);
  RunPaths paths{dir};

  Trainer<float> trainer(make_setup<float>(cfg, m));
  std::ofstream metrics(paths.metrics());
  if (!metrics) throw Error(Errc::io, "cannot write " + paths.metrics().string());
  const int every = cfg.trainer.checkpoint_every;
  for (int i = 0; i < cfg.trainer.iterations; ++i) {
    const auto im = trainer.iterate();
    metrics << to_json(im).dump() << '\n';
    if (progress) progress(im);
    if (every > 0 && (i + 1) % every == 0 && i + 1 < cfg.trainer.iterations) {
      save_checkpoint(paths.checkpoint(), make_checkpoint(trainer, m.name, m.fixed_epsilon));
    }
  }
  metrics.close();
  auto ck = make_checkpoint(trainer, m.name, m.fixed_epsilon);
  save_checkpoint(paths.checkpoint(), ck);

  auto manifest = make_manifest(cfg, m, version);
  manifest["iterations"] = cfg.trainer.iterations;
  manifest["checkpoint"] = paths.checkpoint().filename().string();
  manifest["checkpoint_hash"] = file_hash(paths.checkpoint());
  manifest["metrics_hash"] = file_hash(paths.metrics());
  std::ofstream mf(paths.manifest());
  if (!mf) throw Error(Errc::io, "cannot write " + paths.manifest().string());
  mf << manifest.dump(2) << '\n';
  return ck;
}

/// Deterministic evaluation over the grid. Unconditioned oracles are evaluated at their
/// training budget only, and their records carry that budget as epsilon.
template <typename Scalar>
std::vector<EvalRecord> evaluate_checkpoint(const Checkpoint<Scalar>& ck, const EvalGrid& grid) {
  auto records = evaluate_grid(ck.agent, ck.env, ck.cost, grid, ck.method, ck.fixed_epsilon);
  for (auto& r : records) r.train_seed = ck.seed;
  return records;
}

inline void write_eval_log(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace quietstep
