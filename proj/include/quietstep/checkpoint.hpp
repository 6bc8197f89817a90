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

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quietstep/agent.hpp"
#include "quietstep/config.hpp"
#include "quietstep/error.hpp"
#include "quietstep/fields.hpp"
#include "quietstep/trainer.hpp"

namespace quietstep {

using json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "quietstep-checkpoint";

namespace detail {

struct JsonWriter {
  json& out;

  template <typename T>
  void operator()(const char* name, T& field) const {
    if constexpr (FieldStruct<T>) {
      json sub = json::object();
      visit_fields(field, JsonWriter{sub});
      out[name] = std::move(sub);
    } else if constexpr (NamedEnum<T>) {
      out[name] = enum_name(field);
    } else {
      out[name] = field;
    }
  }
};

struct JsonReader {
  const json& in;

  template <typename T>
  void operator()(const char* name, T& field) const {
    if (!in.contains(name)) {
      throw Error(Errc::schema_mismatch, std::string("missing field '") + name + "'");
    }
    const auto& v = in.at(name);
    try {
      if constexpr (FieldStruct<T>) {
        visit_fields(field, JsonReader{v});
      } else if constexpr (NamedEnum<T>) {
        enum_parse(v.get<std::string>(), field);
      } else {
        field = v.get<T>();
      }
    } catch (const json::exception& e) {
      throw Error(Errc::schema_mismatch, std::string("field '") + name + "': " + e.what());
    }
  }
};

}  // namespace detail

template <typename T>
json to_json_fields(T value) {
  json j = json::object();
  visit_fields(value, detail::JsonWriter{j});
  return j;
}

template <typename T>
T from_json_fields(const json& j) {
  T value{};
  visit_fields(value, detail::JsonReader{j});
  return value;
}

/// Flat parameter array with its network shape. float -> double -> float is exact, so a
/// checkpoint written and read back reproduces every parameter bit for bit.
template <typename Scalar>
json params_to_json(const Mlp<Scalar>& net, const Vector<Scalar>& params) {
  json j;
  j["input_dim"] = net.spec().input_dim;
  j["hidden_dims"] = net.spec().hidden_dims;
  j["output_dim"] = net.spec().output_dim;
  j["activation"] = enum_name(net.spec().activation);
  std::vector<double> values(static_cast<std::size_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) values[static_cast<std::size_t>(i)] = params[i];
  j["params"] = std::move(values);
  return j;
}

template <typename Scalar>
Vector<Scalar> params_from_json(const Mlp<Scalar>& net, const json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<std::size_t>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  spec.output_dim = j.at("output_dim").get<std::size_t>();
  enum_parse(j.at("activation").get<std::string>(), spec.activation);
  if (!(spec == net.spec())) throw Error(Errc::schema_mismatch, "network shape differs from the agent spec");
  const auto values = j.at("params").get<std::vector<double>>();
  if (values.size() != net.num_params()) throw Error(Errc::schema_mismatch, "parameter count mismatch");
  Vector<Scalar> p(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) p[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(values[i]);
  if (!p.allFinite()) throw Error(Errc::schema_mismatch, "non-finite parameter");
  return p;
}

/// A trained agent with the environment it was trained on and how it was trained.
template <typename Scalar>
struct Checkpoint {
  std::string method;                    // cncp, conc, rc, ppo, oracle_safe, oracle_morl
  TrainMode train_mode = TrainMode::lagrangian;
  std::optional<double> fixed_epsilon;   // oracle_safe
  std::optional<double> morl_beta;       // oracle_morl
  std::uint64_t seed = 0;
  int iteration = 0;
  EnvParams env;
  CostParams cost;
  Agent<Scalar> agent;
  std::vector<double> levels;
  std::vector<double> lambdas;
};

template <typename Scalar>
json checkpoint_to_json(const Checkpoint<Scalar>& ck) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["method"] = ck.method;
  j["train_mode"] = std::string(to_string(ck.train_mode));
  j["fixed_epsilon"] = ck.fixed_epsilon ? json(*ck.fixed_epsilon) : json(nullptr);
  j["morl_beta"] = ck.morl_beta ? json(*ck.morl_beta) : json(nullptr);
  j["seed"] = ck.seed;
  j["iteration"] = ck.iteration;
  j["env"] = to_json_fields(ck.env);
  j["cost"] = to_json_fields(ck.cost);
  j["agent"] = to_json_fields(ck.agent.spec());
  const auto& a = ck.agent;
  json policy;
  policy["mean_net"] = params_to_json(a.policy_net(), a.policy().mean_net);
  policy["log_std"] = std::vector<double>{a.policy().log_std[0], a.policy().log_std[1]};
  j["policy"] = std::move(policy);
  json critics;
  if (a.decomposed()) {
    critics["xi_r"] = params_to_json(a.feature_net(), a.critics().xi_r);
    critics["xi_c"] = params_to_json(a.feature_net(), a.critics().xi_c);
    critics["w_r"] = params_to_json(a.weight_net(), a.critics().w_r);
    critics["w_c"] = params_to_json(a.weight_net(), a.critics().w_c);
  } else {
    critics["plain_r"] = params_to_json(a.plain_net(), a.critics().plain_r);
    critics["plain_c"] = params_to_json(a.plain_net(), a.critics().plain_c);
  }
  j["critics"] = std::move(critics);
  j["levels"] = ck.levels;
  j["lambdas"] = ck.lambdas;
  return j;
}

template <typename Scalar>
Checkpoint<Scalar> checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", std::string()) != kCheckpointFormat) {
    throw Error(Errc::schema_mismatch, "not a quietstep checkpoint");
  }
  const int version = j.at("version").get<int>();
  if (version != kCheckpointVersion) {
    throw Error(Errc::checkpoint_version, "checkpoint version " + std::to_string(version) +
                                              ", expected " + std::to_string(kCheckpointVersion));
  }
  try {
    Checkpoint<Scalar> ck;
    ck.method = j.at("method").get<std::string>();
    const auto mode = j.at("train_mode").get<std::string>();
    if (mode == "lagrangian") ck.train_mode = TrainMode::lagrangian;
    else if (mode == "unconstrained") ck.train_mode = TrainMode::unconstrained;
    else if (mode == "morl") ck.train_mode = TrainMode::morl;
    else throw Error(Errc::schema_mismatch, "unknown train_mode '" + mode + "'");
    if (!j.at("fixed_epsilon").is_null()) ck.fixed_epsilon = j.at("fixed_epsilon").get<double>();
    if (!j.at("morl_beta").is_null()) ck.morl_beta = j.at("morl_beta").get<double>();
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.iteration = j.at("iteration").get<int>();
    ck.env = from_json_fields<EnvParams>(j.at("env"));
    ck.cost = from_json_fields<CostParams>(j.at("cost"));
    ck.agent = Agent<Scalar>(from_json_fields<AgentSpec>(j.at("agent")));
    auto& a = ck.agent;
    a.policy().mean_net = params_from_json(a.policy_net(), j.at("policy").at("mean_net"));
    const auto ls = j.at("policy").at("log_std").get<std::vector<double>>();
    if (ls.size() != kActDim) throw Error(Errc::schema_mismatch, "log_std must have 2 entries");
    a.policy().log_std = Vector<Scalar>(static_cast<Eigen::Index>(kActDim));
    for (std::size_t k = 0; k < kActDim; ++k) a.policy().log_std[static_cast<Eigen::Index>(k)] = static_cast<Scalar>(ls[k]);
    const auto& c = j.at("critics");
    if (a.decomposed()) {
      a.critics().xi_r = params_from_json(a.feature_net(), c.at("xi_r"));
      a.critics().xi_c = params_from_json(a.feature_net(), c.at("xi_c"));
      a.critics().w_r = params_from_json(a.weight_net(), c.at("w_r"));
      a.critics().w_c = params_from_json(a.weight_net(), c.at("w_c"));
    } else {
      a.critics().plain_r = params_from_json(a.plain_net(), c.at("plain_r"));
      a.critics().plain_c = params_from_json(a.plain_net(), c.at("plain_c"));
    }
    ck.levels = j.at("levels").get<std::vector<double>>();
    ck.lambdas = j.at("lambdas").get<std::vector<double>>();
    return ck;
  } catch (const json::exception& e) {
    throw Error(Errc::schema_mismatch, std::string("checkpoint: ") + e.what());
  }
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<Scalar>& ck) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << checkpoint_to_json(ck).dump() << '\n';
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(Errc::schema_mismatch, path.string() + ": " + e.what());
  }
  return checkpoint_from_json<Scalar>(j);
}

/// Snapshot of a trainer's agent and multipliers.
template <typename Scalar>
Checkpoint<Scalar> make_checkpoint(const Trainer<Scalar>& trainer, std::string method,
                                   std::optional<double> fixed_epsilon = std::nullopt) {
  Checkpoint<Scalar> ck;
  ck.method = std::move(method);
  ck.train_mode = trainer.setup().mode;
  ck.fixed_epsilon = fixed_epsilon;
  if (trainer.setup().mode == TrainMode::morl) ck.morl_beta = trainer.setup().morl_beta;
  ck.seed = trainer.setup().config.seed;
  ck.iteration = trainer.iteration();
  ck.env = trainer.setup().env;
  ck.cost = trainer.setup().cost;
  ck.agent = trainer.agent();
  ck.levels = trainer.levels();
  for (const auto& ls : trainer.lagrange_states()) ck.lambdas.push_back(ls.lambda);
  return ck;
}

}  // namespace quietstep
