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
#include <istream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "quietstep/error.hpp"
#include "quietstep/evaluation.hpp"
#include "quietstep/steer.hpp"
#include "quietstep/trainer.hpp"

// Line-delimited JSON records. Every record carries "kind"; readers reject unknown kinds.
//   eval       method, epsilon, v_target, seed, train_seed, mean_cost, tracking_error (m/s)
//   telemetry  tick, episode, v, v_target (m/s), epsilon, step_cost, rolling_cost, db_proxy,
//              contact {forces (N), impact_velocities (m/s)}
//   command    tick (applied_at_tick), epsilon?, v_target?, pause?
//   metrics    per training iteration; written by train, not read back by pareto

namespace quietstep {

using json = nlohmann::json;

inline json to_json(const EvalRecord& r) {
  return json{{"kind", "eval"},           {"method", r.method},
              {"epsilon", r.epsilon},     {"v_target", r.v_target},
              {"seed", r.seed},           {"train_seed", r.train_seed},
              {"mean_cost", r.mean_cost}, {"tracking_error", r.tracking_error}};
}

inline json to_json(const ContactSnapshot& c) {
  return json{{"forces", c.forces}, {"impact_velocities", c.impact_velocities}};
}

inline json to_json(const TelemetryFrame& f) {
  return json{{"kind", "telemetry"},
              {"tick", f.tick},
              {"episode", f.episode},
              {"v", f.v},
              {"v_target", f.v_target},
              {"epsilon", f.epsilon},
              {"step_cost", f.step_cost},
              {"rolling_cost", f.rolling_cost},
              {"db_proxy", f.db_proxy},
              {"contact", to_json(f.contact)}};
}

inline json to_json(const SteerCommand& c, std::int64_t applied_at_tick) {
  json j{{"kind", "command"}, {"tick", applied_at_tick}};
  if (c.epsilon) j["epsilon"] = *c.epsilon;
  if (c.v_target) j["v_target"] = *c.v_target;
  if (c.pause) j["pause"] = *c.pause;
  return j;
}

inline json to_json(const IterationMetrics& m) {
  json levels = json::array();
  for (const auto& l : m.levels) {
    levels.push_back({{"epsilon", l.epsilon},
                      {"lambda", l.lambda},
                      {"mean_cost", l.mean_cost},
                      {"measured_cost", l.measured_cost},
                      {"mean_reward", l.mean_reward},
                      {"tracking_error", l.mean_tracking_error}});
  }
  return json{{"kind", "metrics"},
              {"iteration", m.iteration},
              {"env_steps", m.env_steps},
              {"reward_weight", m.reward_weight},
              {"actor_loss", m.actor_loss},
              {"critic_loss_r", m.critic_loss_r},
              {"critic_loss_c", m.critic_loss_c},
              {"levels", std::move(levels)}};
}

namespace detail {

template <typename T>
T get_field(const json& j, const char* name) {
  if (!j.contains(name)) throw Error(Errc::schema_mismatch, std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::schema_mismatch, std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace detail

inline EvalRecord eval_from_json(const json& j) {
  EvalRecord r;
  r.method = detail::get_field<std::string>(j, "method");
  r.epsilon = detail::get_field<double>(j, "epsilon");
  r.v_target = detail::get_field<double>(j, "v_target");
  r.seed = detail::get_field<std::uint64_t>(j, "seed");
  r.train_seed = j.contains("train_seed") ? detail::get_field<std::uint64_t>(j, "train_seed") : 0;
  r.mean_cost = detail::get_field<double>(j, "mean_cost");
  r.tracking_error = detail::get_field<double>(j, "tracking_error");
  return r;
}

inline TelemetryFrame telemetry_from_json(const json& j) {
  TelemetryFrame f;
  f.tick = detail::get_field<std::int64_t>(j, "tick");
  f.episode = j.contains("episode") ? detail::get_field<std::int64_t>(j, "episode") : 0;
  f.v = detail::get_field<double>(j, "v");
  f.v_target = detail::get_field<double>(j, "v_target");
  f.epsilon = detail::get_field<double>(j, "epsilon");
  f.step_cost = detail::get_field<double>(j, "step_cost");
  f.rolling_cost = detail::get_field<double>(j, "rolling_cost");
  f.db_proxy = detail::get_field<double>(j, "db_proxy");
  if (j.contains("contact")) {
    const auto& c = j.at("contact");
    f.contact.forces = detail::get_field<decltype(f.contact.forces)>(c, "forces");
    f.contact.impact_velocities =
        detail::get_field<decltype(f.contact.impact_velocities)>(c, "impact_velocities");
  }
  return f;
}

/// Parses a command body. Unknown fields and wrong types are reported per field; bounds are
/// checked separately by SteerCommand::validate.
inline SteerCommand command_from_json(const json& j, std::vector<FieldError>& errors) {
  SteerCommand c;
  if (!j.is_object()) {
    errors.push_back({"", "command must be a JSON object"});
    return c;
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "epsilon" || key == "v_target") {
      if (!value.is_number()) {
        errors.push_back({key, "must be a number"});
        continue;
      }
      (key == "epsilon" ? c.epsilon : c.v_target) = value.get<double>();
    } else if (key == "pause") {
      if (!value.is_boolean()) {
        errors.push_back({key, "must be true or false"});
        continue;
      }
      c.pause = value.get<bool>();
    } else if (key == "kind" || key == "tick") {
      // tolerated so that exported command records can be replayed
    } else {
      errors.push_back({key, "unknown field"});
    }
  }
  if (errors.empty() && c.empty()) errors.push_back({"", "command sets no field"});
  return c;
}

struct CommandRecord {
  std::int64_t tick = 0;
  SteerCommand command;
};

using LogRecord = std::variant<EvalRecord, TelemetryFrame, CommandRecord>;

inline LogRecord parse_log_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::schema_mismatch, std::string("not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::schema_mismatch, "record is not an object");
  const auto kind = detail::get_field<std::string>(j, "kind");
  if (kind == "eval") return eval_from_json(j);
  if (kind == "telemetry") return telemetry_from_json(j);
  if (kind == "command") {
    std::vector<FieldError> errs;
    CommandRecord r;
    r.tick = detail::get_field<std::int64_t>(j, "tick");
    r.command = command_from_json(j, errs);
    if (!errs.empty()) throw Error(Errc::schema_mismatch, "command field '" + errs.front().field + "': " + errs.front().message);
    return r;
  }
  throw Error(Errc::schema_mismatch, "unknown record kind '" + kind + "'");
}

/// Reads every record; errors name the line number.
inline std::vector<LogRecord> read_log(std::istream& in, const std::string& name = "log") {
  std::vector<LogRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_log_record(line));
    } catch (const Error& e) {
      throw Error(e.code(), name + ":" + std::to_string(lineno) + ": " + e.message());
    }
  }
  return out;
}

inline std::vector<LogRecord> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return read_log(in, path.string());
}

inline std::vector<EvalRecord> eval_records(const std::vector<LogRecord>& records) {
  std::vector<EvalRecord> out;
  for (const auto& r : records) {
    if (const auto* e = std::get_if<EvalRecord>(&r)) out.push_back(*e);
  }
  return out;
}

}  // namespace quietstep
