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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "quietstep/error.hpp"
#include "quietstep/fields.hpp"

namespace quietstep {

/// Everything one experiment needs: environment, cost, trainer, agent and evaluation grid.
struct ExperimentConfig {
  EnvParams env;
  CostParams cost;
  TrainerConfig trainer;
  AgentSpec agent;
  EvalGrid eval;

  void validate() const {
    env.validate();
    cost.validate();
    trainer.validate();
    agent.mode.validate();
    for (double e : eval.epsilons) {
      if (!(e >= 0.0 && e <= 1.0)) throw Error(Errc::config_parse, "eval.epsilons must lie in [0, 1]");
    }
    if (eval.seeds < 1) throw Error(Errc::config_parse, "eval.seeds must be >= 1");
    if (eval.epsilons.empty() || eval.v_targets.empty()) {
      throw Error(Errc::config_parse, "eval grid must be nonempty");
    }
  }

  bool operator==(const ExperimentConfig&) const = default;
};

template <typename V>
void visit_fields(ExperimentConfig& c, V&& v) {
  v("env", c.env);
  v("cost", c.cost);
  v("trainer", c.trainer);
  v("agent", c.agent);
  v("eval", c.eval);
}

template <typename T>
std::set<std::string> field_names(T& value) {
  std::set<std::string> names;
  visit_fields(value, [&](const char* name, auto&) { names.insert(name); });
  return names;
}

namespace detail {

template <typename T>
struct is_vector : std::false_type {};
template <typename T>
struct is_vector<std::vector<T>> : std::true_type {};

inline std::string where(const YAML::Node& node, const std::string& path) {
  const auto mark = node.Mark();
  std::string loc = mark.is_null() ? std::string("?") : std::to_string(mark.line + 1);
  return "line " + loc + ", field '" + path + "'";
}

struct YamlReader {
  const YAML::Node& node;
  std::string prefix;

  template <typename T>
  void operator()(const char* name, T& field) const {
    const YAML::Node child = node[name];
    if (!child) return;
    const std::string path = prefix + name;
    try {
      if constexpr (FieldStruct<T>) {
        read_struct(child, path, field);
      } else if constexpr (NamedEnum<T>) {
        enum_parse(child.as<std::string>(), field);
      } else {
        field = child.as<T>();
      }
    } catch (const YAML::Exception&) {
      throw Error(Errc::config_parse, where(child, path) + ": value has the wrong type");
    } catch (const Error& e) {
      if (e.code() != Errc::config_parse || std::string_view(e.what()).find("line ") != std::string_view::npos) throw;
      throw Error(Errc::config_parse, where(child, path) + ": " + e.what());
    }
  }

  template <typename T>
  static void read_struct(const YAML::Node& n, const std::string& path, T& value) {
    if (!n.IsMap()) throw Error(Errc::config_parse, where(n, path) + ": expected a mapping");
    const auto known = field_names(value);
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!known.count(key)) {
        throw Error(Errc::config_parse,
                    where(kv.first, path.empty() ? key : path + "." + key) + ": unknown field");
      }
    }
    visit_fields(value, YamlReader{n, path.empty() ? std::string() : path + "."});
  }
};

struct YamlWriter {
  YAML::Emitter& out;

  template <typename T>
  void operator()(const char* name, T& field) const {
    out << YAML::Key << name << YAML::Value;
    if constexpr (FieldStruct<T>) {
      out << YAML::BeginMap;
      visit_fields(field, *this);
      out << YAML::EndMap;
    } else if constexpr (NamedEnum<T>) {
      out << enum_name(field);
    } else if constexpr (is_vector<T>::value) {
      out << YAML::Flow << YAML::BeginSeq;
      for (const auto& x : field) out << x;
      out << YAML::EndSeq;
    } else {
      out << field;
    }
  }
};

}  // namespace detail

/// Parses a YAML experiment file. Missing fields keep their defaults; unknown fields and type
/// errors are reported with their line and dotted path.
inline ExperimentConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::config_parse, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ExperimentConfig cfg;
  if (root.IsNull()) return cfg;
  detail::YamlReader::read_struct(root, "", cfg);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(Errc::config_parse, e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  auto copy = cfg;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::Comment("quietstep experiment configuration") << YAML::Newline;
  out << YAML::BeginMap;
  visit_fields(copy, detail::YamlWriter{out});
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

/// Sets one field by dotted path, e.g. ("trainer.seed", "3") or ("eval.epsilons", "[0, 0.5]").
inline void apply_override(ExperimentConfig& cfg, std::string_view dotted, std::string_view value) {
  YAML::Node root = YAML::Load(serialize_config(cfg));
  std::vector<std::string> parts;
  std::string part;
  std::istringstream ss{std::string(dotted)};
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw Error(Errc::config_parse, "empty override path");
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next || !next.IsMap()) {
      throw Error(Errc::config_parse, "override '" + std::string(dotted) + "': unknown section");
    }
    chain.push_back(next);
  }
  if (!chain.back()[parts.back()]) {
    throw Error(Errc::config_parse, "override '" + std::string(dotted) + "': unknown field");
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(std::string(value));
  } catch (const YAML::Exception&) {
    throw Error(Errc::config_parse, "override '" + std::string(dotted) + "': unparseable value");
  }
  chain.back()[parts.back()] = parsed;
  YAML::Emitter out;
  out << root;
  cfg = parse_config(out.c_str());
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const ExperimentConfig& cfg) { return fnv1a_hex(serialize_config(cfg)); }

}  // namespace quietstep
