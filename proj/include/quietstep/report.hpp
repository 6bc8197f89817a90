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
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quietstep/error.hpp"
#include "quietstep/evaluation.hpp"
#include "quietstep/pareto.hpp"

namespace quietstep {

struct VelocityRow {
  double v_target = 0.0;
  double hypervolume = 0.0;  // mean over training seeds
  double sparsity = 0.0;     // mean over training seeds
  std::vector<SolutionPoint> front;  // front of the seed-averaged per-epsilon points
  // Points of `front` that survive against every method's points at this velocity, and
  // the area they dominate. A method dominated everywhere gets an empty list and 0.
  std::vector<SolutionPoint> global_front;
  double global_hypervolume = 0.0;
};

struct MethodReport {
  std::string method;
  std::size_t records = 0;
  double avg_cost_violation = 0.0;
  double avg_tracking_error = 0.0;
  double mean_hypervolume = 0.0;  // mean of the velocity rows
  double mean_sparsity = 0.0;
  std::vector<VelocityRow> rows;
  std::map<std::uint64_t, double> hypervolume_by_seed;  // mean over velocities, per training seed
};

struct ParetoReport {
  RefPoint ref;
  std::vector<MethodReport> methods;
};

namespace detail {

struct CellKey {
  std::uint64_t train_seed;
  double v_target;
  double epsilon;
  auto operator<=>(const CellKey&) const = default;
};

struct Mean {
  double cost = 0.0, err = 0.0;
  int n = 0;
  void add(double c, double e) { cost += c; err += e; ++n; }
  double c() const { return cost / n; }
  double e() const { return err / n; }
};

inline std::vector<SolutionPoint> to_points(const std::map<double, Mean>& by_eps, const std::string& method,
                                            double vt, long long seed) {
  std::vector<SolutionPoint> pts;
  for (const auto& [eps, m] : by_eps) pts.push_back({m.c(), m.e(), {method, eps, vt, seed}});
  return pts;
}

}  // namespace detail

/// Table I/II analogues from eval records of one or more methods.
inline ParetoReport build_report(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw Error(Errc::empty_input, "no eval records");
  std::map<std::string, std::vector<const EvalRecord*>> by_method;
  for (const auto& r : records) {
    if (!std::isfinite(r.mean_cost) || !std::isfinite(r.tracking_error) || !std::isfinite(r.epsilon)) {
      throw Error(Errc::schema_mismatch, "non-finite value in eval record of " + r.method);
    }
    by_method[r.method].push_back(&r);
  }

  // Per (method, train seed, velocity, epsilon): average over evaluation seeds.
  std::map<std::string, std::map<detail::CellKey, detail::Mean>> cells;
  double worst_err = 0.0;
  for (const auto& [method, recs] : by_method) {
    auto& mc = cells[method];
    for (const auto* r : recs) mc[{r->train_seed, r->v_target, r->epsilon}].add(r->mean_cost, r->tracking_error);
    for (const auto& [k, m] : mc) worst_err = std::max(worst_err, m.e());
  }

  ParetoReport rep;
  // Shared by every method: cost bound 1, worst observed (seed, epsilon) tracking error.
  rep.ref = RefPoint{1.0, worst_err > 0.0 ? worst_err : 1.0};

  for (const auto& [method, recs] : by_method) {
    MethodReport mr;
    mr.method = method;
    mr.records = recs.size();
    std::vector<CostEval> ce;
    double err_sum = 0.0;
    for (const auto* r : recs) {
      ce.push_back({r->mean_cost, r->epsilon});
      err_sum += r->tracking_error;
    }
    mr.avg_cost_violation = quietstep::avg_cost_violation(ce);
    mr.avg_tracking_error = err_sum / static_cast<double>(recs.size());

    const auto& mc = cells.at(method);
    std::set<double> velocities;
    std::set<std::uint64_t> seeds;
    for (const auto& [k, m] : mc) {
      velocities.insert(k.v_target);
      seeds.insert(k.train_seed);
    }
    for (double vt : velocities) {
      VelocityRow row;
      row.v_target = vt;
      std::map<double, detail::Mean> pooled;
      for (auto seed : seeds) {
        std::map<double, detail::Mean> by_eps;
        for (const auto& [k, m] : mc) {
          if (k.train_seed != seed || k.v_target != vt) continue;
          by_eps[k.epsilon].add(m.c(), m.e());
          pooled[k.epsilon].add(m.c(), m.e());
        }
        if (by_eps.empty()) continue;
        const auto front = pareto_filter(detail::to_points(by_eps, method, vt, static_cast<long long>(seed)));
        const double hv = hypervolume_2d(front, rep.ref);
        row.hypervolume += hv / static_cast<double>(seeds.size());
        row.sparsity += sparsity(front) / static_cast<double>(seeds.size());
        mr.hypervolume_by_seed[seed] += hv / static_cast<double>(velocities.size());
      }
      row.front = pareto_filter(detail::to_points(pooled, method, vt, -1)).points;
      mr.rows.push_back(std::move(row));
    }
    for (const auto& row : mr.rows) {
      mr.mean_hypervolume += row.hypervolume / static_cast<double>(mr.rows.size());
      mr.mean_sparsity += row.sparsity / static_cast<double>(mr.rows.size());
    }
    rep.methods.push_back(std::move(mr));
  }

  // Joint front per velocity across methods.
  std::map<double, std::vector<SolutionPoint>> pooled;
  for (const auto& m : rep.methods) {
    for (const auto& r : m.rows) pooled[r.v_target].insert(pooled[r.v_target].end(), r.front.begin(), r.front.end());
  }
  for (auto& m : rep.methods) {
    for (auto& r : m.rows) {
      const auto& all = pooled.at(r.v_target);
      for (const auto& p : r.front) {
        const bool dominated = std::any_of(all.begin(), all.end(), [&](const auto& q) { return dominates(q, p); });
        if (!dominated) r.global_front.push_back(p);
      }
      if (!r.global_front.empty()) r.global_hypervolume = hypervolume_2d(ParetoFront{r.global_front}, rep.ref);
    }
  }
  return rep;
}

inline const MethodReport* find_method(const ParetoReport& rep, const std::string& name) {
  for (const auto& m : rep.methods) {
    if (m.method == name) return &m;
  }
  return nullptr;
}

inline nlohmann::json report_to_json(const ParetoReport& rep) {
  using nlohmann::json;
  json j;
  j["ref"] = {{"cost", rep.ref.cost_ref}, {"tracking_error", rep.ref.err_ref}};
  json methods = json::array();
  for (const auto& m : rep.methods) {
    json rows = json::array();
    for (const auto& r : m.rows) {
      json front = json::array();
      for (const auto& p : r.front) {
        front.push_back({{"epsilon", p.tag.epsilon}, {"cost", p.cost}, {"tracking_error", p.tracking_error}});
      }
      rows.push_back({{"v_target", r.v_target},
                      {"hypervolume", r.hypervolume},
                      {"sparsity", r.sparsity},
                      {"front", std::move(front)},
                      {"global_front_size", r.global_front.size()},
                      {"global_hypervolume", r.global_hypervolume}});
    }
    json by_seed = json::object();
    for (const auto& [s, hv] : m.hypervolume_by_seed) by_seed[std::to_string(s)] = hv;
    methods.push_back({{"method", m.method},
                       {"records", m.records},
                       {"avg_cost_violation", m.avg_cost_violation},
                       {"avg_tracking_error", m.avg_tracking_error},
                       {"mean_hypervolume", m.mean_hypervolume},
                       {"mean_sparsity", m.mean_sparsity},
                       {"hypervolume_by_seed", std::move(by_seed)},
                       {"rows", std::move(rows)}});
  }
  j["methods"] = std::move(methods);
  return j;
}

/// Plain-text tables: violation/tracking per method, then velocity rows with HV and sparsity.
inline std::string report_to_text(const ParetoReport& rep) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "reference point: cost %.4f, tracking error %.4f m/s\n\n",
                rep.ref.cost_ref, rep.ref.err_ref);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-16s %8s %14s %14s\n", "method", "records", "avg violation", "avg track err");
  os << buf;
  for (const auto& m : rep.methods) {
    std::snprintf(buf, sizeof buf, "%-16s %8zu %14.4f %14.4f\n", m.method.c_str(), m.records,
                  m.avg_cost_violation, m.avg_tracking_error);
    os << buf;
  }
  os << "\n";

  std::set<double> velocities;
  for (const auto& m : rep.methods) {
    for (const auto& r : m.rows) velocities.insert(r.v_target);
  }
  os << "v_target";
  for (const auto& m : rep.methods) {
    std::snprintf(buf, sizeof buf, " | %10.10s HV %10.10s Sp", m.method.c_str(), m.method.c_str());
    os << buf;
  }
  os << "\n";
  for (double vt : velocities) {
    std::snprintf(buf, sizeof buf, "%8.2f", vt);
    os << buf;
    for (const auto& m : rep.methods) {
      const auto it = std::find_if(m.rows.begin(), m.rows.end(), [&](const auto& r) { return r.v_target == vt; });
      if (it == m.rows.end()) {
        std::snprintf(buf, sizeof buf, " | %13s %13s", "-", "-");
      } else {
        std::snprintf(buf, sizeof buf, " | %13.4f %13.4f", it->hypervolume, it->sparsity);
      }
      os << buf;
    }
    os << "\n";
  }
  os << " average";
  for (const auto& m : rep.methods) {
    std::snprintf(buf, sizeof buf, " | %13.4f %13.4f", m.mean_hypervolume, m.mean_sparsity);
    os << buf;
  }
  os << "\n";
  return os.str();
}

}  // namespace quietstep
