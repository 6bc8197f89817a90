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
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quietstep/error.hpp"

namespace quietstep {

struct PointTag {
  std::string method;
  double epsilon = 0.0;
  double v_target = 0.0;
  long long seed = 0;

  bool operator==(const PointTag&) const = default;
};

/// One evaluated trade-off; both objectives are minimized.
struct SolutionPoint {
  double cost = 0.0;
  double tracking_error = 0.0;
  PointTag tag;

  bool operator==(const SolutionPoint&) const = default;
};

/// Non-dominated points, cost strictly increasing and tracking error strictly decreasing.
struct ParetoFront {
  std::vector<SolutionPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct RefPoint {
  double cost_ref = 1.0;
  double err_ref = 1.0;
};

inline bool dominates(const SolutionPoint& p, const SolutionPoint& q) {
  const bool no_worse = p.cost <= q.cost && p.tracking_error <= q.tracking_error;
  const bool better = p.cost < q.cost || p.tracking_error < q.tracking_error;
  return no_worse && better;
}

/// Non-dominated subset. Exact duplicates keep the earliest point in input order.
inline ParetoFront pareto_filter(std::span<const SolutionPoint> points) {
  if (points.empty()) throw Error(Errc::empty_input, "pareto_filter needs at least one point");
  for (const auto& p : points) {
    if (!std::isfinite(p.cost) || !std::isfinite(p.tracking_error)) {
      throw Error(Errc::invalid_params, "solution objectives must be finite");
    }
  }
  // Sort by (cost, error) and keep each point whose error beats every earlier one.
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].cost != points[b].cost) return points[a].cost < points[b].cost;
    return points[a].tracking_error < points[b].tracking_error;
  });
  ParetoFront front;
  for (std::size_t k : idx) {
    const auto& p = points[k];
    if (front.points.empty() || p.tracking_error < front.points.back().tracking_error) {
      if (!front.points.empty() && front.points.back().cost == p.cost) continue;
      front.points.push_back(p);
    }
  }
  return front;
}

/// Area dominated by the front inside the box bounded by the reference point.
/// Points that do not dominate the reference in both objectives contribute nothing.
inline double hypervolume_2d(const ParetoFront& front, const RefPoint& ref) {
  if (!std::isfinite(ref.cost_ref) || !std::isfinite(ref.err_ref)) {
    throw Error(Errc::invalid_ref, "reference point must be finite");
  }
  std::vector<SolutionPoint> inside;
  for (const auto& p : front.points) {
    if (p.cost < ref.cost_ref && p.tracking_error < ref.err_ref) inside.push_back(p);
  }
  if (inside.empty()) return 0.0;
  // Re-filter: clipping can't create dominance, but the caller may pass an unsorted front.
  const auto clean = pareto_filter(inside);
  double area = 0.0;
  for (std::size_t i = 0; i < clean.points.size(); ++i) {
    const double right = i + 1 < clean.points.size() ? clean.points[i + 1].cost : ref.cost_ref;
    area += (right - clean.points[i].cost) * (ref.err_ref - clean.points[i].tracking_error);
  }
  return area;
}

/// Population standard deviation of distances between cost-adjacent front points.
inline double sparsity(const ParetoFront& front) {
  if (front.points.size() <= 2) return 0.0;
  auto pts = front.points;
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.cost < b.cost; });
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    gaps.push_back(std::hypot(pts[i + 1].cost - pts[i].cost,
                              pts[i + 1].tracking_error - pts[i].tracking_error));
  }
  const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
  double var = 0.0;
  for (double g : gaps) var += (g - mean) * (g - mean);
  return std::sqrt(var / static_cast<double>(gaps.size()));
}

struct CostEval {
  double measured_cost = 0.0;
  double epsilon = 0.0;
};

/// Mean of max(0, c - eps).
inline double avg_cost_violation(std::span<const CostEval> evals) {
  if (evals.empty()) throw Error(Errc::empty_input, "avg_cost_violation needs evaluations");
  double sum = 0.0;
  for (const auto& e : evals) sum += std::max(0.0, e.measured_cost - e.epsilon);
  return sum / static_cast<double>(evals.size());
}

struct TrackingEval {
  std::vector<double> velocities;
  double v_target = 0.0;
};

/// Mean over evaluations of the per-episode mean absolute velocity error.
inline double avg_tracking_error(std::span<const TrackingEval> evals) {
  if (evals.empty()) throw Error(Errc::empty_input, "avg_tracking_error needs evaluations");
  double sum = 0.0;
  for (const auto& e : evals) {
    if (e.velocities.empty()) throw Error(Errc::empty_input, "evaluation with no velocity samples");
    double s = 0.0;
    for (double v : e.velocities) s += std::abs(v - e.v_target);
    sum += s / static_cast<double>(e.velocities.size());
  }
  return sum / static_cast<double>(evals.size());
}

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation (Pearson correlation of average ranks). 0 if either side is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::length_mismatch, "spearman: unequal lengths");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace quietstep
