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
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "quietstep/error.hpp"

namespace quietstep {

inline constexpr std::size_t kNumFeet = 4;

/// Per-foot contact force magnitude (N) and impact speed (m/s) for one control step.
struct ContactSnapshot {
  std::array<double, kNumFeet> forces{};
  std::array<double, kNumFeet> impact_velocities{};

  bool operator==(const ContactSnapshot&) const = default;
};

enum class CostConvention {
  /// Exponents exactly as printed: decreasing in force and impact speed.
  literal,
  /// Increasing in force and impact speed; the only convention that can be normalized.
  monotone,
};

struct CostParams {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double sigma_F = 50.0;   // N
  double sigma_v = 0.5;    // m^2/s^2
  double F_max = 100.0;    // N
  double v_clip = 2.0;     // m/s
  CostConvention convention = CostConvention::monotone;

  void validate() const {
    auto bad = [](const char* field) {
      throw Error(Errc::invalid_params, std::string("cost parameter out of range: ") + field);
    };
    if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) bad("lambda1");
    if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) bad("lambda2");
    if (!(sigma_F > 0.0) || !std::isfinite(sigma_F)) bad("sigma_F");
    if (!(sigma_v > 0.0) || !std::isfinite(sigma_v)) bad("sigma_v");
    if (!(F_max > 0.0) || !std::isfinite(F_max)) bad("F_max");
    if (!(v_clip > 0.0) || !std::isfinite(v_clip)) bad("v_clip");
  }

  bool operator==(const CostParams&) const = default;
};

inline void validate(const ContactSnapshot& snapshot) {
  for (std::size_t i = 0; i < kNumFeet; ++i) {
    if (!std::isfinite(snapshot.forces[i]) || snapshot.forces[i] < 0.0 ||
        !std::isfinite(snapshot.impact_velocities[i]) || snapshot.impact_velocities[i] < 0.0) {
      throw Error(Errc::invalid_params,
                  "contact snapshot entries must be finite and non-negative (foot " +
                      std::to_string(i) + ")");
    }
  }
}

namespace detail {

inline double raw_cost_unchecked(const ContactSnapshot& s, const CostParams& p) {
  double force_term = 0.0;
  double impact_term = 0.0;
  for (std::size_t i = 0; i < kNumFeet; ++i) {
    const double f = s.forces[i];
    const double v2 = s.impact_velocities[i] * s.impact_velocities[i];
    if (p.convention == CostConvention::monotone) {
      force_term += std::exp((f - p.F_max) / p.sigma_F);
      impact_term += -std::expm1(-v2 / p.sigma_v);
    } else {
      force_term += std::exp((p.F_max - f) / p.sigma_F);
      impact_term += std::exp(-v2 / p.sigma_v);
    }
  }
  return p.lambda1 * force_term + p.lambda2 * impact_term;
}

}  // namespace detail

/// Noise cost of one contact snapshot. Sums a force term and an impact term over the four feet.
inline double raw_cost(const ContactSnapshot& snapshot, const CostParams& params) {
  params.validate();
  validate(snapshot);
  return detail::raw_cost_unchecked(snapshot, params);
}

/// Affine min-max rescale of raw_cost over the box [0, F_max] x [0, v_clip] per foot.
///
/// Inputs are clamped into the box first, so the result always lies in [0, 1]; the all-zero
/// snapshot maps to 0 and every foot at (F_max, v_clip) maps to 1.
inline double normalized_cost(const ContactSnapshot& snapshot, const CostParams& params) {
  params.validate();
  validate(snapshot);
  if (params.convention != CostConvention::monotone) {
    throw Error(Errc::invalid_params, "normalization is defined for the monotone convention only");
  }
  ContactSnapshot lo{};
  ContactSnapshot hi{};
  hi.forces.fill(params.F_max);
  hi.impact_velocities.fill(params.v_clip);
  const double raw_min = detail::raw_cost_unchecked(lo, params);
  const double raw_max = detail::raw_cost_unchecked(hi, params);
  if (!(raw_max > raw_min)) {
    throw Error(Errc::invalid_params, "degenerate normalization range (raw_max <= raw_min)");
  }
  ContactSnapshot clamped = snapshot;
  for (std::size_t i = 0; i < kNumFeet; ++i) {
    clamped.forces[i] = std::clamp(clamped.forces[i], 0.0, params.F_max);
    clamped.impact_velocities[i] = std::clamp(clamped.impact_velocities[i], 0.0, params.v_clip);
  }
  const double raw = detail::raw_cost_unchecked(clamped, params);
  return std::clamp((raw - raw_min) / (raw_max - raw_min), 0.0, 1.0);
}

}  // namespace quietstep
