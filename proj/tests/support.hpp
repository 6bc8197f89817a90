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
#include <filesystem>
#include <random>
#include <string>

#include "quietstep/noise_cost.hpp"

namespace quietstep::testing {

inline ContactSnapshot random_snapshot(std::mt19937_64& rng, double f_hi = 150.0, double v_hi = 3.0) {
  std::uniform_real_distribution<double> f(0.0, f_hi), v(0.0, v_hi);
  ContactSnapshot s;
  for (std::size_t i = 0; i < kNumFeet; ++i) {
    s.forces[i] = f(rng);
    s.impact_velocities[i] = v(rng);
  }
  return s;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("quietstep_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace quietstep::testing
