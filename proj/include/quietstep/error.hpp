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

#include <stdexcept>
#include <string>
#include <string_view>

namespace quietstep {

enum class Errc {
  invalid_params,
  episode_finished,
  length_mismatch,
  dim_mismatch,
  reject_update,
  policy_divergence,
  empty_batch,
  empty_input,
  negative_lambda,
  non_finite,
  invalid_ref,
  malformed_header,
  unsupported_encoding,
  empty_segment,
  out_of_range,
  undefined_level,
  config_parse,
  checkpoint_version,
  schema_mismatch,
  training_divergence,
  out_of_bounds,
  io,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_params: return "invalid-params";
    case Errc::episode_finished: return "episode-finished";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::dim_mismatch: return "dim-mismatch";
    case Errc::reject_update: return "reject-update";
    case Errc::policy_divergence: return "policy-divergence";
    case Errc::empty_batch: return "empty-batch";
    case Errc::empty_input: return "empty-input";
    case Errc::negative_lambda: return "negative-lambda";
    case Errc::non_finite: return "non-finite";
    case Errc::invalid_ref: return "invalid-ref";
    case Errc::malformed_header: return "malformed-header";
    case Errc::unsupported_encoding: return "unsupported-encoding";
    case Errc::empty_segment: return "empty-segment";
    case Errc::out_of_range: return "out-of-range";
    case Errc::undefined_level: return "undefined-level";
    case Errc::config_parse: return "config-parse";
    case Errc::checkpoint_version: return "checkpoint-version";
    case Errc::schema_mismatch: return "schema-mismatch";
    case Errc::training_divergence: return "training-divergence";
    case Errc::out_of_bounds: return "out-of-bounds";
    case Errc::io: return "io";
  }
  return "unknown";
}

/// Every failure in the library is reported through this type; `code()` names the error class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  Errc code() const noexcept { return code_; }
  /// what() without the error-class prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace quietstep
