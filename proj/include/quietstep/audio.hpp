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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "quietstep/error.hpp"

namespace quietstep {

/// Decoded PCM audio. Samples are interleaved by channel and scaled to [-1, 1).
struct AudioClip {
  std::uint32_t sample_rate = 44100;
  std::uint16_t channels = 1;
  std::vector<double> samples;

  std::size_t frames() const { return channels == 0 ? 0 : samples.size() / channels; }
  double duration_s() const { return static_cast<double>(frames()) / sample_rate; }

  /// Channel average per frame.
  std::vector<double> mono() const {
    if (channels == 1) return samples;
    std::vector<double> out(frames());
    for (std::size_t f = 0; f < out.size(); ++f) {
      double s = 0.0;
      for (std::size_t c = 0; c < channels; ++c) s += samples[f * channels + c];
      out[f] = s / channels;
    }
    return out;
  }
};

namespace detail {

inline std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

}  // namespace detail

/// Decodes a RIFF/WAVE container holding 16-bit PCM, mono or stereo.
inline AudioClip parse_wav(std::span<const std::uint8_t> bytes) {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12 || !detail::tag_is(bytes, 0, "RIFF") || !detail::tag_is(bytes, 8, "WAVE")) {
    throw Error(Errc::malformed_header, "missing RIFF/WAVE signature");
  }
  AudioClip clip;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      throw Error(Errc::malformed_header, "chunk extends past the end of the file");
    }
    if (detail::tag_is(bytes, pos, "fmt ")) {
      if (size < 16) throw Error(Errc::malformed_header, "fmt chunk shorter than 16 bytes");
      const std::uint16_t format = read_u16(bytes, body);
      clip.channels = read_u16(bytes, body + 2);
      clip.sample_rate = read_u32(bytes, body + 4);
      const std::uint16_t block_align = read_u16(bytes, body + 12);
      const std::uint16_t bits = read_u16(bytes, body + 14);
      if (format != 1) throw Error(Errc::unsupported_encoding, "only PCM (format 1) is supported");
      if (bits != 16) {
        throw Error(Errc::unsupported_encoding, "only 16-bit samples are supported, got " + std::to_string(bits));
      }
      if (clip.channels != 1 && clip.channels != 2) {
        throw Error(Errc::unsupported_encoding, "only mono or stereo is supported");
      }
      if (clip.sample_rate == 0) throw Error(Errc::malformed_header, "sample rate is zero");
      if (block_align != clip.channels * 2) {
        throw Error(Errc::malformed_header, "block alignment disagrees with channel count");
      }
      have_fmt = true;
    } else if (detail::tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw Error(Errc::malformed_header, "data chunk before fmt chunk");
      const std::size_t block = clip.channels * 2u;
      if (size % block != 0) throw Error(Errc::malformed_header, "data chunk holds a partial frame");
      if (size == 0) throw Error(Errc::malformed_header, "data chunk is empty");
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
        clip.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(Errc::malformed_header, have_fmt ? "no data chunk" : "no fmt chunk");
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

/// 16-bit PCM encoding; samples are rounded to the nearest code and saturated.
inline std::vector<std::uint8_t> serialize_wav(const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, clip.channels);
  detail::put_u32(out, clip.sample_rate);
  detail::put_u32(out, clip.sample_rate * clip.channels * 2u);
  detail::put_u16(out, static_cast<std::uint16_t>(clip.channels * 2u));
  detail::put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double code = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(code)));
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = serialize_wav(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Time span [start_s, end_s) in seconds.
struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
};

/// RMS of the channel-averaged signal over the frames whose timestamps fall in the segment.
inline double rms(const AudioClip& clip, Segment seg) {
  if (!(seg.start_s >= 0.0) || !(seg.end_s <= clip.duration_s() + 1e-12)) {
    throw Error(Errc::out_of_range, "segment lies outside the clip");
  }
  const auto first = static_cast<std::size_t>(std::ceil(seg.start_s * clip.sample_rate - 1e-9));
  const auto last = std::min(clip.frames(),
                             static_cast<std::size_t>(std::ceil(seg.end_s * clip.sample_rate - 1e-9)));
  if (last <= first) throw Error(Errc::empty_segment, "segment contains no samples");
  const auto mono = clip.mono();
  double sum = 0.0;
  for (std::size_t i = first; i < last; ++i) sum += mono[i] * mono[i];
  return std::sqrt(sum / static_cast<double>(last - first));
}

struct Calibration {
  double pa_per_unit = 1.0;  // pascals per full-scale unit
  double p_ref = 2e-5;       // Pa

  void validate() const {
    if (!(pa_per_unit > 0.0) || !(p_ref > 0.0)) {
      throw Error(Errc::invalid_params, "calibration constants must be positive");
    }
  }
};

/// Sound pressure level 20 log10(p / p_ref) for an RMS amplitude in full-scale units.
inline double spl_db(double rms_amplitude, const Calibration& cal = {}) {
  cal.validate();
  if (!(rms_amplitude > 0.0)) {
    throw Error(Errc::undefined_level, "sound level is undefined for non-positive RMS");
  }
  return 20.0 * std::log10(rms_amplitude * cal.pa_per_unit / cal.p_ref);
}

/// Removes ambient noise in the power domain: sqrt(max(0, total^2 - env^2)).
inline double subtract_noise(double rms_total, double rms_env) {
  return std::sqrt(std::max(0.0, rms_total * rms_total - rms_env * rms_env));
}

inline double locomotion_spl(const AudioClip& clip, Segment loco, Segment env, const Calibration& cal = {}) {
  if (loco.start_s < env.end_s && env.start_s < loco.end_s) {
    throw Error(Errc::out_of_range, "locomotion and environment segments overlap");
  }
  return spl_db(subtract_noise(rms(clip, loco), rms(clip, env)), cal);
}

}  // namespace quietstep
