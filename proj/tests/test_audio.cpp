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

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "quietstep/audio.hpp"
#include "support.hpp"

namespace qs = quietstep;
using Bytes = std::vector<std::uint8_t>;

namespace {

void u16(Bytes& b, unsigned v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}
void u32(Bytes& b, unsigned v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void tag(Bytes& b, const char* t) { b.insert(b.end(), t, t + 4); }

// RIFF/WAVE with a 16-byte fmt chunk and the given sample codes.
Bytes wav_bytes(const std::vector<std::int16_t>& codes, unsigned channels = 1, unsigned rate = 8000,
                unsigned format = 1, unsigned bits = 16) {
  Bytes b;
  tag(b, "RIFF");
  u32(b, 36 + 2 * static_cast<unsigned>(codes.size()));
  tag(b, "WAVE");
  tag(b, "fmt ");
  u32(b, 16);
  u16(b, format);
  u16(b, channels);
  u32(b, rate);
  u32(b, rate * channels * bits / 8);
  u16(b, channels * bits / 8);
  u16(b, bits);
  tag(b, "data");
  u32(b, 2 * static_cast<unsigned>(codes.size()));
  for (auto c : codes) u16(b, static_cast<std::uint16_t>(c));
  return b;
}

qs::Errc parse_error(const Bytes& b) {
  try {
    qs::parse_wav(b);
  } catch (const qs::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "parse succeeded";
  return qs::Errc::io;
}

qs::AudioClip sine(double amp, double freq, double seconds, unsigned rate = 48000) {
  qs::AudioClip c;
  c.sample_rate = rate;
  c.channels = 1;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  for (std::size_t i = 0; i < n; ++i) c.samples.push_back(amp * std::sin(2 * M_PI * freq * i / rate));
  return c;
}

int run(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(QUIETSTEP_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string text;
  char buf[512];
  while (std::fgets(buf, sizeof buf, p) != nullptr) text += buf;
  const int status = pclose(p);
  if (out != nullptr) *out = text;
  return WEXITSTATUS(status);
}

}  // namespace

TEST(Wav, MinimalHandLayout) {
  const auto clip = qs::parse_wav(wav_bytes({16384}));
  ASSERT_EQ(clip.samples.size(), 1u);
  EXPECT_EQ(clip.samples[0], 0.5);
  EXPECT_EQ(clip.sample_rate, 8000u);
  const auto zero = qs::parse_wav(wav_bytes(std::vector<std::int16_t>(64, 0)));
  for (double s : zero.samples) EXPECT_EQ(s, 0.0);
}

TEST(Wav, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> code(-32768, 32767);
  for (unsigned ch : {1u, 2u}) {
    std::vector<std::int16_t> codes(2000);
    for (auto& c : codes) c = static_cast<std::int16_t>(code(rng));
    codes[0] = -32768;
    codes[1] = 32767;
    const Bytes original = wav_bytes(codes, ch, 44100);
    const auto clip = qs::parse_wav(original);
    const auto again = qs::serialize_wav(clip);
    EXPECT_EQ(again, original);
    EXPECT_EQ(qs::parse_wav(again).samples, clip.samples);
  }
}

TEST(Wav, MalformedFixturesAreRejected) {
  auto good = wav_bytes({1, 2, 3, 4});
  EXPECT_EQ(parse_error(Bytes(good.begin(), good.begin() + 10)), qs::Errc::malformed_header);
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(parse_error(bad_magic), qs::Errc::malformed_header);
  EXPECT_EQ(parse_error(Bytes(good.begin(), good.end() - 3)), qs::Errc::malformed_header);  // truncated data
  EXPECT_EQ(parse_error(wav_bytes({1, 2}, 1, 8000, 3)), qs::Errc::unsupported_encoding);    // float
  EXPECT_EQ(parse_error(wav_bytes({1, 2}, 1, 8000, 1, 24)), qs::Errc::unsupported_encoding);
  EXPECT_EQ(parse_error(wav_bytes({1, 2, 3}, 2)), qs::Errc::malformed_header);  // partial stereo frame
  auto no_data = Bytes(good.begin(), good.begin() + 36);
  EXPECT_EQ(parse_error(no_data), qs::Errc::malformed_header);
}

TEST(Wav, StereoIsAveraged) {
  const auto clip = qs::parse_wav(wav_bytes({16384, 0, 16384, 0}, 2));
  EXPECT_EQ(clip.frames(), 2u);
  EXPECT_DOUBLE_EQ(qs::rms(clip, {0.0, clip.duration_s()}), 0.25);
}

TEST(Rms, AnalyticCases) {
  qs::AudioClip c;
  c.sample_rate = 1000;
  c.samples.assign(1000, 0.3);
  EXPECT_NEAR(qs::rms(c, {0.0, 1.0}), 0.3, 1e-12);
  c.samples.assign(1000, 0.0);
  EXPECT_EQ(qs::rms(c, {0.0, 1.0}), 0.0);
  // 440 Hz over exactly 1 s is an integer number of periods.
  const auto s = sine(0.7, 440.0, 1.0);
  EXPECT_NEAR(qs::rms(s, {0.0, 1.0}), 0.7 / std::sqrt(2.0), 1e-6);
  EXPECT_NEAR(qs::rms(s, {0.25, 0.5}), 0.7 / std::sqrt(2.0), 1e-6);
  try {
    qs::rms(s, {0.5, 0.5});
    FAIL();
  } catch (const qs::Error& e) {
    EXPECT_EQ(e.code(), qs::Errc::empty_segment);
  }
  try {
    qs::rms(s, {0.5, 2.0});
    FAIL();
  } catch (const qs::Error& e) {
    EXPECT_EQ(e.code(), qs::Errc::out_of_range);
  }
}

TEST(Spl, LevelsAndNoiseSubtraction) {
  EXPECT_NEAR(qs::spl_db(2e-5), 0.0, 1e-12);
  EXPECT_NEAR(qs::spl_db(2e-4), 20.0, 1e-12);
  EXPECT_NEAR(qs::spl_db(1.0), 20.0 * std::log10(5e4), 1e-12);
  EXPECT_NEAR(qs::spl_db(1.0), 93.98, 0.005);
  qs::Calibration cal{0.01, 2e-5};
  EXPECT_DOUBLE_EQ(qs::spl_db(0.1, cal) + 20.0, qs::spl_db(1.0, cal));
  for (double r : {1e-4, 0.003, 0.5}) EXPECT_NEAR(qs::spl_db(10 * r) - qs::spl_db(r), 20.0, 1e-12);
  try {
    qs::spl_db(0.0);
    FAIL();
  } catch (const qs::Error& e) {
    EXPECT_EQ(e.code(), qs::Errc::undefined_level);
  }
  EXPECT_DOUBLE_EQ(qs::subtract_noise(0.5, 0.3), 0.4);
  EXPECT_EQ(qs::subtract_noise(0.5, 0.0), 0.5);
  EXPECT_EQ(qs::subtract_noise(0.5, 0.5), 0.0);
  EXPECT_EQ(qs::subtract_noise(0.2, 0.5), 0.0);
}

TEST(Spl, LocomotionPipeline) {
  // First second: 0.1 sine plus 0.02-rms noise; second second: the noise alone.
  const unsigned rate = 48000;
  auto clip = sine(0.1, 200.0, 2.0, rate);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    if (i >= rate) clip.samples[i] = 0.0;
    clip.samples[i] += noise(rng);
  }
  const double hand = 20.0 * std::log10(0.1 / std::sqrt(2.0) / 2e-5);
  EXPECT_NEAR(qs::locomotion_spl(clip, {0.0, 1.0}, {1.0, 2.0}), hand, 0.5);

  // Same statistics in both segments: nothing left to measure.
  qs::AudioClip flat;
  flat.sample_rate = 100;
  flat.samples.assign(200, 0.25);
  try {
    qs::locomotion_spl(flat, {0.0, 1.0}, {1.0, 2.0});
    FAIL();
  } catch (const qs::Error& e) {
    EXPECT_EQ(e.code(), qs::Errc::undefined_level);
  }
  // Silent environment changes nothing.
  auto quiet = sine(0.1, 200.0, 2.0, rate);
  std::fill(quiet.samples.begin() + rate, quiet.samples.end(), 0.0);
  EXPECT_DOUBLE_EQ(qs::locomotion_spl(quiet, {0.0, 1.0}, {1.0, 2.0}), qs::spl_db(qs::rms(quiet, {0.0, 1.0})));
  EXPECT_THROW(qs::locomotion_spl(quiet, {0.0, 1.2}, {1.0, 2.0}), qs::Error);
}

TEST(AudioCli, SineSilenceAndMissingFile) {
  const auto dir = qs::testing::scratch_dir("audio_cli");
  const auto tone = sine(0.5, 1000.0, 1.0, 16000);
  qs::write_wav(dir / "tone.wav", tone);
  std::string out;
  ASSERT_EQ(run("audio " + (dir / "tone.wav").string() + " --segment 0:1", &out), 0) << out;
  const double expected = qs::spl_db(qs::rms(qs::read_wav(dir / "tone.wav"), {0.0, 1.0}));
  char want[32];
  std::snprintf(want, sizeof want, "%.4f", expected);
  EXPECT_NE(out.find(want), std::string::npos) << out;

  qs::AudioClip silence;
  silence.sample_rate = 8000;
  silence.samples.assign(8000, 0.0);
  qs::write_wav(dir / "silence.wav", silence);
  ASSERT_EQ(run("audio " + (dir / "silence.wav").string(), &out), 0) << out;
  EXPECT_NE(out.find("undefined"), std::string::npos) << out;

  EXPECT_NE(run("audio " + (dir / "missing.wav").string(), &out), 0);
  EXPECT_NE(out.find("cannot open"), std::string::npos) << out;

  std::FILE* f = std::fopen((dir / "broken.wav").c_str(), "wb");
  std::fputs("RIFF....WAVEjunk", f);
  std::fclose(f);
  EXPECT_NE(run("audio " + (dir / "broken.wav").string(), &out), 0);
}
