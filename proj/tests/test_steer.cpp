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

#include <time.h>

#include <algorithm>
#include <atomic>
#include <limits>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "quietstep/steer.hpp"

namespace qs = quietstep;
using Session = qs::SteerSession<float>;
using namespace std::chrono_literals;

namespace {

qs::Agent<float> agent(std::uint64_t seed = 1) {
  qs::AgentSpec spec;  // desk-scale defaults
  return qs::Agent<float>::create(spec, seed);
}

qs::SteerOptions opts(double eps = 1.0) {
  qs::SteerOptions o;
  o.seed = 11;
  o.initial_epsilon = eps;
  return o;
}

qs::SteerCommand eps_cmd(double e) {
  qs::SteerCommand c;
  c.epsilon = e;
  return c;
}

std::vector<qs::TelemetryFrame> drain(qs::FrameQueue& q) {
  std::vector<qs::TelemetryFrame> out;
  while (auto f = q.try_pop()) out.push_back(**f);
  return out;
}

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

}  // namespace

TEST(Steer, EpsilonConstantWithoutCommands) {
  Session s(agent(), {}, {}, opts(0.3));
  for (int i = 0; i < 300; ++i) {
    const auto f = s.tick();
    ASSERT_TRUE(f);
    EXPECT_EQ(f->tick, i);
    EXPECT_EQ(f->epsilon, 0.3);
  }
}

TEST(Steer, CommandAppliesAtNextTick) {
  Session s(agent(), {}, {}, opts(0.0));
  for (int i = 0; i < 10; ++i) s.tick();
  const auto k = s.tick();
  ASSERT_EQ(k->tick, 10);
  EXPECT_EQ(k->epsilon, 0.0);
  const auto ack = s.submit(eps_cmd(1.0));
  EXPECT_TRUE(ack.accepted);
  EXPECT_EQ(ack.applied_at_tick, 11);
  const auto next = s.tick();
  EXPECT_EQ(next->tick, 11);
  EXPECT_EQ(next->epsilon, 1.0);
}

TEST(Steer, LastWriterWinsWithinOneTick) {
  Session s(agent(), {}, {}, opts(0.5));
  s.tick();
  qs::SteerCommand a;
  a.epsilon = 0.1;
  a.v_target = 1.2;
  s.submit(a);
  s.submit(eps_cmd(0.9));
  const auto f = s.tick();
  EXPECT_EQ(f->epsilon, 0.9);
  EXPECT_EQ(f->v_target, 1.2);  // fields the later command leaves out survive
}

TEST(Steer, RejectedCommandChangesNothing) {
  Session s(agent(), {}, {}, opts(0.4));
  s.tick();
  const auto ack = s.submit(eps_cmd(1.5));
  EXPECT_FALSE(ack.accepted);
  ASSERT_EQ(ack.errors.size(), 1u);
  EXPECT_EQ(ack.errors[0].field, "epsilon");
  qs::SteerCommand bad;
  bad.v_target = 99.0;
  bad.epsilon = 0.2;  // valid, but travels with an invalid field
  EXPECT_FALSE(s.submit(bad).accepted);
  EXPECT_FALSE(s.submit(eps_cmd(std::numeric_limits<double>::quiet_NaN())).accepted);
  const auto f = s.tick();
  EXPECT_EQ(f->epsilon, 0.4);
  EXPECT_EQ(s.epsilon(), 0.4);
  EXPECT_NE(f->v_target, 99.0);
}

TEST(Steer, PauseResumeKeepsTickCounterContinuous) {
  Session s(agent(), {}, {}, opts());
  auto q = s.subscribe();
  for (int i = 0; i < 5; ++i) s.tick();
  qs::SteerCommand pause;
  pause.pause = true;
  s.submit(pause);
  for (int i = 0; i < 20; ++i) EXPECT_FALSE(s.tick());
  EXPECT_EQ(s.status(), qs::SteerStatus::paused);
  EXPECT_EQ(s.ticks(), 5);
  qs::SteerCommand resume;
  resume.pause = false;
  EXPECT_EQ(s.submit(resume).applied_at_tick, 5);
  for (int i = 0; i < 5; ++i) s.tick();
  s.flush();
  const auto frames = drain(*q);
  ASSERT_EQ(frames.size(), 10u);
  for (std::size_t i = 0; i < frames.size(); ++i) EXPECT_EQ(frames[i].tick, static_cast<std::int64_t>(i));
}

TEST(Steer, SubscribersSeeIdenticalFrames) {
  Session s(agent(), {}, {}, opts());
  auto a = s.subscribe();
  for (int i = 0; i < 10; ++i) s.tick();
  auto b = s.subscribe();
  for (int i = 0; i < 40; ++i) s.tick();
  s.flush();
  const auto fa = drain(*a);
  const auto fb = drain(*b);
  EXPECT_EQ(fa.size(), 50u);
  ASSERT_FALSE(fb.empty());
  for (const auto& f : fb) {
    const auto it = std::find_if(fa.begin(), fa.end(), [&](const auto& g) { return g.tick == f.tick; });
    ASSERT_NE(it, fa.end());
    EXPECT_EQ(it->v, f.v);
    EXPECT_EQ(it->step_cost, f.step_cost);
    EXPECT_EQ(it->rolling_cost, f.rolling_cost);
    EXPECT_EQ(it->contact, f.contact);
  }
  s.unsubscribe(b);
  EXPECT_EQ(s.subscriber_count(), 1u);
}

TEST(Steer, SlowSubscriberDropsOldestButKeepsOrder) {
  Session s(agent(), {}, {}, opts());
  auto q = s.subscribe();
  std::int64_t last = -1;
  std::size_t received = 0;
  for (int i = 0; i < 2000; ++i) {
    s.tick();
    EXPECT_LE(q->size(), qs::FrameQueue::kCapacity);
    if (i % 37 == 0) {  // reads a couple of frames now and then
      s.flush();
      for (int k = 0; k < 2; ++k) {
        if (auto f = q->try_pop()) {
          EXPECT_GT((*f)->tick, last);
          last = (*f)->tick;
          ++received;
        }
      }
    }
  }
  s.flush();
  EXPECT_GE(q->size(), qs::FrameQueue::kCapacity - 2);  // the last read took two
  EXPECT_GT(q->dropped(), 0u);
  for (const auto& f : drain(*q)) {
    EXPECT_GT(f.tick, last);
    last = f.tick;
    ++received;
  }
  EXPECT_EQ(last, 1999);
  EXPECT_LT(received, 2000u);
}

TEST(Steer, FrameCostsReplayExactly) {
  qs::CostParams cost;
  Session s(agent(), {}, cost, opts(0.2));
  std::vector<qs::TelemetryFrame> frames;
  for (int i = 0; i < 400; ++i) frames.push_back(*s.tick());
  const auto window = s.window_length();
  EXPECT_EQ(window, 50u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    EXPECT_NEAR(f.step_cost, qs::normalized_cost(f.contact, cost), 1e-9);
    EXPECT_GE(f.step_cost, 0.0);
    EXPECT_LE(f.step_cost, 1.0);
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t k = lo; k <= i; ++k) sum += frames[k].step_cost;
    EXPECT_NEAR(f.rolling_cost, sum / static_cast<double>(i + 1 - lo), 1e-12);
    EXPECT_DOUBLE_EQ(f.db_proxy, 30.0 + 40.0 * f.rolling_cost);
  }
}

TEST(Steer, EpisodeResetPreservesSteering) {
  qs::EnvParams env;
  env.episode_len = 30;
  Session s(agent(), env, {}, opts(0.0));
  s.tick();
  qs::SteerCommand c;
  c.epsilon = 0.7;
  c.v_target = 1.9;
  s.submit(c);
  std::int64_t episodes = 0;
  for (int i = 0; i < 100; ++i) {
    const auto f = s.tick();
    episodes = f->episode;
    EXPECT_EQ(f->epsilon, 0.7);
    EXPECT_EQ(f->v_target, 1.9);
  }
  EXPECT_GE(episodes, 3);
}

TEST(Steer, DivergenceStopsTheLoop) {
  auto a = agent();
  a.policy().mean_net.setConstant(std::numeric_limits<float>::quiet_NaN());
  Session s(std::move(a), {}, {}, opts());
  auto q = s.subscribe();
  EXPECT_FALSE(s.tick());
  EXPECT_EQ(s.status(), qs::SteerStatus::diverged);
  EXPECT_NE(s.status_message().find("policy-divergence"), std::string::npos);
  s.run();  // returns immediately
  EXPECT_FALSE(s.tick());
  s.flush();
  EXPECT_EQ(q->size(), 0u);
}

TEST(Steer, RunLoopHonoursCommandsAndStop) {
  auto o = opts(0.0);
  o.pacing = false;
  Session s(agent(), {}, {}, o);
  auto q = s.subscribe();
  std::thread loop([&] { s.run(); });
  auto first = q->pop(2000ms);
  ASSERT_TRUE(first);
  const auto ack = s.submit(eps_cmd(1.0));
  bool seen = false;
  while (auto f = q->pop(2000ms)) {
    if ((*f)->tick >= ack.applied_at_tick) {
      EXPECT_EQ((*f)->epsilon, 1.0) << (*f)->tick;
      seen = true;
      break;
    }
    EXPECT_EQ((*f)->epsilon, 0.0);
  }
  EXPECT_TRUE(seen);
  s.stop();
  loop.join();
  EXPECT_EQ(s.status(), qs::SteerStatus::stopped);
}

TEST(Steer, PacedLoopFollowsTickRate) {
  auto o = opts();
  o.pacing = true;
  o.tick_rate_hz = 200.0;
  Session s(agent(), {}, {}, o);
  std::thread loop([&] { s.run(); });
  std::this_thread::sleep_for(500ms);
  s.stop();
  loop.join();
  EXPECT_GT(s.ticks(), 70);
  EXPECT_LT(s.ticks(), 130);
}

// Tick cost measured on the control thread's own CPU clock, so other threads sharing the core
// do not count against it. Chunks alternate between 0 and 8 busy subscribers.
TEST(Steer, TickCostIndependentOfSubscriberCount) {
  Session s(agent(), {}, {}, opts());
  constexpr int kChunk = 400;
  std::vector<double> none, eight;
  for (int i = 0; i < 200; ++i) s.tick();  // warm up
  for (int round = 0; round < 25; ++round) {
    for (int mode = 0; mode < 2; ++mode) {
      std::vector<std::shared_ptr<qs::FrameQueue>> qs_;
      std::vector<std::thread> readers;
      std::atomic<bool> done{false};
      if (mode == 1) {
        for (int k = 0; k < 8; ++k) {
          qs_.push_back(s.subscribe());
          readers.emplace_back([&, q = qs_.back()] {
            while (!done.load()) q->pop(5ms);
          });
        }
      }
      const double t0 = thread_cpu_seconds();
      for (int i = 0; i < kChunk; ++i) s.tick();
      const double dt = (thread_cpu_seconds() - t0) / kChunk;
      (mode == 0 ? none : eight).push_back(dt);
      s.flush();
      done = true;
      for (auto& q : qs_) s.unsubscribe(q);
      for (auto& t : readers) t.join();
    }
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double m0 = median(none), m8 = median(eight);
  RecordProperty("tick_us_0_subscribers", std::to_string(m0 * 1e6));
  RecordProperty("tick_us_8_subscribers", std::to_string(m8 * 1e6));
  EXPECT_NEAR(m8 / m0, 1.0, 0.10) << "0 subs " << m0 * 1e6 << " us, 8 subs " << m8 * 1e6 << " us";
}
