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
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "quietstep/agent.hpp"
#include "quietstep/error.hpp"
#include "quietstep/noise_cost.hpp"
#include "quietstep/walker_env.hpp"

namespace quietstep {

struct FieldError {
  std::string field;
  std::string message;
};

/// Operator command. Absent fields leave the current value alone.
struct SteerCommand {
  std::optional<double> epsilon;
  std::optional<double> v_target;  // m/s
  std::optional<bool> pause;       // true pauses, false resumes

  bool empty() const { return !epsilon && !v_target && !pause; }

  std::vector<FieldError> validate(const EnvParams& env) const {
    std::vector<FieldError> errs;
    if (epsilon && !(std::isfinite(*epsilon) && *epsilon >= 0.0 && *epsilon <= 1.0)) {
      errs.push_back({"epsilon", "must be in [0, 1]"});
    }
    if (v_target && !(std::isfinite(*v_target) && *v_target >= env.v_target_min &&
                      *v_target <= env.v_target_max)) {
      errs.push_back({"v_target", "must be in [" + std::to_string(env.v_target_min) + ", " +
                                      std::to_string(env.v_target_max) + "] m/s"});
    }
    return errs;
  }

  /// Field-wise last-writer-wins.
  void merge(const SteerCommand& later) {
    if (later.epsilon) epsilon = later.epsilon;
    if (later.v_target) v_target = later.v_target;
    if (later.pause) pause = later.pause;
  }
};

struct TelemetryFrame {
  std::int64_t tick = 0;
  std::int64_t episode = 0;
  double v = 0.0;             // m/s
  double v_target = 0.0;      // m/s
  double epsilon = 0.0;
  double step_cost = 0.0;     // normalized, [0, 1]
  double rolling_cost = 0.0;  // mean step_cost over the last second of simulated time
  double db_proxy = 0.0;      // display-only, 30 + 40 * rolling_cost; not a measured SPL
  ContactSnapshot contact;
};

inline double db_proxy(double rolling_cost) { return 30.0 + 40.0 * rolling_cost; }

/// Bounded single-consumer queue. A full queue drops its oldest frame, so producers never wait.
class FrameQueue {
 public:
  using FramePtr = std::shared_ptr<const TelemetryFrame>;
  static constexpr std::size_t kCapacity = 256;

  explicit FrameQueue(std::size_t capacity = kCapacity) : capacity_(capacity) {}

  void push(FramePtr f) {
    std::function<void()> notify;
    {
      std::lock_guard lk(mu_);
      if (closed_) return;
      if (q_.size() == capacity_) {
        q_.pop_front();
        ++dropped_;
      }
      q_.push_back(std::move(f));
      notify = notify_;
    }
    cv_.notify_one();
    if (notify) notify();
  }

  std::optional<FramePtr> try_pop() {
    std::lock_guard lk(mu_);
    if (q_.empty()) return std::nullopt;
    auto f = std::move(q_.front());
    q_.pop_front();
    return f;
  }

  /// Waits up to `timeout`; nullopt on timeout or when closed and drained.
  std::optional<FramePtr> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, timeout, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    auto f = std::move(q_.front());
    q_.pop_front();
    return f;
  }

  /// Called after each push, outside the lock. Used by network sessions to schedule writes.
  void set_notify(std::function<void()> fn) {
    std::lock_guard lk(mu_);
    notify_ = std::move(fn);
  }

  void close() {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
      notify_ = nullptr;
    }
    cv_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lk(mu_);
    return q_.size();
  }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t dropped() const {
    std::lock_guard lk(mu_);
    return dropped_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<FramePtr> q_;
  std::size_t capacity_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
  std::function<void()> notify_;
};

struct SteerOptions {
  double tick_rate_hz = 50.0;
  std::uint64_t seed = 0;
  double initial_epsilon = 1.0;
  std::optional<double> initial_v_target;  // otherwise drawn by reset
  bool pacing = false;                     // sleep to real time in run()
};

enum class SteerStatus { running, paused, stopped, diverged };

inline std::string_view to_string(SteerStatus s) {
  switch (s) {
    case SteerStatus::running: return "running";
    case SteerStatus::paused: return "paused";
    case SteerStatus::stopped: return "stopped";
    case SteerStatus::diverged: return "diverged";
  }
  return "?";
}

/// A live deterministic rollout of one policy. tick() is driven by exactly one thread; submit()
/// and subscribe() may be called from any thread.
template <typename Scalar>
class SteerSession {
 public:
  SteerSession(Agent<Scalar> agent, EnvParams env, CostParams cost, SteerOptions opts = {})
      : agent_(std::move(agent)), env_(env), cost_(cost), opts_(opts) {
    env_.validate();
    cost_.validate();
    if (!(opts_.tick_rate_hz > 0.0)) throw Error(Errc::invalid_params, "tick rate must be positive");
    if (!(opts_.initial_epsilon >= 0.0 && opts_.initial_epsilon <= 1.0)) {
      throw Error(Errc::out_of_bounds, "initial epsilon must be in [0, 1]");
    }
    window_len_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(opts_.tick_rate_hz)));
    epsilon_ = opts_.initial_epsilon;
    state_ = reset(opts_.seed, env_);
    if (opts_.initial_v_target) state_.v_target = *opts_.initial_v_target;
    v_target_ = state_.v_target;
    dispatcher_ = std::thread([this] { dispatch_loop(); });
  }

  SteerSession(const SteerSession&) = delete;
  SteerSession& operator=(const SteerSession&) = delete;

  ~SteerSession() {
    {
      std::lock_guard lk(out_mu_);
      quit_dispatch_ = true;
    }
    out_cv_.notify_all();
    dispatcher_.join();
  }

  /// Blocks until every frame produced so far has been handed to the subscriber queues.
  void flush() {
    std::unique_lock lk(out_mu_);
    if (delivered_ == published_) return;
    flush_requested_ = true;
    out_cv_.notify_all();
    out_cv_.wait(lk, [&] { return delivered_ == published_; });
  }

  struct Ack {
    bool accepted = false;
    std::int64_t applied_at_tick = 0;
    std::vector<FieldError> errors;
  };

  /// Queues a command for the next tick boundary. Rejected commands change nothing.
  Ack submit(const SteerCommand& cmd) {
    Ack ack;
    ack.errors = cmd.validate(env_);
    std::lock_guard lk(mail_mu_);
    ack.applied_at_tick = next_tick_;
    if (!ack.errors.empty()) return ack;
    ack.accepted = true;
    if (!mailbox_) mailbox_ = cmd;
    else mailbox_->merge(cmd);
    mail_cv_.notify_all();
    return ack;
  }

  std::shared_ptr<FrameQueue> subscribe(std::size_t capacity = FrameQueue::kCapacity) {
    auto q = std::make_shared<FrameQueue>(capacity);
    std::lock_guard lk(sub_mu_);
    subs_.push_back(q);
    return q;
  }

  void unsubscribe(const std::shared_ptr<FrameQueue>& q) {
    q->close();
    std::lock_guard lk(sub_mu_);
    std::erase(subs_, q);
  }

  std::size_t subscriber_count() const {
    std::lock_guard lk(sub_mu_);
    return subs_.size();
  }

  /// One control step: apply pending command, act, step, publish. Returns nullopt while paused
  /// or after the loop stopped.
  std::optional<TelemetryFrame> tick() {
    if (status_ == SteerStatus::stopped || status_ == SteerStatus::diverged) return std::nullopt;
    std::optional<SteerCommand> cmd;
    {
      std::lock_guard lk(mail_mu_);
      cmd.swap(mailbox_);
      if (cmd) apply(*cmd);
      if (status_ == SteerStatus::paused) return std::nullopt;
      // Anything submitted from here on lands at the tick after this one.
      next_tick_ = tick_ + 1;
    }

    Action a;
    try {
      a = agent_.act_mean(observe(state_), epsilon_);
    } catch (const Error& e) {
      if (e.code() != Errc::policy_divergence) throw;
      status_ = SteerStatus::diverged;
      status_message_ = e.what();
      return std::nullopt;
    }
    const auto res = step(state_, a, env_, cost_);
    state_ = res.state;

    TelemetryFrame f;
    f.tick = tick_;
    f.episode = episode_;
    f.v = state_.v;
    f.v_target = v_target_;
    f.epsilon = epsilon_;
    f.step_cost = res.transition.cost;
    f.contact = res.transition.contact;
    window_.push_back(f.step_cost);
    if (window_.size() > window_len_) window_.pop_front();
    // Summed afresh each tick so replaying frames reproduces it exactly.
    double sum = 0.0;
    for (double c : window_) sum += c;
    f.rolling_cost = sum / static_cast<double>(window_.size());
    f.db_proxy = db_proxy(f.rolling_cost);

    if (res.transition.done) {
      ++episode_;
      state_ = reset(opts_.seed + static_cast<std::uint64_t>(episode_), env_);
      state_.v_target = v_target_;
    }
    ++tick_;
    last_frame_ = f;
    publish(f);
    return f;
  }

  /// Drives tick() until stop(). With pacing, ticks follow wall-clock time at tick_rate_hz.
  void run() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(1.0 / opts_.tick_rate_hz));
    auto next = clock::now();
    while (!stop_requested_.load()) {
      if (status_ == SteerStatus::diverged) break;
      if (status_ == SteerStatus::paused) {
        std::unique_lock lk(mail_mu_);
        mail_cv_.wait_for(lk, std::chrono::milliseconds(50),
                          [&] { return mailbox_.has_value() || stop_requested_.load(); });
        lk.unlock();
        tick();
        next = clock::now();
        continue;
      }
      tick();
      if (opts_.pacing) {
        next += period;
        std::this_thread::sleep_until(next);
      } else {
        // Unpaced: yield so command and network threads get the core.
        std::this_thread::yield();
      }
    }
    if (status_ != SteerStatus::diverged) status_ = SteerStatus::stopped;
  }

  void stop() {
    stop_requested_.store(true);
    mail_cv_.notify_all();
  }

  // Readers below are for the loop thread or a quiescent session, except the atomics.
  std::int64_t ticks() const { return tick_.load(); }
  SteerStatus status() const { return status_.load(); }
  const std::string& status_message() const { return status_message_; }
  double epsilon() const { return epsilon_.load(); }
  double v_target() const { return v_target_.load(); }
  const std::optional<TelemetryFrame>& last_frame() const { return last_frame_; }
  const SteerOptions& options() const { return opts_; }
  const EnvParams& env() const { return env_; }
  const CostParams& cost() const { return cost_; }
  const Agent<Scalar>& agent() const { return agent_; }
  std::size_t window_length() const { return window_len_; }

 private:
  void apply(const SteerCommand& cmd) {
    if (cmd.epsilon) epsilon_ = *cmd.epsilon;
    if (cmd.v_target) {
      v_target_ = *cmd.v_target;
      state_.v_target = *cmd.v_target;
    }
    if (cmd.pause) status_ = *cmd.pause ? SteerStatus::paused : SteerStatus::running;
  }

  // The loop only hands the frame over; the dispatcher does the per-subscriber work, so tick
  // cost does not grow with the number of subscribers.
  void publish(const TelemetryFrame& f) {
    {
      std::lock_guard lk(out_mu_);
      if (outbox_.size() == FrameQueue::kCapacity) outbox_.pop_front();
      outbox_.push_back(std::make_shared<const TelemetryFrame>(f));
      ++published_;
    }
  }

  void dispatch_loop() {
    std::unique_lock lk(out_mu_);
    for (;;) {
      // Polls instead of being woken per frame: a wakeup is a syscall on the loop thread.
      out_cv_.wait_for(lk, kDispatchPeriod, [&] { return quit_dispatch_ || flush_requested_; });
      if (outbox_.empty()) {
        if (quit_dispatch_) return;
        flush_requested_ = false;
        out_cv_.notify_all();
        continue;
      }
      auto batch = std::move(outbox_);
      outbox_.clear();
      const std::uint64_t upto = published_;
      lk.unlock();
      std::vector<std::shared_ptr<FrameQueue>> subs;
      {
        std::lock_guard sl(sub_mu_);
        subs = subs_;
      }
      // Pushed outside the lock: a push callback may end up unsubscribing.
      for (const auto& f : batch) {
        for (auto& q : subs) q->push(f);
      }
      lk.lock();
      delivered_ = upto;
      if (delivered_ == published_) flush_requested_ = false;
      out_cv_.notify_all();
    }
  }

  Agent<Scalar> agent_;
  EnvParams env_;
  CostParams cost_;
  SteerOptions opts_;

  EnvState state_;
  std::atomic<double> epsilon_{1.0};
  std::atomic<double> v_target_{1.0};
  std::atomic<std::int64_t> tick_{0};
  std::int64_t episode_ = 0;
  std::atomic<SteerStatus> status_{SteerStatus::running};
  std::string status_message_;
  std::atomic<bool> stop_requested_{false};

  std::deque<double> window_;
  std::size_t window_len_ = 50;
  std::optional<TelemetryFrame> last_frame_;

  std::mutex mail_mu_;
  std::condition_variable mail_cv_;
  std::optional<SteerCommand> mailbox_;
  std::int64_t next_tick_ = 0;

  mutable std::mutex sub_mu_;
  std::vector<std::shared_ptr<FrameQueue>> subs_;

  std::mutex out_mu_;
  std::condition_variable out_cv_;
  std::deque<std::shared_ptr<const TelemetryFrame>> outbox_;
  std::uint64_t published_ = 0;
  std::uint64_t delivered_ = 0;
  bool quit_dispatch_ = false;
  bool flush_requested_ = false;
  static constexpr std::chrono::milliseconds kDispatchPeriod{2};
  std::thread dispatcher_;  // last: started after everything it touches exists
};

}  // namespace quietstep
