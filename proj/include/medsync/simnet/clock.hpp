#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "medsync/common/time.hpp"

namespace medsync::simnet {

/// Handle for a scheduled callback. Ordering is (due time, registration order).
struct TimerId {
  SimTime at{0};
  std::uint64_t seq = 0;
  friend auto operator<=>(const TimerId&, const TimerId&) = default;
};

struct FiredEvent {
  TimerId id;
  std::string label;
};

/// Discrete-event clock. Time only moves through advance_to(); every timer
/// due at or before the target fires in (timestamp, registration) order,
/// including timers scheduled by callbacks while advancing.
class VirtualClock {
 public:
  using Callback = std::function<void()>;

  SimTime now() const { return now_; }

  TimerId schedule_at(SimTime at, Callback fn, std::string label = {}) {
    if (at < now_) at = now_;
    TimerId id{at, next_seq_++};
    queue_.emplace(id, Entry{std::move(fn), std::move(label)});
    return id;
  }

  TimerId schedule_after(Duration d, Callback fn, std::string label = {}) {
    return schedule_at(now_ + d, std::move(fn), std::move(label));
  }

  bool cancel(TimerId id) { return queue_.erase(id) > 0; }

  std::vector<FiredEvent> advance_to(SimTime target) {
    if (target < now_) throw std::invalid_argument("virtual time cannot move backwards");
    std::vector<FiredEvent> fired;
    while (!queue_.empty() && queue_.begin()->first.at <= target) {
      auto node = queue_.extract(queue_.begin());
      now_ = node.key().at;
      fired.push_back({node.key(), std::move(node.mapped().label)});
      ++fired_total_;
      node.mapped().fn();
    }
    now_ = target;
    return fired;
  }

  std::vector<FiredEvent> advance_by(Duration d) { return advance_to(now_ + d); }

  /// Fires the earliest pending timer (and any sharing its timestamp).
  bool step() {
    if (queue_.empty()) return false;
    advance_to(queue_.begin()->first.at);
    return true;
  }

  std::optional<SimTime> next_due() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.begin()->first.at;
  }

  std::size_t pending() const { return queue_.size(); }
  std::uint64_t fired_total() const { return fired_total_; }

 private:
  struct Entry {
    Callback fn;
    std::string label;
  };

  SimTime now_{0};
  std::uint64_t next_seq_ = 0;
  std::uint64_t fired_total_ = 0;
  std::map<TimerId, Entry> queue_;
};

/// Real-time mode: maps wall-clock time 1:1 onto a VirtualClock. The owner
/// calls pump() from its driver loop.
class RealTimeDriver {
 public:
  explicit RealTimeDriver(VirtualClock& clock)
      : clock_(clock), origin_wall_(std::chrono::steady_clock::now()), origin_virtual_(clock.now()) {}

  SimTime target() const {
    auto wall = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - origin_wall_);
    return origin_virtual_ + wall;
  }

  std::size_t pump() {
    SimTime t = target();
    if (t < clock_.now()) return 0;
    return clock_.advance_to(t).size();
  }

 private:
  VirtualClock& clock_;
  std::chrono::steady_clock::time_point origin_wall_;
  SimTime origin_virtual_;
};

}  // namespace medsync::simnet
