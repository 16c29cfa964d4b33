#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace medsync {

/// Deterministic CPU proxy. Absolute CPU percentages depend on hardware, so
/// runs are costed in work units: each processed event adds the cost of its
/// class.
struct WorkCost {
  static constexpr std::uint64_t kEmptyPoll = 1;
  static constexpr std::uint64_t kTimer = 10;
  static constexpr std::uint64_t kFrame = 100;
  static constexpr std::uint64_t kCipherBlock = 2;
};

struct ComponentCounters {
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t frames_dropped = 0;       // undecodable, rejected by backpressure, or lost in transit
  std::uint64_t frames_dead_lettered = 0;
  std::uint64_t polls = 0;
  std::uint64_t timers = 0;
  std::uint64_t events_processed = 0;
  std::uint64_t work_units = 0;
  std::uint64_t max_queue_depth = 0;
};

class MetricsRegistry {
 public:
  ComponentCounters& at(const std::string& component) { return counters_[component]; }
  const std::map<std::string, ComponentCounters>& all() const { return counters_; }

  std::uint64_t total_work_units() const {
    std::uint64_t sum = 0;
    for (const auto& [_, c] : counters_) sum += c.work_units;
    return sum;
  }

  void reset() {
    for (auto& [_, c] : counters_) c = ComponentCounters{};
  }

 private:
  std::map<std::string, ComponentCounters> counters_;
};

}  // namespace medsync
