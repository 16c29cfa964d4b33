#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "medsync/common/time.hpp"

namespace medsync::simnet {

/// Half-open virtual interval [start, end).
struct PartitionWindow {
  SimTime start{0};
  SimTime end{0};
  bool contains(SimTime t) const { return t >= start && t < end; }
};

struct LinkProfile {
  Duration latency{0};
  Duration jitter{0};              // uniform in [-jitter, +jitter]
  double drop_probability = 0.0;
  double bandwidth_bps = 0.0;      // 0 = unlimited
  std::vector<PartitionWindow> partitions;
};

enum class SendStatus { kScheduled, kDroppedPartition, kDroppedLoss, kDroppedDown };

inline const char* to_string(SendStatus s) {
  switch (s) {
    case SendStatus::kScheduled: return "scheduled";
    case SendStatus::kDroppedPartition: return "partition";
    case SendStatus::kDroppedLoss: return "loss";
    case SendStatus::kDroppedDown: return "link-down";
  }
  return "?";
}

struct SendOutcome {
  SendStatus status = SendStatus::kScheduled;
  SimTime deliver_at{0};
  bool delivered() const { return status == SendStatus::kScheduled; }
};

/// Stable 64-bit FNV-1a, used to derive per-link seeds from names.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

/// One direction of a link. Behaves like a stream: deliveries never overtake
/// each other, and a frame is judged against partition windows at the moment
/// its transmission would start.
class Link {
 public:
  Link(std::string name, LinkProfile profile, std::uint64_t seed)
      : name_(std::move(name)), profile_(std::move(profile)), seed_(seed), rng_(seed) {}

  SendOutcome send(std::size_t octets, SimTime now) {
    // Draw both variates for every frame so the random stream does not
    // depend on which branch earlier frames took.
    double loss_draw = unit_(rng_);
    double jitter_draw = unit_(rng_);

    SimTime tx_start = std::max(now, busy_until_);
    if (forced_down_) return drop(SendStatus::kDroppedDown);
    for (const auto& w : profile_.partitions) {
      if (w.contains(tx_start)) return drop(SendStatus::kDroppedPartition);
    }
    if (loss_draw < profile_.drop_probability) return drop(SendStatus::kDroppedLoss);

    Duration serialization{0};
    if (profile_.bandwidth_bps > 0) {
      serialization = from_seconds(static_cast<double>(octets) * 8.0 / profile_.bandwidth_bps);
    }
    busy_until_ = tx_start + serialization;
    Duration jitter{0};
    if (profile_.jitter.count() > 0) {
      jitter = Duration(static_cast<std::int64_t>((jitter_draw * 2.0 - 1.0) * static_cast<double>(profile_.jitter.count())));
    }
    SimTime at = busy_until_ + profile_.latency + jitter;
    at = std::max({at, now, last_delivery_});
    last_delivery_ = at;
    ++scheduled_;
    return {SendStatus::kScheduled, at};
  }

  bool up_at(SimTime t) const {
    if (forced_down_) return false;
    for (const auto& w : profile_.partitions) {
      if (w.contains(t)) return false;
    }
    return true;
  }

  void set_forced_down(bool down) { forced_down_ = down; }
  bool forced_down() const { return forced_down_; }

  const std::string& name() const { return name_; }
  const LinkProfile& profile() const { return profile_; }
  LinkProfile& profile() { return profile_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t scheduled() const { return scheduled_; }
  std::uint64_t dropped() const { return dropped_; }

 private:
  SendOutcome drop(SendStatus why) {
    ++dropped_;
    return {why, SimTime{0}};
  }

  std::string name_;
  LinkProfile profile_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  SimTime busy_until_{0};
  SimTime last_delivery_{0};
  bool forced_down_ = false;
  std::uint64_t scheduled_ = 0;
  std::uint64_t dropped_ = 0;
};

}  // namespace medsync::simnet
