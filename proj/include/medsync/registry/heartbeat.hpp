#pragma once

#include <optional>

#include "medsync/common/time.hpp"
#include "medsync/simnet/clock.hpp"

namespace medsync::registry {

enum class Liveness { kOk, kMissed, kFailed };

inline const char* to_string(Liveness l) {
  switch (l) {
    case Liveness::kOk: return "ok";
    case Liveness::kMissed: return "missed";
    case Liveness::kFailed: return "failed";
  }
  return "?";
}

struct HeartbeatStatus {
  Liveness state = Liveness::kOk;
  int misses = 0;
};

/// Counts silent periods since the last receipt. The k-th miss is recorded
/// once now >= last_seen + k x period; failure is declared at the N-th.
struct HeartbeatMonitor {
  Duration period = from_seconds(5);
  int miss_threshold = 3;
  SimTime last_seen{0};
  int misses = 0;

  void seen(SimTime now) {
    last_seen = now;
    misses = 0;
  }

  HeartbeatStatus tick(SimTime now) {
    while (misses < miss_threshold && now >= last_seen + period * (misses + 1)) ++misses;
    if (misses >= miss_threshold) return {Liveness::kFailed, misses};
    return {misses > 0 ? Liveness::kMissed : Liveness::kOk, misses};
  }

  SimTime failure_due() const { return last_seen + period * miss_threshold; }
};

/// A monitor plus the pending timer that will declare its failure.
struct Watch {
  HeartbeatMonitor monitor;
  std::optional<simnet::TimerId> timer;

  Watch() = default;
  Watch(Duration period, int n) {
    monitor.period = period;
    monitor.miss_threshold = n;
  }
};

struct Timing {
  Duration heartbeat = from_seconds(5);            // T: registrar <-> config server, gateway keepalive
  Duration automaton_heartbeat = from_seconds(5);  // T': registrar <-> automaton
  int misses = 3;                                  // N
  Duration discovery_interval = from_seconds(1);
  int discovery_retries = 10;                      // R
  Duration backoff_initial = from_seconds(1);
  Duration backoff_cap = from_seconds(32);
};

}  // namespace medsync::registry
