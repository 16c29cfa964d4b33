#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace medsync {

/// Virtual time: microseconds since the start of a run. Durations share the
/// representation so arithmetic stays exact.
using Duration = std::chrono::microseconds;
using SimTime = std::chrono::microseconds;

constexpr Duration from_seconds(double s) {
  return Duration(static_cast<std::int64_t>(s * 1'000'000.0 + (s >= 0 ? 0.5 : -0.5)));
}
constexpr Duration from_millis(double ms) { return from_seconds(ms / 1000.0); }
constexpr double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1'000'000.0; }

}  // namespace medsync
