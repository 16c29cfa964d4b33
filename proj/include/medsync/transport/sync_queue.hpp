#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

#include "medsync/wire/frame.hpp"

namespace medsync::transport {

/// Synchronized queue with one FIFO lane per header priority (0-7). Dequeue
/// always takes the head of the highest non-empty lane. Pushing to a full
/// lane is rejected and counted, producers never block on a slow consumer.
template <typename T>
class SyncQueue {
 public:
  static constexpr std::size_t kLanes = 8;
  static constexpr std::size_t kDefaultLaneCapacity = 1024;

  explicit SyncQueue(std::size_t lane_capacity = kDefaultLaneCapacity) : capacity_(lane_capacity) {}

  bool push(std::uint8_t priority, T item) {
    std::lock_guard lock(mu_);
    auto& lane = lanes_[priority & 7u];
    if (lane.size() >= capacity_) {
      ++rejected_;
      return false;
    }
    lane.push_back(std::move(item));
    ++enqueued_;
    return true;
  }

  std::optional<T> pop() {
    std::lock_guard lock(mu_);
    return pop_locked();
  }

  /// Up to `max_batch` items in priority-then-FIFO order.
  std::vector<T> poll(std::size_t max_batch) {
    std::lock_guard lock(mu_);
    std::vector<T> out;
    while (out.size() < max_batch) {
      auto item = pop_locked();
      if (!item) break;
      out.push_back(std::move(*item));
    }
    return out;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& lane : lanes_) n += lane.size();
    return n;
  }
  bool empty() const { return size() == 0; }

  std::size_t lane_size(std::uint8_t priority) const {
    std::lock_guard lock(mu_);
    return lanes_[priority & 7u].size();
  }

  void clear() {
    std::lock_guard lock(mu_);
    for (auto& lane : lanes_) lane.clear();
  }

  std::size_t lane_capacity() const { return capacity_; }
  std::uint64_t enqueued() const {
    std::lock_guard lock(mu_);
    return enqueued_;
  }
  std::uint64_t dequeued() const {
    std::lock_guard lock(mu_);
    return dequeued_;
  }
  std::uint64_t rejected() const {
    std::lock_guard lock(mu_);
    return rejected_;
  }

 private:
  std::optional<T> pop_locked() {
    for (std::size_t p = kLanes; p-- > 0;) {
      auto& lane = lanes_[p];
      if (!lane.empty()) {
        T item = std::move(lane.front());
        lane.pop_front();
        ++dequeued_;
        return item;
      }
    }
    return std::nullopt;
  }

  mutable std::mutex mu_;
  std::array<std::deque<T>, kLanes> lanes_;
  std::size_t capacity_;
  std::uint64_t enqueued_ = 0;
  std::uint64_t dequeued_ = 0;
  std::uint64_t rejected_ = 0;
};

/// A sealed frame waiting in an inbox, stamped with its arrival time.
struct QueuedFrame {
  wire::Bytes bytes;
  std::int64_t enqueued_at_us = 0;
};

using FrameQueue = SyncQueue<QueuedFrame>;

/// Enqueues into the lane named by the frame's priority field. Frames whose
/// header does not decode are refused.
inline bool push_frame(FrameQueue& q, wire::Bytes frame, std::int64_t now_us = 0) {
  wire::MessageHeader h;
  try {
    h = wire::peek_header(frame);
  } catch (const wire::WireError&) {
    return false;
  }
  return q.push(h.priority, QueuedFrame{std::move(frame), now_us});
}

}  // namespace medsync::transport
