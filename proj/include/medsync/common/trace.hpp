#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "medsync/common/time.hpp"

namespace medsync {

using Json = nlohmann::json;

/// Append-only, JSON-lines trace shared by every component of a run.
///
/// Each record carries a global sequence number, the virtual timestamp and
/// the emitting component; the remaining keys are event specific. Listeners
/// see records synchronously, in emission order.
class TraceLog {
 public:
  using Listener = std::function<void(const Json&)>;

  void set_retained(bool retained) { retained_ = retained; }
  void set_capacity(std::size_t cap) { capacity_ = cap; }

  /// False when nothing would observe a record; callers may skip building fields.
  bool active() const { return retained_ || !listeners_.empty(); }

  const Json& emit(SimTime t, std::string_view component, std::string_view event, Json fields = Json::object()) {
    if (!active()) {
      ++next_seq_;
      return scratch_;
    }
    Json rec = Json::object();
    rec["seq"] = next_seq_++;
    rec["t_us"] = t.count();
    rec["component"] = component;
    rec["event"] = event;
    for (auto& [k, v] : fields.items()) rec[k] = std::move(v);
    for (auto& [id, fn] : listeners_) fn(rec);
    if (!retained_) {
      scratch_ = std::move(rec);
      return scratch_;
    }
    records_.push_back(std::move(rec));
    if (capacity_ && records_.size() > capacity_) {
      records_.pop_front();
      ++evicted_;
    }
    return records_.back();
  }

  std::size_t listen(Listener fn) {
    std::size_t id = next_listener_++;
    listeners_.emplace(id, std::move(fn));
    return id;
  }
  void unlisten(std::size_t id) { listeners_.erase(id); }

  const std::deque<Json>& records() const { return records_; }
  std::uint64_t emitted() const { return next_seq_; }
  std::uint64_t evicted() const { return evicted_; }

  /// Records matching a predicate, oldest first.
  std::vector<Json> select(const std::function<bool(const Json&)>& pred) const {
    std::vector<Json> out;
    for (const auto& r : records_) {
      if (pred(r)) out.push_back(r);
    }
    return out;
  }

  std::vector<Json> by_event(std::string_view event) const {
    return select([&](const Json& r) { return r["event"] == event; });
  }

  void write_jsonl(std::ostream& os) const {
    for (const auto& r : records_) os << r.dump() << '\n';
  }

 private:
  bool retained_ = true;
  std::size_t capacity_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t evicted_ = 0;
  std::deque<Json> records_;
  Json scratch_;
  std::size_t next_listener_ = 0;
  std::map<std::size_t, Listener> listeners_;
};

}  // namespace medsync
