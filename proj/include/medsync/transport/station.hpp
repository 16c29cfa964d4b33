#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "medsync/common/metrics.hpp"
#include "medsync/common/trace.hpp"
#include "medsync/registry/heartbeat.hpp"
#include "medsync/simnet/clock.hpp"
#include "medsync/simnet/network.hpp"
#include "medsync/transport/describe.hpp"
#include "medsync/transport/sync_queue.hpp"
#include "medsync/wire.hpp"

namespace medsync::transport {

/// Shared run context handed to every component.
struct StationEnv {
  simnet::VirtualClock* clock = nullptr;
  simnet::Network* network = nullptr;
  TraceLog* trace = nullptr;
  MetricsRegistry* metrics = nullptr;
  wire::AesKey key{};
  bool checksum = true;
};

struct StationConfig {
  std::string endpoint;
  std::string site;
  wire::Address address;
  Duration poll_period = from_millis(200);
  Duration poll_phase{0};
  std::size_t lane_capacity = FrameQueue::kDefaultLaneCapacity;
  std::size_t max_batch = 64;
};

/// Default header priorities per message class.
struct Priority {
  static constexpr std::uint8_t kConfiguration = 7;
  static constexpr std::uint8_t kTransition = 6;
  static constexpr std::uint8_t kConfirmation = 6;
  static constexpr std::uint8_t kCommand = 5;
  static constexpr std::uint8_t kVitalSign = 4;
  static constexpr std::uint8_t kTimeLog = 1;
};

/// Base for every protocol component: a push client (seal and hand frames to
/// the network), an inbox SyncQueue filled on arrival, and a polling client
/// that drains the inbox on a fixed period.
///
/// Timers registered through after()/every() belong to one incarnation: kill()
/// bumps the generation so callbacks from a previous life never run.
class Station {
 public:
  Station(StationEnv env, StationConfig cfg)
      : env_(std::move(env)), cfg_(std::move(cfg)), inbox_(cfg_.lane_capacity), counters_(&env_.metrics->at(cfg_.endpoint)) {}

  virtual ~Station() {
    if (alive_) env_.network->detach(cfg_.endpoint);
  }

  Station(const Station&) = delete;
  Station& operator=(const Station&) = delete;

  virtual std::string_view kind() const = 0;

  void start() {
    if (alive_) return;
    alive_ = true;
    hung_ = false;
    ++generation_;
    std::weak_ptr<char> life = life_;
    std::uint64_t gen = generation_;
    env_.network->attach(cfg_.endpoint, cfg_.site, [this, life, gen](wire::Bytes frame) {
      if (life.expired() || gen != generation_) return;
      accept(std::move(frame));
    });
    note("component.start", {{"kind", kind()}, {"address", wire::to_string(cfg_.address)}});
    schedule_poll(now() + cfg_.poll_phase);
    on_start();
  }

  /// Silent stop: no goodbye messages, inbox discarded.
  void kill() {
    if (!alive_) return;
    alive_ = false;
    hung_ = false;
    ++generation_;
    env_.network->detach(cfg_.endpoint);
    inbox_.clear();
    repeaters_.clear();
    note("component.kill", {});
    on_kill();
  }

  /// Stops heartbeats and timers but keeps draining the inbox, so messages
  /// this component must honor even when wedged still get through.
  void hang() {
    if (!alive_) return;
    hung_ = true;
    note("component.hang", {});
  }

  bool alive() const { return alive_; }
  bool hung() const { return hung_; }
  const std::string& endpoint() const { return cfg_.endpoint; }
  const std::string& site() const { return cfg_.site; }
  const wire::Address& address() const { return cfg_.address; }
  const StationConfig& config() const { return cfg_; }
  Duration poll_period() const { return cfg_.poll_period; }
  const FrameQueue& inbox() const { return inbox_; }
  const ComponentCounters& counters() const { return *counters_; }
  SimTime now() const { return env_.clock->now(); }
  /// Longest time any frame sat in the inbox before being polled.
  Duration max_inbox_wait() const { return max_inbox_wait_; }

  virtual Json snapshot() const {
    return {{"id", cfg_.endpoint},
            {"kind", kind()},
            {"address", wire::to_string(cfg_.address)},
            {"alive", alive_},
            {"hung", hung_},
            {"queue_depth", inbox_.size()}};
  }

 protected:
  virtual void on_start() {}
  virtual void on_kill() {}
  virtual void on_config(const wire::MessageHeader&, const wire::ConfigBody&) {}
  virtual void on_app(const wire::MessageHeader&, const wire::AppMessage&) {}
  /// Message types still processed while hung.
  virtual bool accepts_while_hung(wire::MessageType) const { return false; }

  /// Handles one frame taken from the inbox. The default opens it with the
  /// entity key and dispatches on message kind.
  virtual void on_frame(wire::Bytes frame) { open_and_dispatch(frame); }

  void open_and_dispatch(const wire::Bytes& frame) {
    wire::OpenedFrame opened;
    try {
      opened = wire::open_frame(frame, env_.key);
    } catch (const wire::WireError& e) {
      ++counters_->frames_dropped;
      note("frame.rejected", {{"error", wire::to_string(e.code())}, {"detail", e.what()}});
      return;
    }
    charge_cipher(opened.plaintext.size());
    const auto& h = opened.header;
    if (hung_ && !accepts_while_hung(h.type)) return;
    try {
      if (wire::kind_of(h.type) == wire::MessageKind::kConfiguration) {
        auto body = wire::decode_config(opened.plaintext);
        trace_message("recv", h, [&] { return describe(body); });
        on_config(h, body);
      } else if (wire::kind_of(h.type) == wire::MessageKind::kApplicationData) {
        auto msg = wire::decode_app(h.type, opened.plaintext);
        trace_message("recv", h, [&] { return describe(msg); });
        on_app(h, msg);
      } else {
        throw wire::WireError(wire::WireErrc::kPayload, "reserved message type");
      }
    } catch (const wire::WireError& e) {
      ++counters_->frames_dropped;
      note("frame.rejected", {{"error", wire::to_string(e.code())}, {"detail", e.what()}});
    }
  }

  bool send_config(const std::string& to, wire::MessageType type, wire::Address dst, const wire::ConfigBody& body,
                   std::uint8_t priority = Priority::kConfiguration) {
    wire::MessageHeader h;
    h.type = type;
    h.priority = priority;
    h.source = cfg_.address;
    h.destination = dst;
    trace_message("send", h, [&] {
      Json j = describe(body);
      j["to"] = to;
      return j;
    });
    auto plain = wire::encode_config(body);
    charge_cipher(plain.size());
    return transmit(to, wire::seal_frame(h, plain, env_.key, env_.checksum));
  }

  bool send_app(const std::string& to, wire::Address dst, const wire::AppMessage& msg, std::uint8_t priority,
                std::uint8_t safe_state) {
    wire::MessageHeader h;
    h.type = wire::type_of(msg.body);
    h.priority = priority;
    h.open_loop_safe_state = safe_state;
    h.source = cfg_.address;
    h.destination = dst;
    auto plain = wire::encode_app(msg);
    trace_message("send", h, [&] {
      Json j = describe(msg);
      j["to"] = to;
      return j;
    });
    charge_cipher(plain.size());
    return transmit(to, wire::seal_frame(h, plain, env_.key, env_.checksum));
  }

  /// Pushes an already sealed frame (gateway forwarding).
  bool send_raw(const std::string& to, wire::Bytes frame) { return transmit(to, std::move(frame)); }

  simnet::TimerId after(Duration d, std::function<void()> fn, std::string label = {}) {
    return env_.clock->schedule_after(d, guard(std::move(fn)), std::move(label));
  }

  simnet::TimerId at(SimTime t, std::function<void()> fn, std::string label = {}) {
    return env_.clock->schedule_at(t, guard(std::move(fn)), std::move(label));
  }

  /// Repeats every `period`, first firing after `first`.
  void every(Duration period, std::function<void()> fn, Duration first = Duration{-1}) {
    if (first.count() < 0) first = period;
    auto shared = std::make_shared<std::function<void()>>(std::move(fn));
    auto tick = std::make_shared<std::function<void()>>();
    *tick = [this, period, shared, tick_weak = std::weak_ptr<std::function<void()>>(tick)] {
      (*shared)();
      if (auto t = tick_weak.lock()) after(period, *t);
    };
    repeaters_.push_back(tick);
    after(first, *tick);
  }

  void cancel(simnet::TimerId id) { env_.clock->cancel(id); }

  /// Records a receipt on `w` and re-arms its failure timer for exactly
  /// last_seen + N x period.
  void arm(const std::shared_ptr<registry::Watch>& w, std::function<void()> on_fail) {
    disarm(*w);
    w->monitor.seen(now());
    std::weak_ptr<registry::Watch> weak = w;
    w->timer = at(w->monitor.failure_due(), [this, weak, on_fail = std::move(on_fail)] {
      auto watch = weak.lock();
      if (!watch) return;
      watch->timer.reset();
      if (watch->monitor.tick(now()).state == registry::Liveness::kFailed) on_fail();
    });
  }

  void disarm(registry::Watch& w) {
    if (w.timer) cancel(*w.timer);
    w.timer.reset();
  }

  void note(std::string_view event, Json fields) {
    if (!env_.trace || !env_.trace->active()) return;
    env_.trace->emit(now(), cfg_.endpoint, event, std::move(fields));
  }

  bool tracing() const { return env_.trace && env_.trace->active(); }

  ComponentCounters& mutable_counters() { return *counters_; }
  const StationEnv& env() const { return env_; }
  std::uint64_t generation() const { return generation_; }

 private:
  std::function<void()> guard(std::function<void()> fn) {
    std::weak_ptr<char> life = life_;
    std::uint64_t gen = generation_;
    return [this, life, gen, fn = std::move(fn)] {
      if (life.expired() || gen != generation_ || !alive_ || hung_) return;
      ++counters_->timers;
      counters_->work_units += WorkCost::kTimer;
      fn();
    };
  }

  template <typename F>
  void trace_message(std::string_view event, const wire::MessageHeader& h, F&& body) {
    if (!tracing()) return;
    Json j = body();
    j["msg"] = wire::name_of(h.type);
    j["src"] = wire::to_string(h.source);
    j["dst"] = wire::to_string(h.destination);
    j["prio"] = h.priority;
    j["safe"] = h.open_loop_safe_state;
    if (event == "recv") j["waited_us"] = (now() - current_enqueued_at_).count();
    note(event, std::move(j));
  }

  void charge_cipher(std::size_t plain_octets) {
    counters_->work_units += WorkCost::kCipherBlock * (wire::padded_size(plain_octets) / wire::kBlockOctets);
  }

  bool transmit(const std::string& to, wire::Bytes frame) {
    ++counters_->frames_sent;
    counters_->work_units += WorkCost::kFrame;
    auto out = env_.network->send(cfg_.endpoint, to, std::move(frame));
    if (!out.delivered()) ++counters_->frames_dropped;
    return out.delivered();
  }

  void accept(wire::Bytes frame) {
    if (!push_frame(inbox_, std::move(frame), now().count())) {
      ++counters_->frames_dropped;
      note("inbox.reject", {});
      return;
    }
    counters_->max_queue_depth = std::max<std::uint64_t>(counters_->max_queue_depth, inbox_.size());
  }

  void schedule_poll(SimTime t) {
    std::weak_ptr<char> life = life_;
    std::uint64_t gen = generation_;
    env_.clock->schedule_at(t, [this, life, gen] {
      if (life.expired() || gen != generation_ || !alive_) return;
      poll();
      schedule_poll(now() + cfg_.poll_period);
    });
  }

  void poll() {
    ++counters_->polls;
    auto batch = inbox_.poll(cfg_.max_batch);
    if (batch.empty()) {
      counters_->work_units += WorkCost::kEmptyPoll;
      return;
    }
    std::uint64_t gen = generation_;
    for (auto& item : batch) {
      if (gen != generation_ || !alive_) return;  // killed by an earlier frame in this batch
      ++counters_->frames_received;
      ++counters_->events_processed;
      counters_->work_units += WorkCost::kFrame;
      current_enqueued_at_ = SimTime(item.enqueued_at_us);
      max_inbox_wait_ = std::max(max_inbox_wait_, now() - current_enqueued_at_);
      on_frame(std::move(item.bytes));
    }
  }

 private:
  StationEnv env_;
  StationConfig cfg_;
  FrameQueue inbox_;
  ComponentCounters* counters_;
  std::shared_ptr<char> life_ = std::make_shared<char>(0);
  std::vector<std::shared_ptr<std::function<void()>>> repeaters_;
  std::uint64_t generation_ = 0;
  bool alive_ = false;
  bool hung_ = false;
  SimTime current_enqueued_at_{0};
  Duration max_inbox_wait_{0};
};

}  // namespace medsync::transport
