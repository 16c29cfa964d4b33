#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "medsync/registry/heartbeat.hpp"
#include "medsync/transport/station.hpp"

namespace medsync::registry {

struct ServerRef {
  std::uint8_t rank = 0;
  std::string endpoint;
};

/// Entity-wide directory. Validates registrars, answers location queries
/// and monitors registrar heartbeats. Redundant servers are ranked (0 is
/// highest); only an active server answers anything. A running server sends
/// I-am-running to every lower-ranked one each T, and a server that hears
/// one from a higher rank halts.
class ConfigServer : public transport::Station {
 public:
  ConfigServer(transport::StationEnv env, transport::StationConfig cfg, std::uint8_t rank, std::set<std::uint8_t> units,
               std::vector<ServerRef> servers, Timing timing = {})
      : Station(std::move(env), std::move(cfg)),
        rank_(rank),
        units_(std::move(units)),
        servers_(std::move(servers)),
        timing_(timing),
        higher_(std::make_shared<Watch>(timing.heartbeat, timing.misses)) {}

  std::string_view kind() const override { return "config-server"; }

  std::uint8_t rank() const { return rank_; }
  bool active() const { return alive() && active_; }
  std::size_t registrar_count() const { return records_.size(); }
  std::optional<std::string> registrar_endpoint(std::uint8_t unit) const {
    auto it = records_.find(unit);
    if (it == records_.end()) return std::nullopt;
    return it->second.endpoint;
  }

  Json snapshot() const override {
    Json j = Station::snapshot();
    j["rank"] = rank_;
    j["active"] = active();
    Json regs = Json::object();
    for (const auto& [u, r] : records_) regs[std::to_string(u)] = r.endpoint;
    j["registrars"] = regs;
    return j;
  }

 protected:
  void on_start() override {
    bool has_higher = false;
    for (const auto& s : servers_) has_higher |= s.rank < rank_;
    if (has_higher) {
      note("cs.standby", {{"rank", rank_}});
      watch_higher();
    } else {
      activate();
    }
    every(timing_.heartbeat, [this] {
      if (active_) beat();
    });
  }

  void on_kill() override {
    active_ = false;
    records_.clear();
    disarm(*higher_);
  }

  void on_config(const wire::MessageHeader& h, const wire::ConfigBody& b) override {
    using wire::MessageType;
    if (h.type == MessageType::kIAmRunning) {
      if (b.rank < rank_) {
        if (active_) halt(b.rank);
        watch_higher();
      }
      return;
    }
    if (!active_) return;
    switch (h.type) {
      case MessageType::kAnnounceRegistrar: handle_announce(b); break;
      case MessageType::kHeartbeat: handle_heartbeat(h, b); break;
      case MessageType::kConfigServerQuery: {
        wire::ConfigBody r;
        r.rank = rank_;
        r.endpoint = endpoint();
        r.reply_to = endpoint();
        send_config(b.reply_to, MessageType::kConfigServerLocated, h.source, r);
        break;
      }
      case MessageType::kRegistrarQuery: {
        wire::ConfigBody r;
        r.unit = b.unit;
        r.reply_to = endpoint();
        auto it = records_.find(b.unit);
        if (it != records_.end()) {
          r.endpoint = it->second.endpoint;
          send_config(b.reply_to, MessageType::kUnitSpec, h.source, r);
        } else {
          send_config(b.reply_to, MessageType::kRegistrarUnknown, h.source, r);
        }
        break;
      }
      case MessageType::kIAmStopping:
        if (h.source.automaton == 0) purge(b.unit, "stopping");
        break;
      default:
        break;
    }
  }

 private:
  struct Record {
    std::string endpoint;
    std::shared_ptr<Watch> watch;
  };

  wire::Address self_address() const { return wire::Address::config_server(address().entity); }

  void activate() {
    active_ = true;
    note("cs.active", {{"rank", rank_}});
    beat();
  }

  void halt(std::uint8_t by_rank) {
    active_ = false;
    for (auto& [_, r] : records_) disarm(*r.watch);
    records_.clear();
    note("cs.halt", {{"rank", rank_}, {"by_rank", by_rank}});
  }

  void watch_higher() {
    arm(higher_, [this] {
      if (active_) return;
      note("cs.takeover", {{"rank", rank_}});
      activate();
    });
  }

  void beat() {
    wire::ConfigBody running;
    running.rank = rank_;
    running.reply_to = endpoint();
    for (const auto& s : servers_) {
      if (s.rank > rank_) send_config(s.endpoint, wire::MessageType::kIAmRunning, self_address(), running);
    }
    for (const auto& [unit, r] : records_) {
      wire::ConfigBody hb;
      hb.unit = unit;
      hb.rank = rank_;
      hb.reply_to = endpoint();
      send_config(r.endpoint, wire::MessageType::kHeartbeat, wire::Address::registrar(address().entity, unit), hb);
    }
  }

  void reject(const wire::ConfigBody& b, wire::ConfigCode code) {
    wire::ConfigBody r;
    r.unit = b.unit;
    r.code = code;
    r.reply_to = endpoint();
    note("cs.announce.rejected", {{"unit", b.unit}, {"endpoint", b.reply_to}, {"code", transport::to_string(code)}});
    send_config(b.reply_to, wire::MessageType::kRejection, wire::Address::registrar(address().entity, b.unit), r);
  }

  /// A unit is admitted when it is in the unit table and no live registrar
  /// holds it. The same endpoint announcing again is a restart and accepted.
  void handle_announce(const wire::ConfigBody& b) {
    if (!units_.count(b.unit)) return reject(b, wire::ConfigCode::kUnknownUnit);
    auto it = records_.find(b.unit);
    if (it != records_.end() && it->second.endpoint != b.reply_to) {
      return reject(b, wire::ConfigCode::kUnitAlreadyActive);
    }
    admit(b.unit, b.reply_to);

    const auto entity = address().entity;
    wire::ConfigBody noted;
    noted.unit = b.unit;
    noted.rank = rank_;
    noted.endpoint = endpoint();
    noted.reply_to = endpoint();
    send_config(b.reply_to, wire::MessageType::kRegistrarNoted, wire::Address::registrar(entity, b.unit), noted);

    wire::ConfigBody spec;
    spec.unit = b.unit;
    spec.endpoint = b.reply_to;
    spec.reply_to = endpoint();
    // The newcomer learns itself first, then every registrar already known.
    send_config(b.reply_to, wire::MessageType::kUnitSpec, wire::Address::registrar(entity, b.unit), spec);
    for (const auto& [unit, r] : records_) {
      if (unit == b.unit) continue;
      send_config(r.endpoint, wire::MessageType::kUnitSpec, wire::Address::registrar(entity, unit), spec);
      wire::ConfigBody other;
      other.unit = unit;
      other.endpoint = r.endpoint;
      other.reply_to = endpoint();
      send_config(b.reply_to, wire::MessageType::kUnitSpec, wire::Address::registrar(entity, b.unit), other);
    }
  }

  void admit(std::uint8_t unit, const std::string& ep) {
    auto& r = records_[unit];
    if (!r.watch) r.watch = std::make_shared<Watch>(timing_.heartbeat, timing_.misses);
    r.endpoint = ep;
    note("cs.registrar.noted", {{"unit", unit}, {"endpoint", ep}});
    arm(r.watch, [this, unit] { purge(unit, "dead"); });
  }

  /// Registrar heartbeat. One we have no record of (this server restarted)
  /// is taken back in, provided nobody else holds the unit.
  void handle_heartbeat(const wire::MessageHeader& h, const wire::ConfigBody& b) {
    if (h.source.unit == 0 || h.source.automaton != 0) return;
    auto it = records_.find(h.source.unit);
    if (it == records_.end()) {
      if (!units_.count(h.source.unit)) return;
      note("cs.registrar.repopulated", {{"unit", h.source.unit}, {"endpoint", b.reply_to}});
      admit(h.source.unit, b.reply_to);
      return;
    }
    if (it->second.endpoint != b.reply_to) return;
    arm(it->second.watch, [this, unit = h.source.unit] { purge(unit, "dead"); });
  }

  void purge(std::uint8_t unit, std::string_view why) {
    auto it = records_.find(unit);
    if (it == records_.end()) return;
    disarm(*it->second.watch);
    note(why == "dead" ? "cs.registrar.dead" : "cs.registrar.stopped",
         {{"unit", unit}, {"endpoint", it->second.endpoint}, {"last_seen_us", it->second.watch->monitor.last_seen.count()}});
    records_.erase(it);
  }

  std::uint8_t rank_;
  std::set<std::uint8_t> units_;
  std::vector<ServerRef> servers_;
  Timing timing_;
  bool active_ = false;
  std::shared_ptr<Watch> higher_;
  std::map<std::uint8_t, Record> records_;
};

}  // namespace medsync::registry
