#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "medsync/registry/heartbeat.hpp"
#include "medsync/transport/gateway.hpp"
#include "medsync/transport/station.hpp"

namespace medsync::registry {

/// Per-unit registration server. Announces itself to the configuration
/// server (cycling the ranked address list), admits automata of its unit,
/// relays I-am-starting / I-am-stopping and watches automaton heartbeats.
class Registrar : public transport::Station {
 public:
  Registrar(transport::StationEnv env, transport::StationConfig cfg, std::vector<std::string> config_servers,
            std::string gateway = {}, Timing timing = {})
      : Station(std::move(env), std::move(cfg)),
        servers_(std::move(config_servers)),
        gateway_(std::move(gateway)),
        timing_(timing),
        cs_watch_(std::make_shared<Watch>(timing.heartbeat, timing.misses)) {}

  std::string_view kind() const override { return "registrar"; }

  std::uint8_t unit() const { return address().unit; }
  bool registered() const { return alive() && registered_; }
  const std::string& config_server() const { return cs_endpoint_; }
  std::set<std::uint8_t> automata() const {
    std::set<std::uint8_t> out;
    for (const auto& [a, _] : automata_) out.insert(a);
    return out;
  }
  const std::map<std::uint8_t, std::string>& peer_registrars() const { return peers_; }

  /// Voluntary stop: the configuration server is told first.
  void shutdown() {
    if (!alive()) return;
    if (registered_) send_config(cs_endpoint_, wire::MessageType::kIAmStopping, cs_address(), body());
    note("registrar.shutdown", {});
    kill();
  }

  Json snapshot() const override {
    Json j = Station::snapshot();
    j["registered"] = registered();
    j["config_server"] = cs_endpoint_;
    Json am = Json::object();
    for (const auto& [a, r] : automata_) am[std::to_string(a)] = r.endpoint;
    j["automata"] = am;
    j["peer_registrars"] = peers_.size();
    return j;
  }

 protected:
  void on_start() override {
    cs_index_ = 0;
    backoff_ = timing_.backoff_initial;
    every(timing_.heartbeat, [this] {
      if (registered_) heartbeat_config_server();
    });
    every(timing_.automaton_heartbeat, [this] { heartbeat_automata(); });
    announce();
  }

  void on_kill() override {
    registered_ = false;
    cs_endpoint_.clear();
    automata_.clear();
    peers_.clear();
    awaiting_stop_.clear();
    pending_.reset();
    disarm(*cs_watch_);
  }

  void on_config(const wire::MessageHeader& h, const wire::ConfigBody& b) override {
    using wire::MessageType;
    switch (h.type) {
      case MessageType::kRegistrarNoted:
        if (registered_) return;
        cancel_pending();
        registered_ = true;
        cs_endpoint_ = b.endpoint;
        backoff_ = timing_.backoff_initial;
        note("registrar.registered", {{"config_server", cs_endpoint_}, {"rank", b.rank}});
        arm_config_server();
        heartbeat_config_server();
        break;
      case MessageType::kRejection:
        if (registered_) return;
        cancel_pending();
        note("registrar.rejected", {{"code", transport::to_string(b.code)}, {"retry_in_us", backoff_.count()}});
        pending_ = after(backoff_, [this] { announce(); });
        backoff_ = std::min(backoff_ * 2, timing_.backoff_cap);
        break;
      case MessageType::kUnitSpec:
        if (b.unit != unit() && !b.endpoint.empty()) {
          peers_[b.unit] = b.endpoint;
          note("registrar.peer", {{"unit", b.unit}, {"endpoint", b.endpoint}});
        }
        break;
      case MessageType::kHeartbeat:
        if (h.source.unit == 0 && h.source.automaton == 0) {
          if (registered_ && b.reply_to == cs_endpoint_) arm_config_server();
        } else if (h.source.unit == unit() && h.source.automaton != 0) {
          automaton_heartbeat(h.source.automaton, b);
        }
        break;
      case MessageType::kAutomatonRegistration: handle_registration(h, b); break;
      case MessageType::kIAmStopping:
        if (h.source.unit == unit() && h.source.automaton != 0) automaton_stopping(h.source.automaton, b);
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

  wire::Address cs_address() const { return wire::Address::config_server(address().entity); }
  wire::Address automaton_address(std::uint8_t a) const { return {address().entity, unit(), a}; }

  wire::ConfigBody body() const {
    wire::ConfigBody b;
    b.unit = unit();
    b.reply_to = endpoint();
    return b;
  }

  void cancel_pending() {
    if (pending_) cancel(*pending_);
    pending_.reset();
  }

  /// Announces to the next server in list order; silence for T moves on.
  void announce() {
    if (registered_ || servers_.empty()) return;
    const std::string& ep = servers_[cs_index_ % servers_.size()];
    note("registrar.announce", {{"config_server", ep}});
    send_config(ep, wire::MessageType::kAnnounceRegistrar, cs_address(), body());
    cancel_pending();
    pending_ = after(timing_.heartbeat, [this] {
      pending_.reset();
      cs_index_ = (cs_index_ + 1) % servers_.size();
      announce();
    });
  }

  void arm_config_server() {
    arm(cs_watch_, [this] {
      note("registrar.config_server.lost", {{"config_server", cs_endpoint_}});
      registered_ = false;
      cs_endpoint_.clear();
      cs_index_ = 0;
      announce();
    });
  }

  void heartbeat_config_server() { send_config(cs_endpoint_, wire::MessageType::kHeartbeat, cs_address(), body()); }

  void heartbeat_automata() {
    for (const auto& [a, r] : automata_) {
      auto b = body();
      b.automaton = a;
      send_config(r.endpoint, wire::MessageType::kHeartbeat, automaton_address(a), b);
    }
  }

  void reject(const wire::ConfigBody& b, wire::ConfigCode code) {
    auto r = body();
    r.automaton = b.automaton;
    r.code = code;
    note("registrar.admission.rejected", {{"automaton", b.automaton}, {"code", transport::to_string(code)}});
    send_config(b.reply_to, wire::MessageType::kRejection, automaton_address(b.automaton), r);
  }

  void handle_registration(const wire::MessageHeader& h, const wire::ConfigBody& b) {
    if (!registered_) return reject(b, wire::ConfigCode::kNotRegistered);
    if (b.unit != unit() || h.source.unit != unit()) return reject(b, wire::ConfigCode::kWrongUnit);
    if (b.automaton == 0 || b.automaton >= wire::Address::kFieldLimit) return reject(b, wire::ConfigCode::kWrongUnit);
    auto it = automata_.find(b.automaton);
    if (it != automata_.end() && it->second.endpoint != b.reply_to) {
      return reject(b, wire::ConfigCode::kDuplicateAutomaton);
    }
    admit(b.automaton, b.reply_to);
    auto r = body();
    r.automaton = b.automaton;
    send_config(b.reply_to, wire::MessageType::kYouAreIn, automaton_address(b.automaton), r);
    announce_change(wire::MessageType::kIAmStarting, b.automaton, b.reply_to);
  }

  void admit(std::uint8_t a, const std::string& ep) {
    auto& rec = automata_[a];
    if (!rec.watch) rec.watch = std::make_shared<Watch>(timing_.automaton_heartbeat, timing_.misses);
    rec.endpoint = ep;
    awaiting_stop_.erase(a);
    note("registrar.admitted", {{"automaton", a}, {"endpoint", ep}});
    watch_automaton(a);
  }

  void watch_automaton(std::uint8_t a) {
    arm(automata_.at(a).watch, [this, a] { declare_dead(a); });
  }

  /// Heartbeat from an automaton. After a restart of this registrar the
  /// table is empty, so unknown senders are taken back from the heartbeat.
  void automaton_heartbeat(std::uint8_t a, const wire::ConfigBody& b) {
    auto it = automata_.find(a);
    if (it == automata_.end()) {
      if (b.reply_to.empty()) return;
      note("registrar.repopulated", {{"automaton", a}, {"endpoint", b.reply_to}});
      admit(a, b.reply_to);
      if (!gateway_.empty()) {
        auto n = body();
        n.automaton = a;
        n.endpoint = b.reply_to;
        send_config(gateway_, wire::MessageType::kIAmStarting,
                    transport::RmeGateway::address_for(address().entity), n);
      }
      return;
    }
    if (it->second.endpoint == b.reply_to) watch_automaton(a);
  }

  void declare_dead(std::uint8_t a) {
    auto it = automata_.find(a);
    if (it == automata_.end()) return;
    std::string ep = it->second.endpoint;
    note("registrar.automaton.dead", {{"automaton", a}, {"endpoint", ep},
                                      {"last_seen_us", it->second.watch->monitor.last_seen.count()}});
    automata_.erase(it);
    auto b = body();
    b.automaton = a;
    send_config(ep, wire::MessageType::kYouAreDead, automaton_address(a), b);
    // A hung automaton answers with I-am-stopping, which is then relayed.
    // A dead one never does; relay on its behalf after one period.
    awaiting_stop_[a] = ep;
    after(timing_.automaton_heartbeat, [this, a] {
      auto w = awaiting_stop_.find(a);
      if (w == awaiting_stop_.end()) return;
      std::string endpoint = w->second;
      awaiting_stop_.erase(w);
      announce_change(wire::MessageType::kIAmStopping, a, endpoint);
    });
  }

  void automaton_stopping(std::uint8_t a, const wire::ConfigBody& b) {
    auto w = awaiting_stop_.find(a);
    if (w != awaiting_stop_.end()) {
      awaiting_stop_.erase(w);
      announce_change(wire::MessageType::kIAmStopping, a, b.reply_to);
      return;
    }
    auto it = automata_.find(a);
    if (it == automata_.end() || it->second.endpoint != b.reply_to) return;
    disarm(*it->second.watch);
    automata_.erase(it);
    note("registrar.automaton.stopped", {{"automaton", a}});
    announce_change(wire::MessageType::kIAmStopping, a, b.reply_to);
  }

  /// I-am-starting / I-am-stopping go to the unit's other automata, the
  /// other registrars and the gateway.
  void announce_change(wire::MessageType type, std::uint8_t a, const std::string& ep) {
    auto b = body();
    b.automaton = a;
    b.endpoint = ep;
    const auto entity = address().entity;
    for (const auto& [other, r] : automata_) {
      if (other != a) send_config(r.endpoint, type, automaton_address(other), b);
    }
    for (const auto& [u, rep] : peers_) send_config(rep, type, wire::Address::registrar(entity, u), b);
    if (!gateway_.empty()) send_config(gateway_, type, transport::RmeGateway::address_for(entity), b);
  }

  std::vector<std::string> servers_;
  std::string gateway_;
  Timing timing_;
  bool registered_ = false;
  std::string cs_endpoint_;
  std::size_t cs_index_ = 0;
  Duration backoff_{0};
  std::optional<simnet::TimerId> pending_;
  std::shared_ptr<Watch> cs_watch_;
  std::map<std::uint8_t, Record> automata_;
  std::map<std::uint8_t, std::string> peers_;
  std::map<std::uint8_t, std::string> awaiting_stop_;
};

}  // namespace medsync::registry
