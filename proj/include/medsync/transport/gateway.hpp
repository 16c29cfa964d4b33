#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "medsync/registry/heartbeat.hpp"
#include "medsync/transport/station.hpp"

namespace medsync::transport {

struct GatewayPeer {
  std::uint8_t entity = 0;
  std::string endpoint;
};

struct Subscription {
  std::uint8_t unit = 0;
  wire::MessageType type = wire::MessageType::kVitalSign;
  wire::Address subscriber;

  wire::TopicKey topic() const { return wire::make_topic(unit, type); }
  friend auto operator<=>(const Subscription&, const Subscription&) = default;
};

enum class SubscribeResult { kAccepted, kAlreadySubscribed, kRejected };

/// Remote Message Exchange gateway. Federates this entity with peer
/// entities over one persistent link each. Application frames are routed
/// by header only (the payload stays sealed), so one copy crosses each link
/// and fan-out to subscribers happens at the receiving side.
///
/// Remote interest travels on the keepalive heartbeat: its topic list is
/// the set of topics with at least one local subscriber.
class RmeGateway : public Station {
 public:
  static constexpr std::uint8_t kAutomatonUid = 30;
  static constexpr wire::Address address_for(std::uint8_t entity) { return {entity, 0, kAutomatonUid}; }

  RmeGateway(StationEnv env, StationConfig cfg, std::vector<GatewayPeer> peers, registry::Timing timing = {})
      : Station(std::move(env), std::move(cfg)), timing_(timing) {
    for (auto& p : peers) {
      PeerState st;
      st.info = std::move(p);
      st.watch = std::make_shared<registry::Watch>(timing_.heartbeat, timing_.misses);
      peers_.emplace(st.info.entity, std::move(st));
    }
  }

  std::string_view kind() const override { return "gateway"; }

  SubscribeResult subscribe(const Subscription& s) {
    if (s.subscriber.entity != address().entity || !directory_.count(key_of(s.subscriber))) {
      note("rme.subscribe.rejected", sub_json(s));
      return SubscribeResult::kRejected;
    }
    if (!table_.insert(s).second) return SubscribeResult::kAlreadySubscribed;
    note("rme.subscribe", sub_json(s));
    topics_changed();
    return SubscribeResult::kAccepted;
  }

  bool unsubscribe(const Subscription& s) {
    pending_.erase(s);
    if (!table_.erase(s)) return false;
    note("rme.unsubscribe", sub_json(s));
    topics_changed();
    return true;
  }

  /// Subscription taken from configuration: activated as soon as the
  /// subscriber is known to be registered.
  void configure_subscription(const Subscription& s) {
    if (directory_.count(key_of(s.subscriber))) {
      subscribe(s);
    } else {
      pending_.insert(s);
    }
  }

  std::set<wire::TopicKey> local_topics() const {
    std::set<wire::TopicKey> out;
    for (const auto& s : table_) out.insert(s.topic());
    return out;
  }

  std::set<wire::TopicKey> remote_topics(std::uint8_t entity) const {
    auto it = peers_.find(entity);
    return it == peers_.end() ? std::set<wire::TopicKey>{} : it->second.remote_topics;
  }

  /// Data frames (not keepalives) sent over the link to `entity`.
  std::uint64_t forwarded_to(std::uint8_t entity) const {
    auto it = peers_.find(entity);
    return it == peers_.end() ? 0 : it->second.forwarded;
  }
  std::uint64_t delivered_local() const { return delivered_local_; }
  std::uint64_t dead_letters() const { return counters().frames_dead_lettered; }
  bool peer_up(std::uint8_t entity) const {
    auto it = peers_.find(entity);
    return it != peers_.end() && it->second.up;
  }
  std::optional<std::string> local_endpoint(wire::Address a) const {
    auto it = directory_.find(key_of(a));
    if (it == directory_.end()) return std::nullopt;
    return it->second;
  }

  Json snapshot() const override {
    Json j = Station::snapshot();
    Json peers = Json::array();
    for (const auto& [e, p] : peers_) {
      peers.push_back({{"entity", e}, {"endpoint", p.info.endpoint}, {"up", p.up}, {"forwarded", p.forwarded},
                       {"remote_topics", p.remote_topics}});
    }
    j["peers"] = peers;
    j["subscriptions"] = table_.size();
    j["delivered_local"] = delivered_local_;
    j["dead_letters"] = dead_letters();
    return j;
  }

 protected:
  void on_start() override {
    for (auto& [e, p] : peers_) {
      p.up = true;
      arm_peer(e);
    }
    every(timing_.heartbeat, [this] { send_keepalives(); }, Duration{0});
  }

  void on_kill() override {
    directory_.clear();
    for (auto& [_, p] : peers_) disarm(*p.watch);
  }

  void on_frame(wire::Bytes frame) override {
    wire::MessageHeader h;
    try {
      h = wire::peek_header(frame);
    } catch (const wire::WireError& e) {
      ++mutable_counters().frames_dropped;
      note("frame.rejected", {{"error", wire::to_string(e.code())}});
      return;
    }
    if (wire::kind_of(h.type) == wire::MessageKind::kConfiguration) {
      open_and_dispatch(frame);
      return;
    }
    if (env().checksum && h.checksum_flag && !wire::verify_checksum(frame)) {
      ++mutable_counters().frames_dropped;
      note("frame.rejected", {{"error", "integrity"}});
      return;
    }
    route(h, std::move(frame));
  }

  void on_config(const wire::MessageHeader& h, const wire::ConfigBody& b) override {
    using wire::MessageType;
    switch (h.type) {
      case MessageType::kHeartbeat: {
        auto it = peers_.find(h.source.entity);
        if (it == peers_.end() || h.source.entity == address().entity) return;
        it->second.remote_topics = {b.topics.begin(), b.topics.end()};
        if (!it->second.up) {
          it->second.up = true;
          note("rme.peer.up", {{"entity", h.source.entity}});
          notify_link(h.source.entity, true);
        }
        arm_peer(h.source.entity);
        break;
      }
      case MessageType::kIAmStarting: {
        wire::Address a{address().entity, b.unit, b.automaton};
        directory_[key_of(a)] = b.endpoint;
        note("rme.learned", {{"automaton", wire::to_string(a)}, {"endpoint", b.endpoint}});
        for (auto it = pending_.begin(); it != pending_.end();) {
          if (it->subscriber == a) {
            Subscription s = *it;
            it = pending_.erase(it);
            subscribe(s);
          } else {
            ++it;
          }
        }
        break;
      }
      case MessageType::kIAmStopping: {
        wire::Address a{address().entity, b.unit, b.automaton};
        directory_.erase(key_of(a));
        bool changed = false;
        for (auto it = table_.begin(); it != table_.end();) {
          if (it->subscriber == a) {
            pending_.insert(*it);
            it = table_.erase(it);
            changed = true;
          } else {
            ++it;
          }
        }
        note("rme.forgot", {{"automaton", wire::to_string(a)}});
        if (changed) topics_changed();
        break;
      }
      default:
        break;
    }
  }

 private:
  struct PeerState {
    GatewayPeer info;
    std::set<wire::TopicKey> remote_topics;
    std::shared_ptr<registry::Watch> watch;
    bool up = true;
    std::uint64_t forwarded = 0;
  };

  static std::uint16_t key_of(wire::Address a) { return static_cast<std::uint16_t>(a.unit << 8 | a.automaton); }

  static Json sub_json(const Subscription& s) {
    return {{"unit", s.unit}, {"type", wire::name_of(s.type)}, {"subscriber", wire::to_string(s.subscriber)}};
  }

  void route(const wire::MessageHeader& h, wire::Bytes frame) {
    const std::uint8_t self = address().entity;
    const bool from_local = h.source.entity == self;
    const auto& dst = h.destination;

    if (dst.entity == 0) {
      wire::TopicKey topic = wire::make_topic(dst.unit, h.type);
      std::size_t links = 0;
      if (from_local) {
        for (auto& [e, p] : peers_) {
          if (!p.remote_topics.count(topic)) continue;
          forward(p, frame);
          ++links;
        }
      }
      std::size_t copies = 0;
      for (const auto& s : table_) {
        if (s.topic() != topic || s.subscriber == h.source) continue;
        deliver(s.subscriber, frame);
        ++copies;
      }
      note("rme.publish", {{"msg", wire::name_of(h.type)}, {"src", wire::to_string(h.source)}, {"links", links},
                           {"local_copies", copies}});
      return;
    }
    if (dst.entity == self) {
      deliver(dst, std::move(frame));
      return;
    }
    auto it = peers_.find(dst.entity);
    if (!from_local || it == peers_.end()) {
      dead_letter(h, from_local ? "no link to destination entity" : "transit routing not supported");
      return;
    }
    forward(it->second, std::move(frame));
  }

  void forward(PeerState& p, wire::Bytes frame) {
    ++p.forwarded;
    send_raw(p.info.endpoint, std::move(frame));
  }

  void deliver(wire::Address dst, wire::Bytes frame) {
    auto it = directory_.find(key_of(dst));
    if (it == directory_.end()) {
      wire::MessageHeader h = wire::peek_header(frame);
      dead_letter(h, "destination automaton not registered");
      return;
    }
    ++delivered_local_;
    send_raw(it->second, std::move(frame));
  }

  void dead_letter(const wire::MessageHeader& h, std::string_view reason) {
    ++mutable_counters().frames_dead_lettered;
    note("rme.dead_letter", {{"msg", wire::name_of(h.type)}, {"src", wire::to_string(h.source)},
                             {"dst", wire::to_string(h.destination)}, {"reason", reason}});
  }

  void arm_peer(std::uint8_t entity) {
    auto& p = peers_.at(entity);
    arm(p.watch, [this, entity] {
      auto& peer = peers_.at(entity);
      if (!peer.up) return;
      peer.up = false;
      note("rme.peer.down", {{"entity", entity}});
      notify_link(entity, false);
    });
  }

  void send_keepalives() {
    auto topics = local_topics();
    for (auto& [e, p] : peers_) {
      wire::ConfigBody b;
      b.unit = address().entity;
      b.reply_to = endpoint();
      b.topics.assign(topics.begin(), topics.end());
      send_config(p.info.endpoint, wire::MessageType::kHeartbeat, address_for(e), b);
    }
  }

  void topics_changed() {
    if (alive()) send_keepalives();
  }

  /// Link notices reuse the heartbeat message: code link-down/link-up, unit
  /// field carries the peer entity UID.
  void notify_link(std::uint8_t entity, bool up) {
    for (const auto& [key, ep] : directory_) {
      wire::ConfigBody b;
      b.unit = entity;
      b.code = up ? wire::ConfigCode::kLinkUp : wire::ConfigCode::kLinkDown;
      b.reply_to = endpoint();
      wire::Address dst{address().entity, static_cast<std::uint8_t>(key >> 8), static_cast<std::uint8_t>(key & 0xff)};
      send_config(ep, wire::MessageType::kHeartbeat, dst, b);
    }
  }

  registry::Timing timing_;
  std::map<std::uint8_t, PeerState> peers_;
  std::map<std::uint16_t, std::string> directory_;
  std::set<Subscription> table_;
  std::set<Subscription> pending_;
  std::uint64_t delivered_local_ = 0;
};

}  // namespace medsync::transport
