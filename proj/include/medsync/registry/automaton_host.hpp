#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "medsync/automaton/instance.hpp"
#include "medsync/automaton/sync.hpp"
#include "medsync/registry/heartbeat.hpp"
#include "medsync/transport/station.hpp"

namespace medsync::registry {

enum class Phase { kDown, kLocating, kQueryingRegistrar, kRegistering, kRegistered, kImpossible };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::kDown: return "down";
    case Phase::kLocating: return "locating-config-server";
    case Phase::kQueryingRegistrar: return "querying-registrar";
    case Phase::kRegistering: return "registering";
    case Phase::kRegistered: return "registered";
    case Phase::kImpossible: return "registration-impossible";
  }
  return "?";
}

struct HostConfig {
  automaton::DefPtr model;
  std::vector<std::string> config_servers;
  std::string gateway;
  automaton::SyncConfig sync;
  /// Publish operator vital signs to (0, unit, 0) for subscribers.
  bool publish_vitals = false;
  Timing timing;
};

/// One automaton process: registers through the three-phase handshake,
/// heartbeats its registrar and runs a statechart instance. Operator input
/// arrives as application frames from (e, 31, 31); synchronization traffic
/// goes through the entity gateway to the counterpart.
///
/// Operator commands "override" (argument = state UID), "confirm" and
/// "reject" act on the instance directly; any other command is a model
/// trigger.
class AutomatonHost : public transport::Station {
 public:
  AutomatonHost(transport::StationEnv env, transport::StationConfig cfg, HostConfig host)
      : Station(std::move(env), std::move(cfg)),
        host_(std::move(host)),
        sync_(host_.sync),
        registrar_watch_(std::make_shared<Watch>(host_.timing.automaton_heartbeat, host_.timing.misses)) {}

  std::string_view kind() const override { return "automaton"; }

  std::uint8_t unit() const { return address().unit; }
  std::uint8_t uid() const { return address().automaton; }
  Phase phase() const { return alive() ? phase_ : Phase::kDown; }
  const std::string& registrar_status() const { return registrar_status_; }
  const std::string& registrar_endpoint() const { return registrar_ep_; }
  const std::map<std::uint8_t, std::string>& peers() const { return peers_; }
  const automaton::Instance* instance() const { return inst_ ? &*inst_ : nullptr; }
  const automaton::Synchronizer& synchronizer() const { return sync_; }
  const HostConfig& host_config() const { return host_; }
  const std::vector<Duration>& sync_latencies() const { return sync_latencies_; }
  std::uint64_t observed() const { return observed_; }

  /// Voluntary stop: the registrar is told first, so no you-are-dead follows.
  void shutdown() {
    if (!alive()) return;
    note("automaton.shutdown", {});
    if (phase_ == Phase::kRegistered) {
      send_config(registrar_ep_, wire::MessageType::kIAmStopping, registrar_address(), body());
    }
    kill();
  }

  Json snapshot() const override {
    Json j = Station::snapshot();
    j["model"] = host_.model->name;
    j["phase"] = to_string(phase());
    j["registrar_status"] = registrar_status_;
    j["registrar"] = registrar_ep_;
    j["role"] = automaton::to_string(host_.sync.role);
    if (host_.sync.role != automaton::SyncRole::kNone) j["counterpart"] = wire::to_string(host_.sync.counterpart);
    Json peers = Json::object();
    for (const auto& [a, ep] : peers_) peers[std::to_string(a)] = ep;
    j["peers"] = peers;
    if (inst_) {
      const auto& s = inst_->current_state();
      j["state"] = {{"uid", s.uid}, {"name", s.name}, {"safety", automaton::to_string(s.safety)}};
      j["queued_safe"] = {{"uid", inst_->queued_safe()}, {"name", inst_->def().at(inst_->queued_safe()).name}};
      j["entered_at_us"] = inst_->entered_at().count();
      j["dwell_deadline_us"] = inst_->dwell_deadline() ? Json(inst_->dwell_deadline()->count()) : Json(nullptr);
      j["link_up"] = inst_->link_up();
      j["latest"] = inst_->latest();
      j["seq"] = inst_->last_seq();
    }
    auto pending = sync_.pending_proposal();
    j["pending_proposal"] = pending ? Json(*pending) : Json(nullptr);
    return j;
  }

 protected:
  void on_start() override {
    inst_.emplace(host_.model, now());
    inst_->seed_seq(static_cast<std::uint32_t>(now().count() / 1000));
    sync_ = automaton::Synchronizer(host_.sync);
    ++incarnation_;
    peers_.clear();
    cs_index_ = 0;
    attempts_ = 0;
    backoff_ = host_.timing.backoff_initial;
    registrar_status_ = "unknown";
    note("automaton.state", state_json());
    every(host_.timing.automaton_heartbeat, [this] {
      if (phase_ == Phase::kRegistered) {
        send_config(registrar_ep_, wire::MessageType::kHeartbeat, registrar_address(), body());
      }
    });
    locate();
  }

  void on_kill() override {
    phase_ = Phase::kDown;
    phase_timer_.reset();
    tick_.reset();
    disarm(*registrar_watch_);
  }

  bool accepts_while_hung(wire::MessageType t) const override { return t == wire::MessageType::kYouAreDead; }

  void on_config(const wire::MessageHeader& h, const wire::ConfigBody& b) override {
    using wire::MessageType;
    switch (h.type) {
      case MessageType::kConfigServerLocated:
        if (phase_ != Phase::kLocating && phase_ != Phase::kImpossible) return;
        cancel_phase_timer();
        cs_endpoint_ = b.endpoint;
        attempts_ = 0;
        note("automaton.config_server", {{"endpoint", cs_endpoint_}, {"rank", b.rank}});
        query_registrar();
        break;
      case MessageType::kUnitSpec:
        if (phase_ != Phase::kQueryingRegistrar || b.unit != unit()) return;
        cancel_phase_timer();
        registrar_ep_ = b.endpoint;
        registrar_status_ = "located";
        backoff_ = host_.timing.backoff_initial;
        register_now();
        break;
      case MessageType::kRegistrarUnknown:
        if (phase_ != Phase::kQueryingRegistrar) return;
        cancel_phase_timer();
        registrar_status_ = "registrar-unknown";
        note("automaton.registrar_unknown", {{"retry_in_us", backoff_.count()}});
        phase_timer_ = after(backoff_, [this] { query_registrar(); });
        backoff_ = std::min(backoff_ * 2, host_.timing.backoff_cap);
        break;
      case MessageType::kYouAreIn:
        if (phase_ != Phase::kRegistering) return;
        cancel_phase_timer();
        phase_ = Phase::kRegistered;
        registrar_status_ = "registered";
        note("automaton.registered", {{"registrar", registrar_ep_}});
        arm_registrar();
        send_config(registrar_ep_, MessageType::kHeartbeat, registrar_address(), body());
        if (incarnation_ > 1 && host_.sync.role != automaton::SyncRole::kNone) {
          // Back from a restart: tell the counterpart where we are so the
          // authority can correct us.
          route(inst_->confirmation(now()));
        }
        break;
      case MessageType::kRejection:
        if (phase_ != Phase::kRegistering) return;
        cancel_phase_timer();
        note("automaton.rejected", {{"code", transport::to_string(b.code)}, {"retry_in_us", backoff_.count()}});
        phase_timer_ = after(backoff_, [this] { query_registrar(); });
        backoff_ = std::min(backoff_ * 2, host_.timing.backoff_cap);
        break;
      case MessageType::kHeartbeat:
        if (b.code == wire::ConfigCode::kLinkDown || b.code == wire::ConfigCode::kLinkUp) {
          link_notice(b.unit, b.code == wire::ConfigCode::kLinkUp);
        } else if (phase_ == Phase::kRegistered && h.source == registrar_address() && b.reply_to == registrar_ep_) {
          arm_registrar();
        }
        break;
      case MessageType::kIAmStarting:
        if (b.unit != unit() || b.automaton == uid()) return;
        peers_[b.automaton] = b.endpoint;
        {
          auto here = body();
          here.endpoint = endpoint();
          send_config(b.endpoint, MessageType::kIAmHere, {address().entity, unit(), b.automaton}, here);
        }
        break;
      case MessageType::kIAmHere:
        if (h.source.unit == unit() && h.source.automaton != uid()) peers_[h.source.automaton] = b.reply_to;
        break;
      case MessageType::kIAmStopping:
        if (b.unit == unit()) peers_.erase(b.automaton);
        break;
      case MessageType::kYouAreDead:
        note("automaton.terminated", {{"registrar", b.reply_to}});
        send_config(b.reply_to, MessageType::kIAmStopping, h.source, body());
        kill();
        break;
      default:
        break;
    }
  }

  void on_app(const wire::MessageHeader& h, const wire::AppMessage& msg) override {
    if (!inst_) return;
    if (h.source == wire::Address::operator_console(address().entity)) return operator_event(msg);
    if (h.destination.entity == 0) {
      ++observed_;
      return;
    }
    if (host_.sync.role != automaton::SyncRole::kNone && h.source == host_.sync.counterpart) {
      return counterpart_event(h, msg);
    }
    note("automaton.ignored", {{"src", wire::to_string(h.source)}, {"msg", wire::name_of(h.type)}});
  }

 private:
  using Role = automaton::SyncRole;

  wire::Address registrar_address() const { return wire::Address::registrar(address().entity, unit()); }
  wire::Address cs_address() const { return wire::Address::config_server(address().entity); }
  bool follower() const { return host_.sync.role == Role::kFollower; }

  wire::ConfigBody body() const {
    wire::ConfigBody b;
    b.unit = unit();
    b.automaton = uid();
    b.reply_to = endpoint();
    return b;
  }

  void cancel_phase_timer() {
    if (phase_timer_) cancel(*phase_timer_);
    phase_timer_.reset();
  }

  /// Phase 1: cycle the known server list at the discovery interval; after
  /// R unanswered queries registration is impossible for a backoff-cap pause.
  void locate() {
    if (host_.config_servers.empty()) return;
    if (attempts_ >= host_.timing.discovery_retries) {
      phase_ = Phase::kImpossible;
      registrar_status_ = "registration-impossible";
      note("automaton.registration_impossible", {{"attempts", attempts_}});
      attempts_ = 0;
      cs_index_ = 0;
      phase_timer_ = after(host_.timing.backoff_cap, [this] { locate(); });
      return;
    }
    phase_ = Phase::kLocating;
    const auto& ep = host_.config_servers[cs_index_ % host_.config_servers.size()];
    cs_index_ = (cs_index_ + 1) % host_.config_servers.size();
    ++attempts_;
    send_config(ep, wire::MessageType::kConfigServerQuery, cs_address(), body());
    phase_timer_ = after(host_.timing.discovery_interval, [this] { locate(); });
  }

  /// Phase 2. An unanswered query means the server went away: start over.
  void query_registrar() {
    phase_ = Phase::kQueryingRegistrar;
    send_config(cs_endpoint_, wire::MessageType::kRegistrarQuery, cs_address(), body());
    phase_timer_ = after(host_.timing.heartbeat, [this] {
      note("automaton.config_server.silent", {{"endpoint", cs_endpoint_}});
      cs_index_ = 0;
      attempts_ = 0;
      locate();
    });
  }

  /// Phase 3.
  void register_now() {
    phase_ = Phase::kRegistering;
    send_config(registrar_ep_, wire::MessageType::kAutomatonRegistration, registrar_address(), body());
    phase_timer_ = after(host_.timing.heartbeat, [this] { query_registrar(); });
  }

  void arm_registrar() {
    arm(registrar_watch_, [this] {
      note("automaton.registrar.lost", {{"registrar", registrar_ep_}});
      registrar_status_ = "lost";
      query_registrar();
    });
  }

  void link_notice(std::uint8_t entity, bool up) {
    if (host_.sync.role == Role::kNone || entity != host_.sync.counterpart.entity) return;
    note("automaton.link", {{"up", up}, {"entity", entity}});
    handle(inst_->on_link_change(up, now()));
  }

  void operator_event(const wire::AppMessage& msg) {
    const SimTime t = now();
    if (const auto* v = std::get_if<wire::VitalSignBody>(&msg.body)) {
      // The forward's sequence number is drawn first so it precedes any
      // transition event this reading causes.
      std::uint32_t fwd = follower() ? inst_->next_seq() : 0;
      auto r = inst_->on_readings(v->readings, t);
      if (follower() && !r.rejected) {
        send_counterpart({fwd, *v}, automaton::Instance::kTransitionPriority);
      }
      if (host_.publish_vitals && !r.rejected) {
        send_to({0, unit(), 0}, {inst_->next_seq(), *v}, transport::Priority::kVitalSign);
      }
      handle(std::move(r));
      return;
    }
    if (const auto* c = std::get_if<wire::CommandBody>(&msg.body)) {
      if (c->command == "override") return handle(inst_->override_state(c->argument, t, "operator-override"));
      if (c->command == "confirm" || c->command == "reject") {
        return handle(sync_.resolve_proposal(*inst_, c->command == "confirm", t));
      }
      std::uint32_t fwd = follower() ? inst_->next_seq() : 0;
      auto r = inst_->on_command(c->command, t);
      if (follower()) send_counterpart({fwd, *c}, automaton::Instance::kTransitionPriority);
      handle(std::move(r));
      return;
    }
    note("automaton.ignored", {{"src", "operator"}, {"msg", wire::name_of(wire::type_of(msg.body))}});
  }

  void counterpart_event(const wire::MessageHeader& h, const wire::AppMessage& msg) {
    const SimTime t = now();
    if (const auto* te = std::get_if<wire::TransitionBody>(&msg.body)) {
      auto r = sync_.apply_remote(*inst_, h.source, msg, t);
      if (!r.rejected) sync_latencies_.push_back(t - SimTime(te->entered_at_us));
      return handle(std::move(r));
    }
    if (std::holds_alternative<wire::ConfirmationBody>(msg.body)) {
      return handle(sync_.apply_remote(*inst_, h.source, msg, t));
    }
    if (!sync_.fresh(h.source, msg.seq)) {
      note("automaton.rejected", {{"reason", "stale sequence number " + std::to_string(msg.seq)}});
      return;
    }
    if (const auto* v = std::get_if<wire::VitalSignBody>(&msg.body)) return handle(inst_->on_readings(v->readings, t));
    if (const auto* c = std::get_if<wire::CommandBody>(&msg.body)) return handle(inst_->on_command(c->command, t));
    if (const auto* l = std::get_if<wire::TimeLogBody>(&msg.body)) {
      note("automaton.timelog", {{"from", wire::to_string(h.source)}, {"at_us", l->at_us}, {"note", l->note}});
    }
  }

  Json state_json() const {
    const auto& s = inst_->current_state();
    return {{"uid", s.uid}, {"name", s.name}, {"safety", automaton::to_string(s.safety)},
            {"queued_safe", inst_->queued_safe()}};
  }

  void handle(automaton::StepResult r) {
    if (r.rejected) note("automaton.rejected", {{"reason", *r.rejected}});
    if (r.transitioned) {
      const auto& def = inst_->def();
      Json j = {{"from", r.from},
                {"to", r.to},
                {"from_name", def.at(r.from).name},
                {"to_name", def.at(r.to).name},
                {"cause", r.cause},
                {"safety", automaton::to_string(def.at(r.to).safety)},
                {"queued_safe", inst_->queued_safe()},
                {"link_up", inst_->link_up()}};
      if (auto d = inst_->dwell_deadline()) j["dwell_deadline_us"] = d->count();
      note("automaton.transition", std::move(j));
    }
    for (auto& e : r.emissions) route(std::move(e));
    schedule_tick();
  }

  void route(automaton::Emission e) {
    auto t = e.type();
    bool sync_msg = t == wire::MessageType::kStateTransitionEvent || t == wire::MessageType::kStateConfirmation;
    if (sync_msg || e.target == automaton::ActionTarget::kCounterpart) {
      if (host_.sync.role == Role::kNone) return;
      send_to(host_.sync.counterpart, e.message, e.priority, e.safe_state);
    } else {
      send_to({0, unit(), 0}, e.message, e.priority, e.safe_state);
    }
  }

  void send_counterpart(wire::AppMessage msg, std::uint8_t priority) {
    send_to(host_.sync.counterpart, msg, priority);
  }

  void send_to(wire::Address dst, const wire::AppMessage& msg, std::uint8_t priority) {
    send_to(dst, msg, priority, inst_->queued_safe());
  }

  void send_to(wire::Address dst, const wire::AppMessage& msg, std::uint8_t priority, std::uint8_t safe) {
    if (host_.gateway.empty()) {
      note("automaton.unrouted", {{"dst", wire::to_string(dst)}, {"msg", wire::name_of(wire::type_of(msg.body))}});
      return;
    }
    send_app(host_.gateway, dst, msg, priority, safe);
  }

  void schedule_tick() {
    if (tick_) cancel(*tick_);
    tick_.reset();
    auto due = inst_->next_deadline();
    if (!due) return;
    tick_ = at(*due, [this] {
      tick_.reset();
      handle(inst_->tick(now()));
    });
  }

  HostConfig host_;
  automaton::Synchronizer sync_;
  std::optional<automaton::Instance> inst_;
  Phase phase_ = Phase::kDown;
  int incarnation_ = 0;
  std::string cs_endpoint_;
  std::string registrar_ep_;
  std::string registrar_status_ = "unknown";
  std::size_t cs_index_ = 0;
  int attempts_ = 0;
  Duration backoff_{0};
  std::optional<simnet::TimerId> phase_timer_;
  std::optional<simnet::TimerId> tick_;
  std::shared_ptr<Watch> registrar_watch_;
  std::map<std::uint8_t, std::string> peers_;
  std::vector<Duration> sync_latencies_;
  std::uint64_t observed_ = 0;
};

}  // namespace medsync::registry
