#pragma once

#include <memory>
#include <string>
#include <vector>

#include "medsync/common/metrics.hpp"
#include "medsync/common/trace.hpp"
#include "medsync/node/scenario.hpp"
#include "medsync/simnet/clock.hpp"
#include "medsync/simnet/network.hpp"

namespace medsync::node {

struct SimOptions {
  bool retain_trace = true;
  std::size_t trace_capacity = 0;  // 0 = unbounded
  /// Compare project(center) with the rural state at every quiescent point.
  bool check_projection = true;
  Duration sample_period = from_seconds(1);
};

/// One sample of inbox occupancy across every component.
struct DepthSample {
  SimTime t{0};
  std::uint64_t total = 0;
  std::uint64_t max = 0;
};

struct ProjectionStats {
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
  std::vector<Json> first_violations;  // at most 10 kept
};

/// A synchronized pair found in the scenario: the rural follower and its
/// center authority.
struct SyncPair {
  Entity* follower_entity = nullptr;
  registry::AutomatonHost* follower = nullptr;
  Entity* authority_entity = nullptr;
  registry::AutomatonHost* authority = nullptr;
};

/// Owns a run: clock, network, trace, metrics and every entity. In virtual
/// mode run() drives it single-threaded; in real-time mode the caller pumps
/// the clock and funnels commands through apply().
class Simulation {
 public:
  explicit Simulation(Scenario sc, SimOptions opt = {})
      : sc_(std::move(sc)), opt_(opt), network_(clock_, &trace_, sc_.seed) {
    trace_.set_retained(opt_.retain_trace);
    trace_.set_capacity(opt_.trace_capacity);
    network_.set_intra_site_profile(sc_.intra_site);
    for (const auto& l : sc_.links) network_.connect(l.a, l.b, l.profile);

    transport::StationEnv env;
    env.clock = &clock_;
    env.network = &network_;
    env.trace = &trace_;
    env.metrics = &metrics_;
    auto projection_of = [this](const AutomatonSpec& a) {
      const EntitySpec* ce = sc_.entity(a.counterpart.entity);
      const AutomatonSpec* c = ce ? ce->find(a.counterpart.unit, a.counterpart.automaton) : nullptr;
      return c ? models::load(c->model)->projection : std::map<std::uint8_t, std::uint8_t>{};
    };
    for (const auto& spec : sc_.entities) entities_.push_back(std::make_unique<Entity>(spec, env, projection_of));

    for (const auto& e : entities_) {
      for (auto* h : e->hosts()) {
        if (h->host_config().sync.role != automaton::SyncRole::kFollower) continue;
        const auto& cp = h->host_config().sync.counterpart;
        Entity* ce = entity(cp.entity);
        pairs_.push_back({e.get(), h, ce, ce ? ce->host(cp.unit, cp.automaton) : nullptr});
      }
    }
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const Scenario& scenario() const { return sc_; }
  simnet::VirtualClock& clock() { return clock_; }
  simnet::Network& network() { return network_; }
  const simnet::Network& network() const { return network_; }
  TraceLog& trace() { return trace_; }
  const TraceLog& trace() const { return trace_; }
  MetricsRegistry& metrics() { return metrics_; }
  const MetricsRegistry& metrics() const { return metrics_; }
  const std::vector<std::unique_ptr<Entity>>& entities() const { return entities_; }
  const std::vector<SyncPair>& pairs() const { return pairs_; }
  const ProjectionStats& projection() const { return projection_; }
  const std::vector<DepthSample>& depth_series() const { return depth_; }
  SimTime now() const { return clock_.now(); }
  SimTime end_time() const { return from_seconds(sc_.duration_s); }

  Entity* entity(std::uint8_t uid) const {
    for (const auto& e : entities_) {
      if (e->uid() == uid) return e.get();
    }
    return nullptr;
  }

  transport::Station* component(const std::string& endpoint) const {
    for (const auto& e : entities_) {
      if (auto* c = e->component(endpoint)) return c;
    }
    return nullptr;
  }

  registry::AutomatonHost* host(wire::Address a) const {
    Entity* e = entity(a.entity);
    return e ? e->host(a.unit, a.automaton) : nullptr;
  }

  /// Schedules component starts, configured subscriptions, scenario events
  /// and the queue-depth sampler. Idempotent.
  void start() {
    if (started_) return;
    started_ = true;
    trace_.emit(clock_.now(), "scenario", "scenario.start",
                {{"name", sc_.name}, {"seed", sc_.seed}, {"duration_s", sc_.duration_s}});
    for (const auto& e : entities_) {
      e->schedule_starts(clock_, clock_.now());
      e->configure_subscriptions();
    }
    for (const auto& ev : sc_.events) {
      clock_.schedule_at(from_seconds(ev["at_s"].get<double>()), [this, ev] { apply(ev, "scenario"); }, "event");
    }
    sample();
  }

  /// Runs to `t`, stepping one timestamp at a time so quiescent points
  /// can be inspected between them.
  void run_until(SimTime t) {
    start();
    while (auto due = clock_.next_due()) {
      if (*due > t) break;
      clock_.step();
      if (opt_.check_projection && !pairs_.empty()) check_quiescent();
    }
    clock_.advance_to(t);
  }

  void run() {
    run_until(end_time());
    trace_.emit(clock_.now(), "scenario", "scenario.end", {{"name", sc_.name}});
  }

  /// Applies one operator or fault event through the same paths a live
  /// operator uses. Throws SpecError if the event does not validate.
  Json apply(const Json& ev, std::string_view origin) {
    auto problems = validate_event(sc_, ev, false);
    if (!problems.empty()) throw SpecError(std::move(problems));
    const std::string what = ev["do"];
    Json rec = ev;
    rec.erase("at_s");
    rec["origin"] = origin;
    trace_.emit(clock_.now(), "scenario", "scenario.event", rec);

    if (what == "inject" || what == "confirm" || what == "override") {
      auto a = *parse_address(ev["target"].get<std::string>());
      Entity* e = entity(a.entity);
      auto* h = e->host(a.unit, a.automaton);
      wire::AppBody body;
      std::uint8_t prio = transport::Priority::kCommand;
      if (what == "inject" && ev.contains("vitals")) {
        wire::VitalSignBody v;
        for (const auto& [k, x] : ev["vitals"].items()) v.readings.push_back({k, x.get<double>()});
        body = v;
        prio = transport::Priority::kVitalSign;
      } else if (what == "inject") {
        body = wire::CommandBody{ev["command"].get<std::string>(), static_cast<std::uint8_t>(ev.value("argument", 0))};
      } else if (what == "confirm") {
        body = wire::CommandBody{ev.value("accept", true) ? "confirm" : "reject", 0};
      } else {
        body = wire::CommandBody{"override", static_cast<std::uint8_t>(ev["state"].get<int>())};
      }
      e->operator_console().inject(h->endpoint(), a, std::move(body), prio);
    } else if (what == "link") {
      network_.set_link_up(ev["a"], ev["b"], ev["up"].get<bool>());
    } else {
      auto* c = component(ev["component"]);
      if (what == "kill") {
        c->kill();
      } else if (what == "hang") {
        c->hang();
      } else if (what == "restart") {
        c->kill();
        c->start();
      } else if (auto* h = dynamic_cast<registry::AutomatonHost*>(c)) {
        h->shutdown();
      } else if (auto* r = dynamic_cast<registry::Registrar*>(c)) {
        r->shutdown();
      }
    }
    return {{"applied", what}, {"t_us", clock_.now().count()}};
  }

  /// Nothing in transit and every inbox drained.
  bool quiescent() const {
    if (network_.in_flight() != 0) return false;
    for (const auto& e : entities_) {
      for (const auto& c : e->components()) {
        if (c->inbox().size() != 0) return false;
      }
    }
    return true;
  }

  /// A pair is comparable when both sides are up, registered, believe the
  /// link is up, the network agrees and no proposal awaits the operator.
  bool comparable(const SyncPair& p) const {
    if (!p.authority) return false;
    for (auto* h : {p.follower, p.authority}) {
      if (!h->alive() || h->hung() || h->phase() != registry::Phase::kRegistered || !h->instance()) return false;
      if (!h->instance()->link_up()) return false;
    }
    if (p.authority->synchronizer().pending_proposal()) return false;
    return network_.link_up(p.follower->site(), p.authority->site()) &&
           network_.link_up(p.authority->site(), p.follower->site());
  }

  Json snapshot() const {
    Json ents = Json::array();
    for (const auto& e : entities_) ents.push_back(e->snapshot());
    Json links = Json::array();
    for (const auto& l : sc_.links) {
      links.push_back({{"a", l.a}, {"b", l.b}, {"up", network_.link_up(l.a, l.b) && network_.link_up(l.b, l.a)}});
    }
    return {{"scenario", sc_.name}, {"seed", sc_.seed}, {"t_us", clock_.now().count()},
            {"entities", ents}, {"links", links}, {"trace_seq", trace_.emitted()}};
  }

 private:
  void check_quiescent() {
    if (!quiescent()) return;
    for (const auto& p : pairs_) {
      if (!comparable(p)) continue;
      ++projection_.checks;
      std::uint8_t center = p.authority->instance()->current();
      std::uint8_t image = p.authority->synchronizer().image_of(*p.authority->instance());
      std::uint8_t rural = p.follower->instance()->current();
      if (image == rural) continue;
      ++projection_.violations;
      Json v = {{"t_us", clock_.now().count()}, {"follower", p.follower->endpoint()},
                {"authority", p.authority->endpoint()}, {"center", center}, {"image", image}, {"rural", rural}};
      trace_.emit(clock_.now(), "scenario", "projection.mismatch", v);
      if (projection_.first_violations.size() < 10) projection_.first_violations.push_back(v);
    }
  }

  void sample() {
    DepthSample s;
    s.t = clock_.now();
    for (const auto& e : entities_) {
      for (const auto& c : e->components()) {
        std::uint64_t d = c->inbox().size();
        s.total += d;
        s.max = std::max(s.max, d);
      }
    }
    depth_.push_back(s);
    clock_.schedule_after(opt_.sample_period, [this] { sample(); }, "sample");
  }

  Scenario sc_;
  SimOptions opt_;
  simnet::VirtualClock clock_;
  TraceLog trace_;
  MetricsRegistry metrics_;
  simnet::Network network_;
  std::vector<std::unique_ptr<Entity>> entities_;
  std::vector<SyncPair> pairs_;
  ProjectionStats projection_;
  std::vector<DepthSample> depth_;
  bool started_ = false;
};

}  // namespace medsync::node
