#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "medsync/node/simulation.hpp"

namespace medsync::node {

/// Output directory: the explicit flag if given, else $MEDSYNC_OUT_DIR,
/// else ./out.
inline std::filesystem::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MEDSYNC_OUT_DIR"); env && *env) return env;
  return "out";
}

struct Requirement {
  std::string id;
  std::string title;
  std::string status;  // "pass", "fail" or "n/a"
  std::string detail;
};

inline Json to_json(const Requirement& r) {
  return {{"id", r.id}, {"title", r.title}, {"status", r.status}, {"detail", r.detail}};
}

inline Json counters_json(const ComponentCounters& c) {
  return {{"frames_sent", c.frames_sent},
          {"frames_received", c.frames_received},
          {"frames_dropped", c.frames_dropped},
          {"frames_dead_lettered", c.frames_dead_lettered},
          {"polls", c.polls},
          {"timers", c.timers},
          {"events_processed", c.events_processed},
          {"work_units", c.work_units},
          {"max_queue_depth", c.max_queue_depth}};
}

namespace detail {

inline const registry::AutomatonHost* host_at(const Simulation& sim, const std::string& endpoint) {
  return dynamic_cast<const registry::AutomatonHost*>(sim.component(endpoint));
}

inline Requirement status(std::string id, std::string title, std::size_t checked, std::size_t failed,
                          std::string detail) {
  Requirement r{std::move(id), std::move(title), "pass", std::move(detail)};
  if (checked == 0) r.status = "n/a";
  if (failed > 0) r.status = "fail";
  return r;
}

}  // namespace detail

/// The synchronization requirement list this harness checks after every
/// run. The list is this project's own: the source enumerates none.
inline std::vector<Requirement> check_requirements(const Simulation& sim) {
  std::vector<Requirement> out;
  const auto& records = sim.trace().records();
  const SimTime end = sim.now();

  // Registration: every automaton up for at least 30 s registered.
  {
    std::map<std::string, SimTime> started;
    std::set<std::string> registered;
    for (const auto& r : records) {
      std::string c = r["component"];
      if (r["event"] == "component.start" && r.value("kind", "") == "automaton" && !started.count(c)) {
        started[c] = SimTime(r["t_us"].get<std::int64_t>());
      }
      if (r["event"] == "automaton.registered") registered.insert(c);
    }
    std::size_t checked = 0, failed = 0;
    std::string missing;
    for (const auto& [c, t] : started) {
      if (end - t < from_seconds(30)) continue;
      ++checked;
      if (!registered.count(c)) {
        ++failed;
        missing += " " + c;
      }
    }
    out.push_back(detail::status("R1", "every automaton up for 30 s registers with its unit's registrar", checked,
                                 failed, std::to_string(checked) + " checked" + (failed ? "; missing:" + missing : "")));
  }

  // Dwell bound and queued-before-commit, from transition records.
  {
    std::map<std::string, std::optional<SimTime>> open;  // component -> deadline of current transient occupancy
    std::size_t occupancies = 0, overruns = 0, commits = 0, unqueued = 0;
    std::string first;
    auto close = [&](const std::string& c, SimTime t) {
      auto it = open.find(c);
      if (it == open.end() || !it->second) return;
      if (t > *it->second) {
        ++overruns;
        if (first.empty()) first = c + " left at " + std::to_string(t.count()) + " us";
      }
      it->second.reset();
    };
    for (const auto& r : records) {
      const std::string c = r["component"];
      const SimTime t(r["t_us"].get<std::int64_t>());
      if (r["event"] == "component.kill") {
        open.erase(c);
        continue;
      }
      if (r["event"] != "automaton.transition") continue;
      close(c, t);
      ++commits;
      const auto* h = detail::host_at(sim, c);
      std::uint8_t q = r.value("queued_safe", 0);
      bool queued_ok = h && h->host_config().model->state(q) && h->host_config().model->state(q)->open_loop_safe();
      if (!queued_ok) ++unqueued;
      if (r.value("safety", "") == "transient_safe") {
        ++occupancies;
        if (r.contains("dwell_deadline_us") && r["dwell_deadline_us"].is_number()) {
          open[c] = SimTime(r["dwell_deadline_us"].get<std::int64_t>());
        } else {
          ++overruns;
          if (first.empty()) first = c + " entered a transient state without a dwell deadline";
        }
      }
    }
    for (const auto& [c, deadline] : open) {
      if (deadline && end > *deadline) {
        const auto* h = detail::host_at(sim, c);
        if (h && h->alive()) {
          ++overruns;
          if (first.empty()) first = c + " still transient past its deadline";
        }
      }
    }
    out.push_back(detail::status("R2", "transient-safe occupancy ends by its dwell deadline", occupancies, overruns,
                                 std::to_string(occupancies) + " occupancies" + (first.empty() ? "" : "; " + first)));
    out.push_back(detail::status("R3", "every committed transition carries an open-loop-safe queued state", commits,
                                 unqueued, std::to_string(commits) + " transitions, " + std::to_string(unqueued) +
                                               " without a valid queued state"));
  }

  // Single-copy: a publish crosses each peer link at most once.
  {
    std::size_t publishes = 0, over = 0;
    for (const auto& r : records) {
      if (r["event"] != "rme.publish") continue;
      ++publishes;
      const auto* g = dynamic_cast<const transport::RmeGateway*>(sim.component(r["component"]));
      std::size_t peers = g ? g->snapshot()["peers"].size() : 0;
      if (r.value("links", 0u) > peers) ++over;
    }
    out.push_back(detail::status("R4", "a published message crosses each peer link at most once", publishes, over,
                                 std::to_string(publishes) + " publishes"));
  }

  {
    const auto& p = sim.projection();
    std::string d = std::to_string(p.checks) + " quiescent comparisons, " + std::to_string(p.violations) + " mismatches";
    if (!p.first_violations.empty()) d += "; first: " + p.first_violations.front().dump();
    out.push_back(detail::status("R5", "project(center state) equals the rural state at quiescent points", p.checks,
                                 p.violations, d));
  }

  // Failure declarations never precede N silent periods.
  {
    std::size_t declared = 0, early = 0;
    for (const auto& r : records) {
      const std::string ev = r["event"];
      bool automaton = ev == "registrar.automaton.dead";
      if (!automaton && ev != "cs.registrar.dead") continue;
      ++declared;
      Entity* e = nullptr;
      for (const auto& ent : sim.entities()) {
        if (ent->component(r["component"])) e = ent.get();
      }
      if (!e) continue;
      const auto& tm = e->spec().timing;
      Duration bound = (automaton ? tm.automaton_heartbeat : tm.heartbeat) * tm.misses;
      if (r["t_us"].get<std::int64_t>() - r["last_seen_us"].get<std::int64_t>() < bound.count()) ++early;
    }
    out.push_back(detail::status("R6", "no component is declared dead before N missed heartbeats", declared, early,
                                 std::to_string(declared) + " declarations"));
  }

  {
    std::size_t entities = 0, bad = 0;
    std::string d;
    for (const auto& e : sim.entities()) {
      std::size_t alive = 0, active = 0;
      for (auto* s : e->config_servers()) {
        if (!s->alive()) continue;
        ++alive;
        if (s->active()) ++active;
      }
      if (alive == 0) continue;
      ++entities;
      if (active != 1) {
        ++bad;
        d += " " + e->name() + "=" + std::to_string(active);
      }
    }
    out.push_back(detail::status("R7", "exactly one active configuration server per entity at the end", entities, bad,
                                 std::to_string(entities) + " entities" + (bad ? "; active counts:" + d : "")));
  }

  {
    std::uint64_t sent = 0;
    for (const auto& [_, c] : sim.metrics().all()) sent += c.frames_sent;
    const auto& n = sim.network();
    std::uint64_t accounted = n.delivered() + n.undeliverable() + n.dropped() + n.in_flight();
    out.push_back(detail::status("R8", "every frame sent is delivered, dropped by a link or still in flight", sent,
                                 sent != accounted,
                                 std::to_string(sent) + " sent, " + std::to_string(n.delivered()) + " delivered, " +
                                     std::to_string(n.dropped()) + " dropped, " + std::to_string(n.undeliverable()) +
                                     " undeliverable, " + std::to_string(n.in_flight()) + " in flight"));
  }

  {
    std::size_t comps = 0, slow = 0;
    Duration worst{0};
    for (const auto& e : sim.entities()) {
      for (const auto& c : e->components()) {
        if (c->counters().frames_received == 0) continue;
        ++comps;
        worst = std::max(worst, c->max_inbox_wait());
        if (c->max_inbox_wait() > c->poll_period()) ++slow;
      }
    }
    out.push_back(detail::status("R9", "no frame waits in an inbox longer than one poll period", comps, slow,
                                 "worst wait " + std::to_string(worst.count()) + " us"));
  }

  {
    std::size_t frames = 0, rejected = 0;
    for (const auto& [_, c] : sim.metrics().all()) frames += c.frames_received;
    for (const auto& r : records) rejected += r["event"] == "frame.rejected";
    out.push_back(detail::status("R10", "no frame fails integrity or decoding checks", frames, rejected,
                                 std::to_string(rejected) + " rejected"));
  }
  return out;
}

inline const std::set<std::string>& timeline_events() {
  static const std::set<std::string> events = {
      "scenario.start", "scenario.event", "scenario.end", "component.start", "component.kill", "component.hang",
      "cs.active", "cs.standby", "cs.takeover", "cs.halt", "cs.registrar.dead", "cs.registrar.stopped",
      "registrar.registered", "registrar.admitted", "registrar.automaton.dead", "registrar.automaton.stopped",
      "registrar.config_server.lost", "registrar.repopulated", "automaton.registered", "automaton.registrar.lost",
      "automaton.registration_impossible", "automaton.terminated", "automaton.transition", "automaton.link",
      "rme.peer.down", "rme.peer.up", "link.up", "link.down", "projection.mismatch"};
  return events;
}

inline Json timeline(const Simulation& sim) {
  Json out = Json::array();
  for (const auto& r : sim.trace().records()) {
    if (!timeline_events().count(r["event"].get<std::string>())) continue;
    Json e = r;
    e.erase("seq");
    out.push_back(std::move(e));
  }
  return out;
}

inline Json sync_latency_json(const std::vector<Duration>& samples) {
  if (samples.empty()) return {{"count", 0}};
  Duration sum{0}, lo = samples.front(), hi = samples.front();
  for (auto d : samples) {
    sum += d;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {{"count", samples.size()},
          {"mean_ms", to_seconds(sum) * 1000.0 / static_cast<double>(samples.size())},
          {"min_ms", to_seconds(lo) * 1000.0},
          {"max_ms", to_seconds(hi) * 1000.0}};
}

inline Json summary(const Simulation& sim) {
  Json comps = Json::object();
  ComponentCounters total;
  for (const auto& [name, c] : sim.metrics().all()) {
    comps[name] = counters_json(c);
    total.frames_sent += c.frames_sent;
    total.frames_received += c.frames_received;
    total.frames_dropped += c.frames_dropped;
    total.frames_dead_lettered += c.frames_dead_lettered;
    total.polls += c.polls;
    total.timers += c.timers;
    total.events_processed += c.events_processed;
    total.work_units += c.work_units;
    total.max_queue_depth = std::max(total.max_queue_depth, c.max_queue_depth);
  }
  Json sync = Json::array();
  for (const auto& p : sim.pairs()) {
    Json j = {{"follower", p.follower->endpoint()},
              {"authority", p.authority ? p.authority->endpoint() : ""},
              {"at_authority", sync_latency_json(p.authority ? p.authority->sync_latencies() : std::vector<Duration>{})},
              {"at_follower", sync_latency_json(p.follower->sync_latencies())}};
    sync.push_back(j);
  }
  Json depth = Json::array();
  for (const auto& s : sim.depth_series()) depth.push_back({{"t_s", to_seconds(s.t)}, {"total", s.total}, {"max", s.max}});
  Json reqs = Json::array();
  std::size_t failed = 0;
  for (const auto& r : check_requirements(sim)) {
    failed += r.status == "fail";
    reqs.push_back(to_json(r));
  }
  const auto& n = sim.network();
  return {{"scenario", sim.scenario().name},
          {"seed", sim.scenario().seed},
          {"duration_s", to_seconds(sim.now())},
          {"totals", counters_json(total)},
          {"components", comps},
          {"network", {{"delivered", n.delivered()}, {"dropped", n.dropped()}, {"undeliverable", n.undeliverable()},
                       {"in_flight", n.in_flight()}}},
          {"sync_latencies", sync},
          {"queue_depth", depth},
          {"timeline", timeline(sim)},
          {"requirements_note", "run-level invariant checks defined by this project"},
          {"requirements", reqs},
          {"requirements_failed", failed}};
}

inline void write_metrics_csv(const Simulation& sim, std::ostream& os) {
  os << "component,kind,frames_sent,frames_received,frames_dropped,frames_dead_lettered,polls,timers,"
        "events_processed,work_units,max_queue_depth,max_inbox_wait_us\n";
  for (const auto& e : sim.entities()) {
    for (const auto& c : e->components()) {
      const auto& k = c->counters();
      os << c->endpoint() << ',' << c->kind() << ',' << k.frames_sent << ',' << k.frames_received << ','
         << k.frames_dropped << ',' << k.frames_dead_lettered << ',' << k.polls << ',' << k.timers << ','
         << k.events_processed << ',' << k.work_units << ',' << k.max_queue_depth << ','
         << c->max_inbox_wait().count() << '\n';
    }
  }
}

/// Writes trace.jsonl, metrics.csv and summary.json into `dir`.
inline Json write_report(const Simulation& sim, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "trace.jsonl");
    sim.trace().write_jsonl(os);
  }
  {
    std::ofstream os(dir / "metrics.csv");
    write_metrics_csv(sim, os);
  }
  Json s = summary(sim);
  std::ofstream os(dir / "summary.json");
  os << s.dump(2) << '\n';
  return s;
}

}  // namespace medsync::node
