#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "medsync/node/entity.hpp"
#include "medsync/simnet/link.hpp"

namespace medsync::node {

struct LinkSpec {
  std::string a;  // site names
  std::string b;
  simnet::LinkProfile profile;
};

/// A run: entities, the inter-site links between them and a timed list of
/// operator and fault events.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration_s = 60;
  std::vector<EntitySpec> entities;
  std::vector<LinkSpec> links;
  simnet::LinkProfile intra_site;
  std::vector<Json> events;  // sorted by at_s, each already validated

  const EntitySpec* entity(std::uint8_t uid) const {
    for (const auto& e : entities) {
      if (e.entity == uid) return &e;
    }
    return nullptr;
  }
  /// Every link is lossless: no drop probability and no partition windows.
  bool lossless() const {
    for (const auto& l : links) {
      if (l.profile.drop_probability > 0 || !l.profile.partitions.empty()) return false;
    }
    return true;
  }
};

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError({"cannot open " + path.string()});
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SpecError({path.string() + ": " + e.what()});
  }
}

inline simnet::LinkProfile parse_link_profile(const Json& j, std::vector<std::string>& problems,
                                               const std::string& where) {
  simnet::LinkProfile p;
  p.latency = from_millis(j.value("latency_ms", 0.0));
  p.jitter = from_millis(j.value("jitter_ms", 0.0));
  p.drop_probability = j.value("drop", 0.0);
  p.bandwidth_bps = j.value("bandwidth_bps", 0.0);
  if (p.latency.count() < 0 || p.jitter.count() < 0) problems.push_back(where + ": latency and jitter must be >= 0");
  if (p.drop_probability < 0 || p.drop_probability > 1) problems.push_back(where + ": drop must be within [0, 1]");
  if (p.bandwidth_bps < 0) problems.push_back(where + ": bandwidth_bps must be >= 0");
  for (const auto& w : j.value("partitions", Json::array())) {
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number() || w[0] > w[1]) {
      problems.push_back(where + ": partition " + w.dump() + " must be [start_s, end_s]");
      continue;
    }
    p.partitions.push_back({from_seconds(w[0].get<double>()), from_seconds(w[1].get<double>())});
  }
  return p;
}

/// Checks an event against the scenario's entities. Returns the problems
/// found; an empty list means the event can be applied.
inline std::vector<std::string> validate_event(const Scenario& sc, const Json& ev, bool needs_time) {
  std::vector<std::string> problems;
  if (!ev.is_object()) return {"event must be a JSON object"};
  const std::string what = ev.value("do", "");
  const std::string where = "event '" + what + "'";
  if (needs_time && (!ev.contains("at_s") || !ev["at_s"].is_number() || ev["at_s"].get<double>() < 0)) {
    problems.push_back(where + ": at_s must be a non-negative number");
  }

  auto automaton_target = [&]() -> const AutomatonSpec* {
    auto a = parse_address(ev.value("target", ""));
    if (!a) {
      problems.push_back(where + ": target must be an automaton address \"e.u.a\"");
      return nullptr;
    }
    const EntitySpec* e = sc.entity(a->entity);
    const AutomatonSpec* as = e ? e->find(a->unit, a->automaton) : nullptr;
    if (!as) problems.push_back(where + ": no automaton at " + wire::to_string(*a));
    return as;
  };

  if (what == "inject") {
    const AutomatonSpec* as = automaton_target();
    bool has_vitals = ev.contains("vitals");
    bool has_command = ev.contains("command");
    if (has_vitals == has_command) {
      problems.push_back(where + ": give exactly one of 'vitals' or 'command'");
    } else if (has_vitals) {
      const auto& v = ev["vitals"];
      if (!v.is_object() || v.empty()) {
        problems.push_back(where + ": vitals must be a non-empty object of name: number");
      } else {
        for (const auto& [k, x] : v.items()) {
          if (!x.is_number()) problems.push_back(where + ": vital '" + k + "' is not a number");
          if (k.empty() || k.size() > 255) problems.push_back(where + ": vital name length must be 1..255");
        }
      }
    } else {
      if (!ev["command"].is_string() || ev["command"].get<std::string>().empty()) {
        problems.push_back(where + ": command must be a non-empty string");
      } else if (ev["command"].get<std::string>().size() > 255) {
        problems.push_back(where + ": command longer than 255 octets");
      }
    }
  } else if (what == "confirm") {
    const AutomatonSpec* as = automaton_target();
    if (as && as->role != automaton::SyncRole::kAuthority) {
      problems.push_back(where + ": target is not a center (authority) automaton");
    }
    if (ev.contains("accept") && !ev["accept"].is_boolean()) problems.push_back(where + ": accept must be boolean");
  } else if (what == "override") {
    const AutomatonSpec* as = automaton_target();
    if (!ev.contains("state") || !ev["state"].is_number_integer()) {
      problems.push_back(where + ": state must be a state UID");
    } else if (as) {
      auto def = models::load(as->model);
      int uid = ev["state"].get<int>();
      if (uid < 1 || uid > 255 || !def->state(static_cast<std::uint8_t>(uid))) {
        problems.push_back(where + ": model '" + def->name + "' has no state " + std::to_string(uid));
      }
    }
  } else if (what == "kill" || what == "restart" || what == "hang" || what == "shutdown") {
    std::string comp = ev.value("component", "");
    bool found = false;
    bool shutdownable = false;
    for (const auto& e : sc.entities) {
      for (const auto& c : e.config_servers) found |= c.endpoint == comp;
      for (const auto& r : e.registrars) {
        if (r.endpoint == comp) found = shutdownable = true;
      }
      for (const auto& a : e.automata) {
        if (a.endpoint == comp) found = shutdownable = true;
      }
      found |= !e.gateway_endpoint.empty() && e.gateway_endpoint == comp;
    }
    if (!found) problems.push_back(where + ": no component '" + comp + "'");
    if (found && what == "shutdown" && !shutdownable) {
      problems.push_back(where + ": only registrars and automata support a voluntary shutdown");
    }
  } else if (what == "link") {
    std::string a = ev.value("a", "");
    std::string b = ev.value("b", "");
    bool known = false;
    for (const auto& l : sc.links) known |= (l.a == a && l.b == b) || (l.a == b && l.b == a);
    if (!known) problems.push_back(where + ": no link between sites '" + a + "' and '" + b + "'");
    if (!ev.contains("up") || !ev["up"].is_boolean()) problems.push_back(where + ": up must be boolean");
  } else {
    problems.push_back("event: unknown action '" + what +
                       "' (expected inject, confirm, override, kill, restart, hang, shutdown or link)");
  }
  return problems;
}

/// Parses and validates a scenario. Entities may be inline objects or
/// paths relative to `base`. All problems are reported together.
inline Scenario parse_scenario(const Json& doc, const std::filesystem::path& base = {}) {
  std::vector<std::string> problems;
  Scenario sc;
  if (!doc.is_object()) throw SpecError({"scenario must be a JSON object"});
  sc.name = doc.value("name", sc.name);
  sc.seed = doc.value("seed", sc.seed);
  sc.duration_s = doc.value("duration_s", sc.duration_s);
  if (sc.duration_s < 0) problems.push_back("duration_s must be >= 0");

  std::set<int> uids;
  std::set<std::string> sites, endpoints;
  for (const auto& ref : doc.value("entities", Json::array())) {
    try {
      Json ej = ref.is_string() ? read_json_file(base / ref.get<std::string>()) : ref;
      EntitySpec e = parse_entity(ej);
      if (!uids.insert(e.entity).second) problems.push_back("entity UID " + std::to_string(e.entity) + " used twice");
      auto claim = [&](const std::string& ep) {
        if (!endpoints.insert(ep).second) problems.push_back("endpoint '" + ep + "' used by two entities");
      };
      for (const auto& c : e.config_servers) claim(c.endpoint);
      for (const auto& r : e.registrars) claim(r.endpoint);
      for (const auto& a : e.automata) claim(a.endpoint);
      if (!e.gateway_endpoint.empty()) claim(e.gateway_endpoint);
      claim(e.operator_endpoint());
      sites.insert(e.site);
      sc.entities.push_back(std::move(e));
    } catch (const SpecError& err) {
      problems.insert(problems.end(), err.problems().begin(), err.problems().end());
    }
  }

  // Cross-entity references: gateway peers and sync counterparts.
  for (const auto& e : sc.entities) {
    for (const auto& p : e.peers) {
      const EntitySpec* other = sc.entity(p.entity);
      if (!other) {
        problems.push_back("entity '" + e.name + "': gateway peer " + std::to_string(p.entity) + " is not in the scenario");
      } else if (other->gateway_endpoint != p.endpoint) {
        problems.push_back("entity '" + e.name + "': gateway peer endpoint '" + p.endpoint + "' is not entity " +
                           std::to_string(p.entity) + "'s gateway");
      }
    }
    for (const auto& a : e.automata) {
      if (a.role == automaton::SyncRole::kNone) continue;
      std::string who = "automaton " + wire::to_string(a.address(e.entity));
      const EntitySpec* ce = sc.entity(a.counterpart.entity);
      const AutomatonSpec* c = ce ? ce->find(a.counterpart.unit, a.counterpart.automaton) : nullptr;
      if (!c) {
        problems.push_back(who + ": counterpart " + wire::to_string(a.counterpart) + " does not exist");
        continue;
      }
      if (c->role == a.role || c->role == automaton::SyncRole::kNone) {
        problems.push_back(who + ": counterpart must have the opposite sync role");
      }
      if (c->counterpart != a.address(e.entity)) {
        problems.push_back(who + ": counterpart " + wire::to_string(a.counterpart) + " does not point back");
      }
      if (e.gateway_endpoint.empty()) problems.push_back(who + ": synchronized automata need a gateway");
    }
  }

  for (const auto& l : doc.value("links", Json::array())) {
    LinkSpec ls;
    ls.a = l.value("a", "");
    ls.b = l.value("b", "");
    std::string where = "link " + ls.a + "<->" + ls.b;
    if (!sites.count(ls.a) || !sites.count(ls.b)) problems.push_back(where + ": unknown site");
    if (ls.a == ls.b) problems.push_back(where + ": a link joins two different sites");
    ls.profile = parse_link_profile(l, problems, where);
    sc.links.push_back(std::move(ls));
  }
  if (doc.contains("intra_site")) sc.intra_site = parse_link_profile(doc["intra_site"], problems, "intra_site");

  for (const auto& ev : doc.value("events", Json::array())) {
    auto p = validate_event(sc, ev, true);
    problems.insert(problems.end(), p.begin(), p.end());
    if (p.empty()) sc.events.push_back(ev);
  }
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const Json& a, const Json& b) { return a["at_s"].get<double>() < b["at_s"].get<double>(); });

  if (!problems.empty()) throw SpecError(std::move(problems));
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_json_file(path), path.parent_path());
}

}  // namespace medsync::node
