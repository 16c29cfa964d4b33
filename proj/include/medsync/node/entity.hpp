#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "medsync/models/bundle.hpp"
#include "medsync/registry/automaton_host.hpp"
#include "medsync/registry/config_server.hpp"
#include "medsync/registry/registrar.hpp"
#include "medsync/transport/gateway.hpp"

namespace medsync::node {

/// Every problem found while validating a spec or scenario, reported at once.
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = std::to_string(p.size()) + " problem(s):";
    for (const auto& s : p) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

inline std::optional<wire::Address> parse_address(const std::string& text) {
  static const std::regex re(R"(^\s*(\d+)\.(\d+)\.(\d+)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) return std::nullopt;
  int e = std::stoi(m[1]), u = std::stoi(m[2]), a = std::stoi(m[3]);
  if (e > 31 || u > 31 || a > 31) return std::nullopt;
  return wire::Address{static_cast<std::uint8_t>(e), static_cast<std::uint8_t>(u), static_cast<std::uint8_t>(a)};
}

struct ServerSpec {
  std::uint8_t rank = 0;
  std::string endpoint;
  double start_s = 0;
};

struct RegistrarSpec {
  std::uint8_t unit = 0;
  std::string endpoint;
  double start_s = 0;
};

struct AutomatonSpec {
  std::uint8_t unit = 0;
  std::uint8_t uid = 0;
  std::string model;
  std::string endpoint;
  automaton::SyncRole role = automaton::SyncRole::kNone;
  wire::Address counterpart;
  std::string projection_model;  // follower: whose projection map to use
  bool operator_confirms = false;
  bool publish_vitals = false;
  double start_s = 0;

  wire::Address address(std::uint8_t entity) const { return {entity, unit, uid}; }
};

struct EntitySpec {
  std::uint8_t entity = 0;
  std::string name;
  std::string site;
  wire::AesKey key{};
  registry::Timing timing;
  Duration poll_period = from_millis(200);
  std::set<std::uint8_t> units;
  std::vector<ServerSpec> config_servers;
  std::vector<RegistrarSpec> registrars;
  std::vector<AutomatonSpec> automata;
  std::string gateway_endpoint;
  std::vector<transport::GatewayPeer> peers;
  std::vector<transport::Subscription> subscriptions;

  std::string operator_endpoint() const { return name + "/operator"; }
  const AutomatonSpec* find(std::uint8_t unit, std::uint8_t uid) const {
    for (const auto& a : automata) {
      if (a.unit == unit && a.uid == uid) return &a;
    }
    return nullptr;
  }
};

inline const char* kDefaultKeyHex = "2b7e151628aed2a6abf7158809cf4f3c";

/// Parses and validates an entity document. Endpoints default to
/// "<name>/cs<rank>", "<name>/reg<unit>", "<name>/a<unit>.<uid>" and
/// "<name>/gw".
inline EntitySpec parse_entity(const Json& doc) {
  std::vector<std::string> problems;
  auto problem = [&](std::string p) { problems.push_back(std::move(p)); };
  EntitySpec s;
  if (!doc.is_object()) throw SpecError({"entity spec must be a JSON object"});

  int entity = doc.value("entity", 0);
  if (entity < 1 || entity > 31) problem("entity: UID must be 1..31");
  s.entity = static_cast<std::uint8_t>(entity);
  s.name = doc.value("name", "entity" + std::to_string(entity));
  s.site = doc.value("site", s.name);
  const std::string where = "entity '" + s.name + "': ";

  try {
    s.key = wire::AesKey::from_hex(doc.value("aes_key", std::string(kDefaultKeyHex)));
  } catch (const std::exception& e) {
    problem(where + "aes_key: " + e.what());
  }

  if (doc.contains("timing")) {
    const auto& t = doc["timing"];
    s.timing.heartbeat = from_seconds(t.value("heartbeat_s", 5.0));
    s.timing.automaton_heartbeat = from_seconds(t.value("automaton_heartbeat_s", 5.0));
    s.timing.misses = t.value("misses", 3);
    s.timing.discovery_interval = from_seconds(t.value("discovery_interval_s", 1.0));
    s.timing.discovery_retries = t.value("discovery_retries", 10);
    s.timing.backoff_initial = from_seconds(t.value("backoff_initial_s", 1.0));
    s.timing.backoff_cap = from_seconds(t.value("backoff_cap_s", 32.0));
    s.poll_period = from_millis(t.value("poll_ms", 200.0));
    if (s.timing.heartbeat <= Duration{0} || s.timing.automaton_heartbeat <= Duration{0}) {
      problem(where + "timing: heartbeat periods must be positive");
    }
    if (s.timing.misses < 1) problem(where + "timing: misses must be >= 1");
    if (s.poll_period <= Duration{0}) problem(where + "timing: poll_ms must be positive");
  }

  for (const auto& u : doc.value("units", Json::array())) {
    int v = u.is_number_integer() ? u.get<int>() : -1;
    if (v < 1 || v > 30) {
      problem(where + "units: " + u.dump() + " is not a unit UID 1..30");
    } else if (!s.units.insert(static_cast<std::uint8_t>(v)).second) {
      problem(where + "units: duplicate unit " + std::to_string(v));
    }
  }

  std::set<std::string> endpoints;
  auto claim = [&](const std::string& ep) {
    if (ep.empty()) {
      problem(where + "empty endpoint");
    } else if (!endpoints.insert(ep).second) {
      problem(where + "endpoint '" + ep + "' used twice");
    }
  };

  std::set<int> ranks;
  for (const auto& c : doc.value("config_servers", Json::array())) {
    ServerSpec cs;
    int rank = c.value("rank", 0);
    if (rank < 0 || rank > 255 || !ranks.insert(rank).second) problem(where + "config_servers: bad or duplicate rank");
    cs.rank = static_cast<std::uint8_t>(rank);
    cs.endpoint = c.value("endpoint", s.name + "/cs" + std::to_string(rank));
    cs.start_s = c.value("start_s", 0.0);
    claim(cs.endpoint);
    s.config_servers.push_back(cs);
  }
  if (s.config_servers.empty()) problem(where + "at least one config server is required");
  std::sort(s.config_servers.begin(), s.config_servers.end(),
            [](const ServerSpec& a, const ServerSpec& b) { return a.rank < b.rank; });

  for (const auto& r : doc.value("registrars", Json::array())) {
    RegistrarSpec rs;
    int unit = r.value("unit", 0);
    if (!s.units.count(static_cast<std::uint8_t>(unit))) {
      problem(where + "registrar for unit " + std::to_string(unit) + " which is not in the unit table");
    }
    rs.unit = static_cast<std::uint8_t>(unit);
    rs.endpoint = r.value("endpoint", s.name + "/reg" + std::to_string(unit));
    rs.start_s = r.value("start_s", 0.0);
    claim(rs.endpoint);
    s.registrars.push_back(rs);
  }

  std::set<std::pair<int, int>> addresses;
  for (const auto& a : doc.value("automata", Json::array())) {
    AutomatonSpec as;
    int unit = a.value("unit", 0);
    int uid = a.value("uid", 0);
    if (!s.units.count(static_cast<std::uint8_t>(unit))) {
      problem(where + "automaton " + std::to_string(unit) + "." + std::to_string(uid) + ": unit not in the unit table");
    }
    if (uid < 1 || uid >= transport::RmeGateway::kAutomatonUid) {
      problem(where + "automaton uid " + std::to_string(uid) + " outside 1..29");
    }
    if (!addresses.insert({unit, uid}).second) {
      problem(where + "automaton address " + std::to_string(unit) + "." + std::to_string(uid) + " used twice");
    }
    as.unit = static_cast<std::uint8_t>(unit);
    as.uid = static_cast<std::uint8_t>(uid);
    as.model = a.value("model", "");
    try {
      models::load(as.model);
    } catch (const std::exception& e) {
      problem(where + "automaton " + std::to_string(unit) + "." + std::to_string(uid) + ": model: " + e.what());
    }
    as.endpoint = a.value("endpoint", s.name + "/a" + std::to_string(unit) + "." + std::to_string(uid));
    claim(as.endpoint);
    as.publish_vitals = a.value("publish_vitals", false);
    as.start_s = a.value("start_s", 0.0);
    if (a.contains("sync")) {
      const auto& sy = a["sync"];
      std::string role = sy.value("role", "none");
      if (role == "follower") {
        as.role = automaton::SyncRole::kFollower;
      } else if (role == "authority") {
        as.role = automaton::SyncRole::kAuthority;
      } else if (role != "none") {
        problem(where + "sync.role '" + role + "' is not follower, authority or none");
      }
      auto cp = parse_address(sy.value("counterpart", ""));
      if (as.role != automaton::SyncRole::kNone && !cp) {
        problem(where + "sync.counterpart must be an address \"e.u.a\"");
      }
      if (cp) as.counterpart = *cp;
      as.projection_model = sy.value("projection_model", "");
      as.operator_confirms = sy.value("operator_confirms", false);
    }
    s.automata.push_back(as);
  }

  if (doc.contains("gateway")) {
    const auto& g = doc["gateway"];
    s.gateway_endpoint = g.value("endpoint", s.name + "/gw");
    claim(s.gateway_endpoint);
    for (const auto& p : g.value("peers", Json::array())) {
      int e = p.value("entity", 0);
      if (e < 1 || e > 31 || e == entity) problem(where + "gateway peer entity " + std::to_string(e) + " invalid");
      std::string ep = p.value("endpoint", "");
      if (ep.empty()) problem(where + "gateway peer " + std::to_string(e) + " has no endpoint");
      s.peers.push_back({static_cast<std::uint8_t>(e), ep});
    }
  }

  for (const auto& sub : doc.value("subscriptions", Json::array())) {
    transport::Subscription t;
    t.unit = static_cast<std::uint8_t>(sub.value("unit", 0));
    auto type = wire::message_type_from_name(sub.value("type", ""));
    if (!type || wire::kind_of(*type) != wire::MessageKind::kApplicationData) {
      problem(where + "subscription type '" + sub.value("type", "") + "' is not an application message");
    } else {
      t.type = *type;
    }
    auto a = parse_address(sub.value("subscriber", ""));
    if (!a || a->entity != s.entity) {
      problem(where + "subscriber '" + sub.value("subscriber", "") + "' must be a local address");
    } else {
      t.subscriber = *a;
    }
    s.subscriptions.push_back(t);
  }
  if (!s.subscriptions.empty() && s.gateway_endpoint.empty()) problem(where + "subscriptions need a gateway");

  if (!problems.empty()) throw SpecError(std::move(problems));
  return s;
}

/// Local operator: injects vital signs and commands as application frames
/// from (e, 31, 31), straight to the target automaton's endpoint.
class OperatorConsole : public transport::Station {
 public:
  using Station::Station;
  std::string_view kind() const override { return "operator"; }

  void inject(const std::string& to, wire::Address dst, wire::AppBody body, std::uint8_t priority) {
    send_app(to, dst, {++seq_, std::move(body)}, priority, 0);
  }

 private:
  std::uint32_t seq_ = 0;
};

/// All components of one entity, built from a spec and sharing one run
/// context. Nothing starts until start_all() (or the scenario) says so.
class Entity {
 public:
  /// `projections` resolves a follower's projection map when its automaton
  /// entry does not name a model for it.
  Entity(EntitySpec spec, transport::StationEnv env,
         const std::function<std::map<std::uint8_t, std::uint8_t>(const AutomatonSpec&)>& projections = {})
      : spec_(std::move(spec)) {
    env.key = spec_.key;
    auto cfg = [&](const std::string& ep, wire::Address a, Duration phase) {
      transport::StationConfig c;
      c.endpoint = ep;
      c.site = spec_.site;
      c.address = a;
      c.poll_period = spec_.poll_period;
      c.poll_phase = phase;
      return c;
    };
    // Stagger poll phases so components do not all wake on the same tick.
    std::size_t n = 0;
    auto phase = [&] { return Duration((n++ * 7919) % std::max<std::int64_t>(1, spec_.poll_period.count())); };

    std::vector<registry::ServerRef> refs;
    std::vector<std::string> server_eps;
    for (const auto& c : spec_.config_servers) {
      refs.push_back({c.rank, c.endpoint});
      server_eps.push_back(c.endpoint);
    }
    for (const auto& c : spec_.config_servers) {
      auto s = std::make_unique<registry::ConfigServer>(
          env, cfg(c.endpoint, wire::Address::config_server(spec_.entity), phase()), c.rank, spec_.units, refs,
          spec_.timing);
      add(std::move(s), c.start_s);
    }
    for (const auto& r : spec_.registrars) {
      auto s = std::make_unique<registry::Registrar>(
          env, cfg(r.endpoint, wire::Address::registrar(spec_.entity, r.unit), phase()), server_eps,
          spec_.gateway_endpoint, spec_.timing);
      add(std::move(s), r.start_s);
    }
    if (!spec_.gateway_endpoint.empty()) {
      auto g = std::make_unique<transport::RmeGateway>(
          env, cfg(spec_.gateway_endpoint, transport::RmeGateway::address_for(spec_.entity), phase()), spec_.peers,
          spec_.timing);
      gateway_ = g.get();
      add(std::move(g), 0);
    }
    for (const auto& a : spec_.automata) {
      registry::HostConfig hc;
      hc.model = models::load(a.model);
      hc.config_servers = server_eps;
      hc.gateway = spec_.gateway_endpoint;
      hc.publish_vitals = a.publish_vitals;
      hc.timing = spec_.timing;
      hc.sync.role = a.role;
      hc.sync.counterpart = a.counterpart;
      hc.sync.operator_confirms = a.operator_confirms;
      if (a.role == automaton::SyncRole::kAuthority) {
        hc.sync.projection = hc.model->projection;
      } else if (a.role == automaton::SyncRole::kFollower) {
        if (!a.projection_model.empty()) {
          hc.sync.projection = models::load(a.projection_model)->projection;
        } else if (projections) {
          hc.sync.projection = projections(a);
        }
      }
      auto h = std::make_unique<registry::AutomatonHost>(env, cfg(a.endpoint, a.address(spec_.entity), phase()), hc);
      hosts_[{a.unit, a.uid}] = h.get();
      add(std::move(h), a.start_s);
    }
    auto op = std::make_unique<OperatorConsole>(
        env, cfg(spec_.operator_endpoint(), wire::Address::operator_console(spec_.entity), phase()));
    operator_ = op.get();
    add(std::move(op), 0);
  }

  const EntitySpec& spec() const { return spec_; }
  std::uint8_t uid() const { return spec_.entity; }
  const std::string& name() const { return spec_.name; }
  transport::RmeGateway* gateway() const { return gateway_; }
  OperatorConsole& operator_console() const { return *operator_; }

  const std::vector<std::unique_ptr<transport::Station>>& components() const { return components_; }

  transport::Station* component(const std::string& endpoint) const {
    for (const auto& c : components_) {
      if (c->endpoint() == endpoint) return c.get();
    }
    return nullptr;
  }

  registry::AutomatonHost* host(std::uint8_t unit, std::uint8_t uid) const {
    auto it = hosts_.find({unit, uid});
    return it == hosts_.end() ? nullptr : it->second;
  }
  std::vector<registry::AutomatonHost*> hosts() const {
    std::vector<registry::AutomatonHost*> out;
    for (const auto& [_, h] : hosts_) out.push_back(h);
    return out;
  }
  std::vector<registry::ConfigServer*> config_servers() const {
    std::vector<registry::ConfigServer*> out;
    for (const auto& c : components_) {
      if (auto* s = dynamic_cast<registry::ConfigServer*>(c.get())) out.push_back(s);
    }
    return out;
  }

  /// Schedules every component's start at its configured offset from `base`.
  void schedule_starts(simnet::VirtualClock& clock, SimTime base) {
    for (std::size_t i = 0; i < components_.size(); ++i) {
      auto* c = components_[i].get();
      clock.schedule_at(base + from_seconds(start_at_[i]), [c] { c->start(); }, "start " + c->endpoint());
    }
  }

  /// Subscriptions wait in the gateway until their subscriber registers.
  void configure_subscriptions() {
    if (!gateway_) return;
    for (const auto& s : spec_.subscriptions) gateway_->configure_subscription(s);
  }

  Json snapshot() const {
    Json comps = Json::array();
    for (const auto& c : components_) comps.push_back(c->snapshot());
    return {{"entity", spec_.entity}, {"name", spec_.name}, {"site", spec_.site}, {"components", comps}};
  }

 private:
  void add(std::unique_ptr<transport::Station> s, double start_s) {
    components_.push_back(std::move(s));
    start_at_.push_back(start_s);
  }

  EntitySpec spec_;
  std::vector<std::unique_ptr<transport::Station>> components_;
  std::vector<double> start_at_;
  std::map<std::pair<std::uint8_t, std::uint8_t>, registry::AutomatonHost*> hosts_;
  transport::RmeGateway* gateway_ = nullptr;
  OperatorConsole* operator_ = nullptr;
};

}  // namespace medsync::node
