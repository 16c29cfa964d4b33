#pragma once

#include <memory>
#include <string>
#include <vector>

#include "medsync/models/bundle.hpp"
#include "medsync/registry/automaton_host.hpp"
#include "medsync/registry/config_server.hpp"
#include "medsync/registry/registrar.hpp"
#include "support/probe.hpp"

namespace medsync::testing {

/// Hand-wired single entity on one site: config servers, registrars and
/// automaton hosts, all started explicitly by the test.
struct EntityRig {
  Rig rig;
  std::uint8_t entity = 1;
  registry::Timing timing;
  std::vector<std::unique_ptr<registry::ConfigServer>> servers;
  std::vector<std::unique_ptr<registry::Registrar>> registrars;
  std::vector<std::unique_ptr<registry::AutomatonHost>> hosts;
  std::set<std::uint8_t> units = {1, 2};
  std::vector<registry::ServerRef> server_refs;
  std::string gateway;

  std::vector<std::string> server_endpoints() const {
    std::vector<std::string> out;
    for (const auto& s : server_refs) out.push_back(s.endpoint);
    return out;
  }

  /// Declare every server before building anything that needs the list.
  void declare_servers(int n) {
    for (int r = 0; r < n; ++r) server_refs.push_back({static_cast<std::uint8_t>(r), "cs" + std::to_string(r)});
    for (const auto& ref : server_refs) {
      servers.push_back(std::make_unique<registry::ConfigServer>(
          rig.env(), rig.cfg(ref.endpoint, "site", wire::Address::config_server(entity)), ref.rank, units, server_refs,
          timing));
    }
  }

  registry::Registrar& add_registrar(std::uint8_t unit, std::string endpoint = {}) {
    if (endpoint.empty()) endpoint = "reg" + std::to_string(unit);
    registrars.push_back(std::make_unique<registry::Registrar>(
        rig.env(), rig.cfg(endpoint, "site", wire::Address::registrar(entity, unit)), server_endpoints(), gateway, timing));
    return *registrars.back();
  }

  registry::AutomatonHost& add_host(std::uint8_t unit, std::uint8_t uid, const std::string& model = "stroke/rural") {
    registry::HostConfig hc;
    hc.model = models::load(model);
    hc.config_servers = server_endpoints();
    hc.gateway = gateway;
    hc.timing = timing;
    std::string ep = "a" + std::to_string(unit) + "." + std::to_string(uid);
    hosts.push_back(std::make_unique<registry::AutomatonHost>(rig.env(), rig.cfg(ep, "site", {entity, unit, uid}), hc));
    return *hosts.back();
  }

  void run_until(double seconds) { rig.clock.advance_to(from_seconds(seconds)); }
  SimTime now() const { return rig.clock.now(); }

  /// Trace records for one component and event, optionally one message name.
  std::vector<Json> events(const std::string& component, const std::string& event, const std::string& msg = {}) const {
    return rig.trace.select([&](const Json& r) {
      return r["component"] == component && r["event"] == event && (msg.empty() || r.value("msg", "") == msg);
    });
  }

  /// Message names a component sent or received, in order.
  std::vector<std::string> exchange(const std::string& component) const {
    std::vector<std::string> out;
    for (const auto& r : rig.trace.records()) {
      if (r["component"] != component) continue;
      if (r["event"] == "send") out.push_back(">" + r["msg"].get<std::string>());
      if (r["event"] == "recv") out.push_back("<" + r["msg"].get<std::string>());
    }
    return out;
  }
};

/// True when `pattern` occurs in `seq` as a subsequence.
inline bool has_subsequence(const std::vector<std::string>& seq, const std::vector<std::string>& pattern) {
  std::size_t i = 0;
  for (const auto& s : seq) {
    if (i < pattern.size() && s == pattern[i]) ++i;
  }
  return i == pattern.size();
}

}  // namespace medsync::testing
