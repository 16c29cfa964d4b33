#pragma once

#include <string>
#include <string_view>

#include "medsync/node/simulation.hpp"

namespace medsync::node {

struct ApiResponse {
  int status = 200;
  Json body;
};

/// Transport-independent control API. Every mutating command is converted
/// into a scenario event and applied through Simulation::apply, so the API
/// reaches components only through the operator station, the network and
/// component lifecycle calls. The caller serializes access (one mutex with
/// the clock pump).
///
///   GET  /api/snapshot            run snapshot
///   GET  /api/automata            automaton snapshots with site and entity
///   GET  /api/models/{name}       model graph
///   GET  /api/trace?since=SEQ     retained trace records with seq > SEQ
///   POST /api/inject              {target, vitals:{name:value} | command, argument?}
///   POST /api/confirm             {target, accept}
///   POST /api/override            {target, state}
///   POST /api/link                {a, b, up}
///   POST /api/component           {id, action: kill|restart|hang|shutdown}
class ControlApi {
 public:
  explicit ControlApi(Simulation& sim) : sim_(sim) {}

  ApiResponse handle(std::string_view method, std::string_view target, std::string_view body) {
    std::string path(target.substr(0, target.find('?')));
    std::string query(target.size() > path.size() ? target.substr(path.size() + 1) : std::string_view{});
    if (method == "GET") {
      if (path == "/api/snapshot") return {200, sim_.snapshot()};
      if (path == "/api/automata") return {200, automata()};
      if (path.rfind("/api/models/", 0) == 0) return model(path.substr(12));
      if (path == "/api/trace") return trace(query);
      return not_found(path);
    }
    if (method != "POST") return {405, {{"error", "method not allowed"}, {"details", {std::string(method)}}}};

    Json req;
    try {
      req = Json::parse(body.empty() ? std::string_view("{}") : body);
    } catch (const Json::parse_error& e) {
      return bad_request({std::string("body is not JSON: ") + e.what()});
    }
    if (!req.is_object()) return bad_request({"body must be a JSON object"});

    Json ev;
    if (path == "/api/inject") {
      ev = req;
      ev["do"] = "inject";
    } else if (path == "/api/confirm") {
      ev = req;
      ev["do"] = "confirm";
    } else if (path == "/api/override") {
      ev = req;
      ev["do"] = "override";
    } else if (path == "/api/link") {
      ev = req;
      ev["do"] = "link";
    } else if (path == "/api/component") {
      std::string action = req.value("action", "");
      if (action != "kill" && action != "restart" && action != "hang" && action != "shutdown") {
        return bad_request({"action must be kill, restart, hang or shutdown"});
      }
      ev = {{"do", action}, {"component", req.value("id", "")}};
    } else {
      return not_found(path);
    }
    ev.erase("at_s");

    const std::string audit = "cmd-" + std::to_string(++audit_seq_);
    sim_.trace().emit(sim_.now(), "api", "api.command", {{"audit_id", audit}, {"path", path}, {"request", req}});
    try {
      Json result = sim_.apply(ev, "api");
      result["audit_id"] = audit;
      return {200, result};
    } catch (const SpecError& e) {
      sim_.trace().emit(sim_.now(), "api", "api.rejected", {{"audit_id", audit}, {"details", e.problems()}});
      ApiResponse r = bad_request(e.problems());
      r.body["audit_id"] = audit;
      return r;
    }
  }

 private:
  static ApiResponse bad_request(std::vector<std::string> details) {
    return {400, {{"error", "validation failed"}, {"details", std::move(details)}}};
  }
  static ApiResponse not_found(const std::string& what) {
    return {404, {{"error", "not found"}, {"details", {what}}}};
  }

  Json automata() const {
    Json out = Json::array();
    for (const auto& e : sim_.entities()) {
      for (auto* h : e->hosts()) {
        Json j = h->snapshot();
        j["entity"] = e->uid();
        j["entity_name"] = e->name();
        j["site"] = h->site();
        out.push_back(std::move(j));
      }
    }
    return out;
  }

  static ApiResponse model(const std::string& name) {
    try {
      return {200, automaton::describe(*models::load(name))};
    } catch (const std::exception&) {
      return not_found("model " + name);
    }
  }

  ApiResponse trace(const std::string& query) const {
    std::int64_t since = -1;
    std::size_t limit = 1000;
    for (std::size_t pos = 0; pos < query.size();) {
      auto amp = query.find('&', pos);
      std::string kv = query.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
      auto eq = kv.find('=');
      if (eq != std::string::npos) {
        try {
          if (kv.substr(0, eq) == "since") since = std::stoll(kv.substr(eq + 1));
          if (kv.substr(0, eq) == "limit") limit = std::stoul(kv.substr(eq + 1));
        } catch (const std::exception&) {
          return bad_request({"query parameter '" + kv + "' is not a number"});
        }
      }
      if (amp == std::string::npos) break;
      pos = amp + 1;
    }
    Json out = Json::array();
    for (const auto& r : sim_.trace().records()) {
      if (r["seq"].get<std::int64_t>() <= since) continue;
      out.push_back(r);
      if (out.size() >= limit) break;
    }
    return {200, {{"records", out}, {"next_seq", sim_.trace().emitted()}}};
  }

  Simulation& sim_;
  std::uint64_t audit_seq_ = 0;
};

}  // namespace medsync::node
