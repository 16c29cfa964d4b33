#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "medsync/common/time.hpp"
#include "medsync/wire/message_type.hpp"

namespace medsync::automaton {

using Json = nlohmann::json;

enum class Safety { kOpenLoopSafe, kTransientSafe };

inline const char* to_string(Safety s) { return s == Safety::kOpenLoopSafe ? "open_loop_safe" : "transient_safe"; }

inline constexpr Duration kDefaultMaxDwell = from_seconds(300);

struct StateDef {
  std::uint8_t uid = 0;
  std::string name;
  Safety safety = Safety::kOpenLoopSafe;
  Duration max_dwell{0};
  std::uint8_t fallback_uid = 0;  // TransientSafe only

  bool open_loop_safe() const { return safety == Safety::kOpenLoopSafe; }
};

enum class CmpOp { kGt, kGe, kLt, kLe, kEq, kNe };

struct Comparison {
  std::string measurement;
  CmpOp op = CmpOp::kGt;
  double value = 0;

  bool holds(double x) const {
    switch (op) {
      case CmpOp::kGt: return x > value;
      case CmpOp::kGe: return x >= value;
      case CmpOp::kLt: return x < value;
      case CmpOp::kLe: return x <= value;
      case CmpOp::kEq: return x == value;
      case CmpOp::kNe: return x != value;
    }
    return false;
  }
};

/// Conjunction of threshold comparisons, e.g. "systolic_bp > 180 && spo2 < 92".
/// A comparison over a measurement with no known value is false.
struct Guard {
  std::vector<Comparison> terms;
  std::string text;

  bool empty() const { return terms.empty(); }

  bool eval(const std::map<std::string, double>& values) const {
    for (const auto& t : terms) {
      auto it = values.find(t.measurement);
      if (it == values.end() || !t.holds(it->second)) return false;
    }
    return true;
  }

  bool mentions(const std::string& name) const {
    return std::any_of(terms.begin(), terms.end(), [&](const Comparison& c) { return c.measurement == name; });
  }
};

/// Throws std::invalid_argument on syntax errors.
inline Guard parse_guard(const std::string& text) {
  static const std::regex term(R"(^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(>=|<=|==|!=|>|<)\s*(-?[0-9]+(?:\.[0-9]+)?)\s*$)");
  Guard g;
  g.text = text;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t amp = text.find("&&", pos);
    std::string part = text.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
    std::smatch m;
    if (!std::regex_match(part, m, term)) throw std::invalid_argument("bad guard term '" + part + "'");
    Comparison c;
    c.measurement = m[1];
    const std::string op = m[2];
    c.op = op == ">" ? CmpOp::kGt : op == ">=" ? CmpOp::kGe : op == "<" ? CmpOp::kLt : op == "<=" ? CmpOp::kLe : op == "==" ? CmpOp::kEq : CmpOp::kNe;
    c.value = std::stod(m[3]);
    g.terms.push_back(std::move(c));
    if (amp == std::string::npos) break;
    pos = amp + 2;
  }
  return g;
}

enum class TriggerKind { kCondition, kCommand, kMessage, kTimeout };

struct Trigger {
  TriggerKind kind = TriggerKind::kCondition;
  std::string command;                                   // kCommand
  wire::MessageType message = wire::MessageType::kReserved;  // kMessage
  Duration after{0};                                     // kTimeout
};

enum class ActionTarget { kCounterpart, kPublish };

struct ActionDef {
  wire::MessageType message = wire::MessageType::kBestPracticeCommand;
  std::string command;  // best-practice-command name, or time-log note
  std::uint8_t priority = 5;
  ActionTarget target = ActionTarget::kCounterpart;
};

struct TransitionDef {
  std::uint8_t from = 0;
  std::uint8_t to = 0;
  Trigger trigger;
  Guard guard;
  std::vector<ActionDef> actions;
};

struct Measurement {
  std::string name;
  std::string unit;
};

struct AutomatonDef {
  std::string name;
  std::string notes;
  std::vector<Measurement> measurements;
  std::vector<StateDef> states;
  std::vector<TransitionDef> transitions;
  std::uint8_t initial = 0;
  /// Center -> rural image; empty for models that are not projected.
  std::map<std::uint8_t, std::uint8_t> projection;

  const StateDef* state(std::uint8_t uid) const {
    for (const auto& s : states) {
      if (s.uid == uid) return &s;
    }
    return nullptr;
  }
  const StateDef& at(std::uint8_t uid) const {
    const StateDef* s = state(uid);
    if (!s) throw std::out_of_range("no state " + std::to_string(uid) + " in " + name);
    return *s;
  }
  bool declares(const std::string& measurement) const {
    return std::any_of(measurements.begin(), measurements.end(),
                       [&](const Measurement& m) { return m.name == measurement; });
  }
  std::set<std::uint8_t> open_loop_safe_uids() const {
    std::set<std::uint8_t> out;
    for (const auto& s : states) {
      if (s.open_loop_safe()) out.insert(s.uid);
    }
    return out;
  }
};

using DefPtr = std::shared_ptr<const AutomatonDef>;

enum class ViolationKind { kSchema, kSafety, kMapping };

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kSchema: return "schema";
    case ViolationKind::kSafety: return "safety-validation";
    case ViolationKind::kMapping: return "mapping-incomplete";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::string message;
};

/// Rejection of a model document; lists every problem found.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(std::vector<Violation> v) : std::runtime_error(render(v)), violations_(std::move(v)) {}
  const std::vector<Violation>& violations() const { return violations_; }
  bool has(ViolationKind k) const {
    return std::any_of(violations_.begin(), violations_.end(), [&](const Violation& v) { return v.kind == k; });
  }

 private:
  static std::string render(const std::vector<Violation>& v) {
    std::string s = "model rejected:";
    for (const auto& x : v) s += std::string("\n  [") + to_string(x.kind) + "] " + x.message;
    return s;
  }
  std::vector<Violation> violations_;
};

namespace detail {

struct Collector {
  std::vector<Violation> out;
  void schema(std::string m) { out.push_back({ViolationKind::kSchema, std::move(m)}); }
  void safety(std::string m) { out.push_back({ViolationKind::kSafety, std::move(m)}); }
  void mapping(std::string m) { out.push_back({ViolationKind::kMapping, std::move(m)}); }
};

inline std::optional<std::uint8_t> read_uid(const Json& j, const std::string& where, Collector& c) {
  if (!j.is_number_integer() || j.get<long long>() < 1 || j.get<long long>() > 255) {
    c.schema(where + ": state UID must be an integer in 1..255");
    return std::nullopt;
  }
  return static_cast<std::uint8_t>(j.get<int>());
}

inline void read_trigger(const Json& t, TransitionDef& tr, const std::string& where, Collector& c) {
  if (!t.is_object()) {
    c.schema(where + ": trigger must be an object");
    return;
  }
  if (t.contains("condition")) {
    tr.trigger.kind = TriggerKind::kCondition;
    try {
      tr.guard = parse_guard(t["condition"].get<std::string>());
    } catch (const std::exception& e) {
      c.schema(where + ": " + e.what());
    }
  } else if (t.contains("command")) {
    tr.trigger.kind = TriggerKind::kCommand;
    tr.trigger.command = t["command"].is_string() ? t["command"].get<std::string>() : "";
    if (tr.trigger.command.empty()) c.schema(where + ": command trigger needs a name");
  } else if (t.contains("message")) {
    tr.trigger.kind = TriggerKind::kMessage;
    auto type = t["message"].is_string() ? wire::message_type_from_name(t["message"].get<std::string>()) : std::nullopt;
    if (!type || wire::kind_of(*type) != wire::MessageKind::kApplicationData) {
      c.schema(where + ": message trigger must name an application message type");
    } else {
      tr.trigger.message = *type;
    }
  } else if (t.contains("timeout_s")) {
    tr.trigger.kind = TriggerKind::kTimeout;
    if (!t["timeout_s"].is_number() || t["timeout_s"].get<double>() <= 0) {
      c.schema(where + ": timeout_s must be positive");
    } else {
      tr.trigger.after = from_seconds(t["timeout_s"].get<double>());
    }
  } else {
    c.schema(where + ": trigger needs one of condition, command, message, timeout_s");
  }
}

inline void read_actions(const Json& a, TransitionDef& tr, const std::string& where, Collector& c) {
  if (!a.is_array()) {
    c.schema(where + ": actions must be an array");
    return;
  }
  for (const auto& x : a) {
    ActionDef act;
    auto type = x.value("message", std::string("best-practice-command"));
    auto t = wire::message_type_from_name(type);
    if (!t || (*t != wire::MessageType::kBestPracticeCommand && *t != wire::MessageType::kTimeLog)) {
      c.schema(where + ": actions may emit best-practice-command or time-log, not '" + type + "'");
      continue;
    }
    act.message = *t;
    act.command = x.value("command", x.value("note", std::string{}));
    int prio = x.value("priority", 5);
    if (prio < 0 || prio > 7) c.schema(where + ": action priority must be 0..7");
    act.priority = static_cast<std::uint8_t>(std::clamp(prio, 0, 7));
    auto target = x.value("target", std::string("counterpart"));
    if (target == "publish") {
      act.target = ActionTarget::kPublish;
    } else if (target != "counterpart") {
      c.schema(where + ": action target must be counterpart or publish");
    }
    tr.actions.push_back(std::move(act));
  }
}

}  // namespace detail

/// Validates a model document and builds its definition. Every violation
/// is collected before throwing ModelError.
inline AutomatonDef load_model(const Json& doc) {
  detail::Collector c;
  AutomatonDef def;
  if (!doc.is_object()) throw ModelError({{ViolationKind::kSchema, "model document must be a JSON object"}});

  if (doc.contains("name") && doc["name"].is_string()) {
    def.name = doc["name"];
  } else {
    c.schema("name: required string");
  }
  def.notes = doc.value("notes", std::string{});

  if (doc.contains("measurements")) {
    if (!doc["measurements"].is_array()) c.schema("measurements: must be an array");
    for (const auto& m : doc.value("measurements", Json::array())) {
      if (!m.is_object() || !m.contains("name") || !m["name"].is_string()) {
        c.schema("measurements: each entry needs a name");
        continue;
      }
      if (def.declares(m["name"])) c.schema("measurements: duplicate '" + m["name"].get<std::string>() + "'");
      def.measurements.push_back({m["name"], m.value("unit", std::string{})});
    }
  }

  std::set<std::uint8_t> seen;
  if (!doc.contains("states") || !doc["states"].is_array() || doc["states"].empty()) {
    c.schema("states: required non-empty array");
  } else {
    for (const auto& s : doc["states"]) {
      std::string where = "state " + s.value("name", std::string("?"));
      if (!s.is_object() || !s.contains("uid")) {
        c.schema(where + ": uid required");
        continue;
      }
      auto uid = detail::read_uid(s["uid"], where, c);
      if (!uid) continue;
      if (!seen.insert(*uid).second) c.schema(where + ": duplicate UID " + std::to_string(*uid));
      StateDef st;
      st.uid = *uid;
      st.name = s.value("name", std::string{});
      if (st.name.empty()) c.schema("state " + std::to_string(*uid) + ": name required");
      auto safety = s.value("safety", std::string{});
      if (safety == "open_loop_safe") {
        st.safety = Safety::kOpenLoopSafe;
      } else if (safety == "transient_safe") {
        st.safety = Safety::kTransientSafe;
        double dwell = s.value("max_dwell_s", to_seconds(kDefaultMaxDwell));
        if (dwell <= 0) c.schema(where + ": max_dwell_s must be positive");
        st.max_dwell = from_seconds(dwell);
        if (!s.contains("fallback")) {
          c.safety(where + ": transient state has no open-loop-safe fallback");
        } else if (auto f = detail::read_uid(s["fallback"], where + " fallback", c)) {
          st.fallback_uid = *f;
        }
      } else {
        c.schema(where + ": safety must be open_loop_safe or transient_safe");
      }
      def.states.push_back(std::move(st));
    }
  }

  for (const auto& st : def.states) {
    if (st.open_loop_safe() || st.fallback_uid == 0) continue;
    const StateDef* fb = def.state(st.fallback_uid);
    if (!fb) {
      c.safety("state " + st.name + ": fallback " + std::to_string(st.fallback_uid) + " does not exist");
    } else if (!fb->open_loop_safe()) {
      c.safety("state " + st.name + ": fallback '" + fb->name + "' is not open-loop safe");
    }
  }

  if (auto init = doc.contains("initial") ? detail::read_uid(doc["initial"], "initial", c) : std::nullopt) {
    def.initial = *init;
    const StateDef* s = def.state(*init);
    if (!s) {
      c.schema("initial: state " + std::to_string(*init) + " does not exist");
    } else if (!s->open_loop_safe()) {
      c.safety("initial: state '" + s->name + "' must be open-loop safe");
    }
  } else if (!doc.contains("initial")) {
    c.schema("initial: required");
  }

  if (doc.contains("transitions") && !doc["transitions"].is_array()) c.schema("transitions: must be an array");
  int index = 0;
  for (const auto& t : doc.value("transitions", Json::array())) {
    std::string where = "transition #" + std::to_string(index++);
    TransitionDef tr;
    auto from = t.contains("from") ? detail::read_uid(t["from"], where + " from", c) : std::nullopt;
    auto to = t.contains("to") ? detail::read_uid(t["to"], where + " to", c) : std::nullopt;
    if (!from || !to) {
      c.schema(where + ": from and to are required");
      continue;
    }
    tr.from = *from;
    tr.to = *to;
    if (!def.state(tr.from)) c.schema(where + ": unknown source state " + std::to_string(tr.from));
    if (!def.state(tr.to)) c.schema(where + ": unknown target state " + std::to_string(tr.to));
    detail::read_trigger(t.value("trigger", Json()), tr, where, c);
    if (t.contains("guard")) {
      if (tr.trigger.kind == TriggerKind::kCondition) {
        c.schema(where + ": condition triggers carry their guard in the condition");
      } else {
        try {
          tr.guard = parse_guard(t["guard"].get<std::string>());
        } catch (const std::exception& e) {
          c.schema(where + ": " + e.what());
        }
      }
    }
    for (const auto& term : tr.guard.terms) {
      if (!def.declares(term.measurement)) c.schema(where + ": guard references undeclared measurement '" + term.measurement + "'");
    }
    if (t.contains("actions")) detail::read_actions(t["actions"], tr, where, c);
    def.transitions.push_back(std::move(tr));
  }

  if (doc.contains("projection")) {
    const auto& p = doc["projection"];
    if (!p.is_object()) {
      c.schema("projection: must be an object of center UID -> rural UID");
    } else {
      for (const auto& [k, v] : p.items()) {
        int key = -1;
        try {
          key = std::stoi(k);
        } catch (...) {
        }
        if (key < 1 || key > 255 || !v.is_number_integer() || v.get<int>() < 1 || v.get<int>() > 255) {
          c.schema("projection: entry '" + k + "' is not UID -> UID");
          continue;
        }
        if (!def.state(static_cast<std::uint8_t>(key))) c.schema("projection: unknown state " + k);
        def.projection[static_cast<std::uint8_t>(key)] = static_cast<std::uint8_t>(v.get<int>());
      }
      for (const auto& s : def.states) {
        if (!def.projection.count(s.uid)) c.mapping("projection: state '" + s.name + "' has no rural image");
      }
    }
  }

  if (!c.out.empty()) throw ModelError(std::move(c.out));
  return def;
}

inline AutomatonDef load_model_text(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ModelError({{ViolationKind::kSchema, std::string("not valid JSON: ") + e.what()}});
  }
  return load_model(doc);
}

/// Model rendered for the control API and console (states, safety classes,
/// transitions as edges).
inline Json describe(const AutomatonDef& def) {
  Json states = Json::array();
  for (const auto& s : def.states) {
    Json j = {{"uid", s.uid}, {"name", s.name}, {"safety", to_string(s.safety)}};
    if (!s.open_loop_safe()) {
      j["max_dwell_s"] = to_seconds(s.max_dwell);
      j["fallback"] = s.fallback_uid;
    }
    states.push_back(j);
  }
  Json edges = Json::array();
  for (const auto& t : def.transitions) {
    Json e = {{"from", t.from}, {"to", t.to}};
    switch (t.trigger.kind) {
      case TriggerKind::kCondition: e["condition"] = t.guard.text; break;
      case TriggerKind::kCommand: e["command"] = t.trigger.command; break;
      case TriggerKind::kMessage: e["message"] = wire::name_of(t.trigger.message); break;
      case TriggerKind::kTimeout: e["timeout_s"] = to_seconds(t.trigger.after); break;
    }
    if (t.trigger.kind != TriggerKind::kCondition && !t.guard.empty()) e["guard"] = t.guard.text;
    edges.push_back(e);
  }
  Json m = Json::array();
  for (const auto& x : def.measurements) m.push_back({{"name", x.name}, {"unit", x.unit}});
  return {{"name", def.name}, {"initial", def.initial}, {"states", states}, {"transitions", edges}, {"measurements", m}};
}

}  // namespace medsync::automaton
