#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medsync/automaton/model.hpp"
#include "medsync/wire/payload.hpp"

namespace medsync::automaton {

/// A message the instance wants sent. The open-loop safe state is stamped
/// at the moment of emission.
struct Emission {
  wire::AppMessage message;
  std::uint8_t priority = 6;
  std::uint8_t safe_state = 0;
  ActionTarget target = ActionTarget::kCounterpart;

  wire::MessageType type() const { return wire::type_of(message.body); }
};

struct StepResult {
  bool transitioned = false;
  std::uint8_t from = 0;
  std::uint8_t to = 0;
  std::string cause;
  std::vector<Emission> emissions;
  std::optional<std::string> rejected;

  void append(StepResult other) {
    if (other.transitioned) {
      if (!transitioned) from = other.from;
      transitioned = true;
      to = other.to;
      cause = other.cause;
    }
    for (auto& e : other.emissions) emissions.push_back(std::move(e));
    if (other.rejected) rejected = other.rejected;
  }
};

/// Running statechart. Events are applied one at a time by the single owner;
/// the instance never reads a clock, callers pass `now`.
///
/// Transition protocol: before a transition commits, the queued safe state
/// becomes the target's fallback (or the target itself when open-loop safe),
/// and every message emitted from then on carries it. Entering a transient
/// state sets the dwell deadline; tick() at or after the deadline forces the
/// queued safe state regardless of link status.
class Instance {
 public:
  static constexpr std::uint8_t kTransitionPriority = 6;
  static constexpr std::uint8_t kConfirmationPriority = 6;

  Instance(DefPtr def, SimTime now) : def_(std::move(def)) { enter(def_->initial, now); }

  const AutomatonDef& def() const { return *def_; }
  const DefPtr& def_ptr() const { return def_; }
  std::uint8_t current() const { return current_; }
  const StateDef& current_state() const { return def_->at(current_); }
  std::uint8_t queued_safe() const { return queued_safe_; }
  std::optional<SimTime> dwell_deadline() const { return dwell_deadline_; }
  SimTime entered_at() const { return entered_at_; }
  bool link_up() const { return link_up_; }
  const std::map<std::string, double>& latest() const { return latest_; }
  const std::vector<Json>& audit() const { return audit_; }
  std::uint32_t last_seq() const { return seq_; }
  /// Sequence numbers are per source automaton; anything the owner sends on
  /// the instance's behalf draws from the same counter.
  std::uint32_t next_seq() { return ++seq_; }
  /// A restarted process continues above anything its earlier life sent.
  void seed_seq(std::uint32_t floor) { seq_ = std::max(seq_, floor); }

  /// Open-loop safe state an emission from `uid` must name.
  std::uint8_t safe_for(std::uint8_t uid) const {
    const StateDef& s = def_->at(uid);
    return s.open_loop_safe() ? s.uid : s.fallback_uid;
  }

  StepResult on_readings(const std::vector<wire::Reading>& readings, SimTime now) {
    StepResult r;
    for (const auto& rd : readings) {
      if (!def_->declares(rd.name)) {
        r.rejected = "undeclared measurement '" + rd.name + "'";
        audit_.push_back({{"t_us", now.count()}, {"rejected", *r.rejected}});
        return r;
      }
    }
    for (const auto& rd : readings) latest_[rd.name] = rd.value;
    for (const auto& t : def_->transitions) {
      if (t.from != current_ || t.trigger.kind != TriggerKind::kCondition) continue;
      bool relevant = std::any_of(readings.begin(), readings.end(),
                                  [&](const wire::Reading& rd) { return t.guard.mentions(rd.name); });
      if (relevant && t.guard.eval(latest_)) return take(t, now, "condition: " + t.guard.text);
    }
    return r;
  }

  StepResult on_command(const std::string& command, SimTime now) {
    for (const auto& t : def_->transitions) {
      if (t.from != current_ || t.trigger.kind != TriggerKind::kCommand || t.trigger.command != command) continue;
      if (t.guard.eval(latest_)) return take(t, now, "command: " + command);
    }
    return {};
  }

  StepResult on_message(wire::MessageType type, SimTime now) {
    for (const auto& t : def_->transitions) {
      if (t.from != current_ || t.trigger.kind != TriggerKind::kMessage || t.trigger.message != type) continue;
      if (t.guard.eval(latest_)) return take(t, now, std::string("message: ") + std::string(wire::name_of(type)));
    }
    return {};
  }

  /// Earliest time tick() could change state.
  std::optional<SimTime> next_deadline() const {
    std::optional<SimTime> due = dwell_deadline_;
    for (const auto& t : def_->transitions) {
      if (t.from != current_ || t.trigger.kind != TriggerKind::kTimeout) continue;
      SimTime at = entered_at_ + t.trigger.after;
      if (!due || at < *due) due = at;
    }
    return due;
  }

  StepResult tick(SimTime now) {
    if (dwell_deadline_ && now >= *dwell_deadline_) {
      return force(queued_safe_, now, "dwell-limit");
    }
    for (const auto& t : def_->transitions) {
      if (t.from != current_ || t.trigger.kind != TriggerKind::kTimeout) continue;
      if (now >= entered_at_ + t.trigger.after && t.guard.eval(latest_)) return take(t, now, "timeout");
    }
    return {};
  }

  /// Link loss keeps the remaining dwell allowance; restoration emits a
  /// state-confirmation so the counterpart can resynchronize.
  StepResult on_link_change(bool up, SimTime now) {
    StepResult r;
    if (up == link_up_) return r;
    link_up_ = up;
    if (up) r.emissions.push_back(confirmation(now));
    return r;
  }

  /// Operator or authority directed move to any state; emits a
  /// state-transition-event like a regular transition.
  StepResult override_state(std::uint8_t uid, SimTime now, std::string cause) {
    if (!def_->state(uid)) {
      StepResult r;
      r.rejected = "unknown state " + std::to_string(uid);
      return r;
    }
    return force(uid, now, std::move(cause));
  }

  /// Adopts a state decided elsewhere without announcing a transition. The
  /// dwell clock runs from `entered_at`, so an expired allowance falls back
  /// immediately (and that fallback is announced).
  StepResult adopt(std::uint8_t uid, SimTime entered_at, SimTime now) {
    StepResult r;
    if (!def_->state(uid)) {
      r.rejected = "unknown state " + std::to_string(uid);
      return r;
    }
    if (uid == current_) return r;
    r.transitioned = true;
    r.from = current_;
    r.to = uid;
    r.cause = "adopted";
    queued_safe_ = safe_for(uid);
    enter(uid, std::min(entered_at, now));
    if (dwell_deadline_ && now >= *dwell_deadline_) r.append(force(queued_safe_, now, "dwell-limit"));
    return r;
  }

  Emission confirmation(SimTime) {
    Emission e;
    e.message = {++seq_, wire::ConfirmationBody{current_, entered_at_.count()}};
    e.priority = kConfirmationPriority;
    e.safe_state = queued_safe_;
    return e;
  }

 private:
  void enter(std::uint8_t uid, SimTime at) {
    current_ = uid;
    entered_at_ = at;
    const StateDef& s = def_->at(uid);
    queued_safe_ = safe_for(uid);
    if (s.open_loop_safe()) {
      dwell_deadline_.reset();
    } else {
      dwell_deadline_ = at + s.max_dwell;
    }
  }

  StepResult take(const TransitionDef& t, SimTime now, std::string cause) {
    StepResult r = force(t.to, now, std::move(cause));
    for (const auto& a : t.actions) {
      Emission e;
      if (a.message == wire::MessageType::kTimeLog) {
        e.message = {++seq_, wire::TimeLogBody{now.count(), a.command}};
      } else {
        e.message = {++seq_, wire::CommandBody{a.command, 0}};
      }
      e.priority = a.priority;
      e.safe_state = queued_safe_;
      e.target = a.target;
      r.emissions.push_back(std::move(e));
    }
    return r;
  }

  StepResult force(std::uint8_t to, SimTime now, std::string cause) {
    StepResult r;
    r.transitioned = true;
    r.from = current_;
    r.to = to;
    r.cause = std::move(cause);
    queued_safe_ = safe_for(to);  // queued before commit
    enter(to, now);
    Emission e;
    e.message = {++seq_, wire::TransitionBody{r.from, to, now.count()}};
    e.priority = kTransitionPriority;
    e.safe_state = queued_safe_;
    r.emissions.push_back(std::move(e));
    return r;
  }

  DefPtr def_;
  std::uint8_t current_ = 0;
  std::uint8_t queued_safe_ = 0;
  std::optional<SimTime> dwell_deadline_;
  SimTime entered_at_{0};
  bool link_up_ = true;
  std::map<std::string, double> latest_;
  std::vector<Json> audit_;
  std::uint32_t seq_ = 0;
};

}  // namespace medsync::automaton
