#pragma once

#include <map>
#include <optional>

#include "medsync/automaton/instance.hpp"
#include "medsync/wire/address.hpp"

namespace medsync::automaton {

enum class SyncRole { kNone, kAuthority, kFollower };

inline const char* to_string(SyncRole r) {
  switch (r) {
    case SyncRole::kNone: return "none";
    case SyncRole::kAuthority: return "authority";
    case SyncRole::kFollower: return "follower";
  }
  return "?";
}

/// Center UID -> rural UID. Identity for UIDs the mapping does not list but
/// the rural model shares; anything else is unknowable.
inline std::optional<std::uint8_t> project(std::uint8_t center_uid, const std::map<std::uint8_t, std::uint8_t>& mapping,
                                           const AutomatonDef& rural) {
  auto it = mapping.find(center_uid);
  std::uint8_t uid = it == mapping.end() ? center_uid : it->second;
  if (!rural.state(uid)) return std::nullopt;
  return uid;
}

struct SyncConfig {
  SyncRole role = SyncRole::kNone;
  wire::Address counterpart;
  /// Follower: the center's projection map. Authority: its own.
  std::map<std::uint8_t, std::uint8_t> projection;
  /// Authority only: hold provisional follower transitions for an operator
  /// instead of answering them automatically.
  bool operator_confirms = false;
};

/// Cross-site synchronization for one instance. The center automaton is
/// authoritative: its transitions are adopted (projected) by the follower,
/// follower transitions are provisional and answered with the center state.
class Synchronizer {
 public:
  explicit Synchronizer(SyncConfig cfg) : cfg_(std::move(cfg)) {}

  const SyncConfig& config() const { return cfg_; }
  std::optional<std::uint8_t> pending_proposal() const { return pending_; }

  /// `seq` must strictly increase per source; anything else is stale.
  bool fresh(const wire::Address& src, std::uint32_t seq) {
    auto [it, inserted] = last_seq_.try_emplace(src, seq);
    if (inserted) return true;
    if (seq <= it->second) return false;
    it->second = seq;
    return true;
  }

  StepResult apply_remote(Instance& inst, const wire::Address& src, const wire::AppMessage& msg, SimTime now) {
    StepResult r;
    if (cfg_.role == SyncRole::kNone || src != cfg_.counterpart) {
      r.rejected = "not from the synchronization counterpart";
      return r;
    }
    if (!fresh(src, msg.seq)) {
      r.rejected = "stale sequence number " + std::to_string(msg.seq);
      return r;
    }
    if (cfg_.role == SyncRole::kFollower) return follow(inst, msg, now);
    return arbitrate(inst, msg, now);
  }

  /// Operator decision on a held follower proposal (authority side).
  StepResult resolve_proposal(Instance& inst, bool accept, SimTime now) {
    StepResult r;
    if (!pending_) {
      r.rejected = "no pending proposal";
      return r;
    }
    std::uint8_t uid = *pending_;
    pending_.reset();
    if (accept) return inst.override_state(uid, now, "operator-confirmed");
    r.emissions.push_back(inst.confirmation(now));
    return r;
  }

  std::uint8_t image_of(const Instance& inst) const { return image(inst.current()); }

  std::uint8_t image(std::uint8_t uid) const {
    auto it = cfg_.projection.find(uid);
    return it == cfg_.projection.end() ? uid : it->second;
  }

 private:
  StepResult follow(Instance& inst, const wire::AppMessage& msg, SimTime now) {
    StepResult r;
    std::uint8_t remote = 0;
    std::int64_t entered = 0;
    bool is_transition = false;
    if (const auto* t = std::get_if<wire::TransitionBody>(&msg.body)) {
      remote = t->to_uid;
      entered = t->entered_at_us;
      is_transition = true;
    } else if (const auto* c = std::get_if<wire::ConfirmationBody>(&msg.body)) {
      remote = c->state_uid;
      entered = c->entered_at_us;
    } else {
      r.rejected = "not a synchronization message";
      return r;
    }
    auto local = project(remote, cfg_.projection, inst.def());
    if (!local) {
      r.rejected = "remote state " + std::to_string(remote) + " has no local image";
      return r;
    }
    r.append(inst.adopt(*local, SimTime(entered), now));
    if (is_transition && !r.rejected) r.emissions.push_back(inst.confirmation(now));
    return r;
  }

  StepResult arbitrate(Instance& inst, const wire::AppMessage& msg, SimTime now) {
    StepResult r;
    std::uint8_t proposed = 0;
    bool is_transition = false;
    if (const auto* t = std::get_if<wire::TransitionBody>(&msg.body)) {
      proposed = t->to_uid;
      is_transition = true;
    } else if (const auto* c = std::get_if<wire::ConfirmationBody>(&msg.body)) {
      proposed = c->state_uid;
    } else {
      r.rejected = "not a synchronization message";
      return r;
    }
    if (proposed == image_of(inst)) {
      if (is_transition) pending_.reset();
      return r;
    }
    // A counterpart falling back to the shared open-loop safe state is
    // always honored, so the center never pulls it back into therapy.
    if (is_transition && !inst.current_state().open_loop_safe() && proposed == image(inst.queued_safe())) {
      pending_.reset();
      return inst.override_state(inst.queued_safe(), now, "counterpart-fallback");
    }
    if (is_transition && cfg_.operator_confirms) {
      if (!inst.def().state(proposed)) {
        r.rejected = "proposed state " + std::to_string(proposed) + " unknown here";
        return r;
      }
      pending_ = proposed;
      return r;
    }
    r.emissions.push_back(inst.confirmation(now));  // center wins
    return r;
  }

  SyncConfig cfg_;
  std::map<wire::Address, std::uint32_t> last_seq_;
  std::optional<std::uint8_t> pending_;
};

}  // namespace medsync::automaton
