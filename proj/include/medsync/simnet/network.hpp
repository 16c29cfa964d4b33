#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "medsync/common/trace.hpp"
#include "medsync/simnet/clock.hpp"
#include "medsync/simnet/link.hpp"
#include "medsync/wire/bytes.hpp"

namespace medsync::simnet {

/// Endpoint-addressed datagram fabric over simulated links. Endpoints live
/// at sites; traffic between two sites crosses that pair's Link (one per
/// direction), traffic inside a site uses the intra-site profile.
class Network {
 public:
  using Handler = std::function<void(wire::Bytes)>;

  Network(VirtualClock& clock, TraceLog* trace, std::uint64_t seed) : clock_(clock), trace_(trace), seed_(seed) {}

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  void attach(const std::string& endpoint, const std::string& site, Handler handler) {
    sites_[endpoint] = site;
    handlers_[endpoint] = std::move(handler);
  }
  void detach(const std::string& endpoint) { handlers_.erase(endpoint); }
  bool attached(const std::string& endpoint) const { return handlers_.count(endpoint) > 0; }

  std::optional<std::string> site_of(const std::string& endpoint) const {
    auto it = sites_.find(endpoint);
    if (it == sites_.end()) return std::nullopt;
    return it->second;
  }

  /// Declares a bidirectional link. Each direction gets its own random
  /// stream seeded from the run seed and the direction name.
  void connect(const std::string& a, const std::string& b, const LinkProfile& profile) {
    for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
      std::string name = from + "->" + to;
      links_[{from, to}] = std::make_unique<Link>(name, profile, seed_ ^ fnv1a(name));
    }
  }

  void set_intra_site_profile(const LinkProfile& profile) { intra_profile_ = profile; }

  Link* link(const std::string& from, const std::string& to) {
    auto it = links_.find({from, to});
    return it == links_.end() ? nullptr : it->second.get();
  }
  const Link* link(const std::string& from, const std::string& to) const {
    auto it = links_.find({from, to});
    return it == links_.end() ? nullptr : it->second.get();
  }

  /// Operator toggle; affects both directions.
  void set_link_up(const std::string& a, const std::string& b, bool up) {
    for (Link* l : {link(a, b), link(b, a)}) {
      if (l) l->set_forced_down(!up);
    }
    if (trace_) trace_->emit(clock_.now(), "simnet", up ? "link.up" : "link.down", {{"a", a}, {"b", b}});
  }

  bool link_up(const std::string& a, const std::string& b) const {
    auto it = links_.find({a, b});
    if (it == links_.end()) return false;
    return it->second->up_at(clock_.now());
  }

  std::vector<std::pair<std::string, std::string>> site_pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, _] : links_) {
      if (key.first < key.second) out.push_back(key);
    }
    return out;
  }

  SendOutcome send(const std::string& from, const std::string& to, wire::Bytes frame) {
    auto from_site = site_of(from);
    auto to_site = site_of(to);
    if (!from_site || !to_site) {
      ++undeliverable_;
      if (trace_) trace_->emit(clock_.now(), "simnet", "net.unroutable", {{"from", from}, {"to", to}});
      return {SendStatus::kDroppedDown, SimTime{0}};
    }
    Link* l = nullptr;
    if (*from_site == *to_site) {
      l = intra_link(*from_site);
    } else {
      l = link(*from_site, *to_site);
    }
    if (!l) {
      ++undeliverable_;
      if (trace_) trace_->emit(clock_.now(), "simnet", "net.unroutable", {{"from", from}, {"to", to}});
      return {SendStatus::kDroppedDown, SimTime{0}};
    }
    SendOutcome out = l->send(frame.size(), clock_.now());
    if (!out.delivered()) {
      ++dropped_;
      if (trace_) {
        trace_->emit(clock_.now(), "simnet", "net.drop",
                     {{"from", from}, {"to", to}, {"link", l->name()}, {"reason", to_string(out.status)}});
      }
      return out;
    }
    ++in_flight_;
    clock_.schedule_at(out.deliver_at, [this, to, f = std::move(frame)]() mutable {
      --in_flight_;
      auto it = handlers_.find(to);
      if (it == handlers_.end()) {
        ++undeliverable_;
        if (trace_) trace_->emit(clock_.now(), "simnet", "net.undeliverable", {{"to", to}});
        return;
      }
      ++delivered_;
      it->second(std::move(f));
    });
    return out;
  }

  std::size_t in_flight() const { return in_flight_; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t undeliverable() const { return undeliverable_; }
  /// Frames lost on a link (loss, partition or forced down).
  std::uint64_t dropped() const { return dropped_; }
  std::uint64_t seed() const { return seed_; }
  VirtualClock& clock() { return clock_; }

 private:
  Link* intra_link(const std::string& site) {
    auto key = std::pair{site, site};
    auto it = links_.find(key);
    if (it == links_.end()) {
      std::string name = site + "->" + site;
      it = links_.emplace(key, std::make_unique<Link>(name, intra_profile_, seed_ ^ fnv1a(name))).first;
    }
    return it->second.get();
  }

  VirtualClock& clock_;
  TraceLog* trace_;
  std::uint64_t seed_;
  LinkProfile intra_profile_{};
  std::map<std::string, std::string> sites_;
  std::map<std::string, Handler> handlers_;
  std::map<std::pair<std::string, std::string>, std::unique_ptr<Link>> links_;
  std::size_t in_flight_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t undeliverable_ = 0;
  std::uint64_t dropped_ = 0;
};

}  // namespace medsync::simnet
