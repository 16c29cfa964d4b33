// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "medsync/node/report.hpp"
#include "medsync/node/scale.hpp"
#include "medsync/transport/sync_queue.hpp"
#include "medsync/wire.hpp"
#include "support/entity_rig.hpp"

using namespace medsync;
using medsync::testing::EntityRig;
using medsync::testing::has_subsequence;
using medsync::testing::Probe;
using medsync::testing::Rig;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::string failure;

  /// Records the first failed expectation; later ones only count.
  bool expect(bool ok, const std::string& what) {
    if (!ok && pass) failure = what;
    pass = pass && ok;
    return ok;
  }
};

std::int64_t us(const Json& r, const char* key = "t_us") { return r[key].get<std::int64_t>(); }

// ---------------------------------------------------------------- header

// Bit-layout oracle: each field as a binary string, concatenated, cut into octets.
wire::HeaderOctets oracle_header(const wire::MessageHeader& h) {
  auto bits = [](unsigned value, int width) {
    std::string s;
    for (int i = width - 1; i >= 0; --i) s.push_back(((value >> i) & 1u) ? '1' : '0');
    return s;
  };
  std::string all = bits(static_cast<unsigned>(h.type), 6) + bits(h.priority, 3) + bits(h.checksum_flag, 1) +
                    bits(h.open_loop_safe_state, 8) + bits(h.source.entity, 5) + bits(h.source.unit, 5) +
                    bits(h.source.automaton, 5) + bits(h.destination.entity, 5) + bits(h.destination.unit, 5) +
                    bits(h.destination.automaton, 5) + bits(h.data_length_bits, 16);
  wire::HeaderOctets out{};
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(std::stoul(all.substr(8 * i, 8), nullptr, 2));
  return out;
}

// Field accessors for the sweep: name, maximum legal value, setter.
struct Field {
  const char* name;
  unsigned max;
  std::function<void(wire::MessageHeader&, unsigned)> set;
};

const std::vector<Field>& header_fields() {
  using H = wire::MessageHeader;
  auto u8 = [](unsigned v) { return static_cast<std::uint8_t>(v); };
  static const std::vector<Field> fields = {
      {"type", 63, [=](H& h, unsigned v) { h.type = static_cast<wire::MessageType>(v); }},
      {"priority", 7, [=](H& h, unsigned v) { h.priority = u8(v); }},
      {"checksum_flag", 1, [=](H& h, unsigned v) { h.checksum_flag = v != 0; }},
      {"safe_state", 255, [=](H& h, unsigned v) { h.open_loop_safe_state = u8(v); }},
      {"src.entity", 31, [=](H& h, unsigned v) { h.source.entity = u8(v); }},
      {"src.unit", 31, [=](H& h, unsigned v) { h.source.unit = u8(v); }},
      {"src.automaton", 31, [=](H& h, unsigned v) { h.source.automaton = u8(v); }},
      {"dst.entity", 31, [=](H& h, unsigned v) { h.destination.entity = u8(v); }},
      {"dst.unit", 31, [=](H& h, unsigned v) { h.destination.unit = u8(v); }},
      {"dst.automaton", 31, [=](H& h, unsigned v) { h.destination.automaton = u8(v); }},
      {"length", 65000, [=](H& h, unsigned v) { h.data_length_bits = static_cast<std::uint16_t>(v); }},
  };
  return fields;
}

wire::MessageHeader random_header(std::mt19937_64& rng) {
  wire::MessageHeader h;
  for (const auto& f : header_fields()) {
    unsigned v = static_cast<unsigned>(rng() % (f.max + 1));
    if (std::string(f.name) == "length") v -= v % 8;
    f.set(h, v);
  }
  return h;
}

Outcome header_codec() {
  Outcome o;
  std::size_t checked = 0, rejected = 0;
  auto round_trip = [&](const wire::MessageHeader& h, const std::string& what) {
    ++checked;
    wire::HeaderOctets bytes = wire::encode_header(h);
    o.expect(bytes == oracle_header(h), what + ": encoding differs from oracle");
    o.expect(wire::decode_header(bytes) == h, what + ": decode(encode(h)) != h");
  };

  // Boundary sweep: every field at 0, 1, max-1 and max, over all-zero,
  // all-max and random backgrounds.
  std::mt19937_64 rng(1);
  for (int bg = 0; bg < 3; ++bg) {
    for (const auto& f : header_fields()) {
      const bool len = std::string(f.name) == "length";
      std::vector<unsigned> values = len ? std::vector<unsigned>{0, 8, 64992, 65000}
                                         : std::vector<unsigned>{0, 1, f.max - 1, f.max};
      for (unsigned v : values) {
        wire::MessageHeader h = bg == 2 ? random_header(rng) : wire::MessageHeader{};
        if (bg == 1) {
          for (const auto& g : header_fields()) g.set(h, g.max);
        }
        f.set(h, v);
        round_trip(h, std::string(f.name) + "=" + std::to_string(v));
      }
    }
  }
  // Out of range: each field one past its maximum is an encoding-domain error.
  for (const auto& f : header_fields()) {
    if (f.max == 1 || f.max == 255) continue;  // bool and full octet cannot overflow
    wire::MessageHeader h;
    f.set(h, std::string(f.name) == "length" ? 65008 : f.max + 1);
    bool threw = false;
    try {
      wire::encode_header(h);
    } catch (const wire::WireError&) {
      threw = true;
    }
    rejected += threw;
    o.expect(threw, std::string(f.name) + " one past max was encoded");
  }
  for (int i = 0; i < 20000; ++i) round_trip(random_header(rng), "random header " + std::to_string(i));

  wire::MessageHeader ex;
  ex.type = wire::MessageType::kHeartbeat;
  ex.priority = 7;
  ex.source = {1, 2, 3};
  ex.destination = {4, 5, 6};
  const wire::HeaderOctets expected = {0x07, 0x80, 0x02, 0x21, 0x90, 0xA6, 0x00, 0x00};
  o.expect(oracle_header(ex) == expected, "oracle disagrees with 0x0780022190A60000");
  o.expect(wire::encode_header(ex) == expected, "worked example is not 0x0780022190A60000");

  o.detail = std::to_string(checked) + " round trips (20000 random), " + std::to_string(rejected) +
             " out-of-range fields rejected, worked example 0x0780022190A60000";
  return o;
}

// ---------------------------------------------------------------- CRC-32

Outcome crc32_integrity() {
  Outcome o;
  const std::string check = "123456789";
  std::uint32_t cv = wire::crc32({reinterpret_cast<const std::uint8_t*>(check.data()), check.size()});
  o.expect(cv == 0xCBF43926u, "check value is not 0xCBF43926");

  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    wire::Bytes data(rng() % 4096);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    auto ref = static_cast<std::uint32_t>(::crc32(0L, data.data(), static_cast<uInt>(data.size())));
    o.expect(wire::crc32(data) == ref, "disagrees with zlib on input " + std::to_string(i));
  }

  const auto key = wire::AesKey::from_hex(node::kDefaultKeyHex);
  std::size_t flips = 0, caught = 0;
  for (int i = 0; i < 100; ++i) {
    wire::MessageHeader h = random_header(rng);
    h.type = static_cast<wire::MessageType>(1 + rng() % wire::kLastAssignedType);
    wire::Bytes plain(rng() % 64);
    for (auto& b : plain) b = static_cast<std::uint8_t>(rng());
    wire::Bytes frame = wire::seal_frame(h, plain, key, true);
    o.expect(wire::open_frame(frame, key).plaintext == plain, "intact frame " + std::to_string(i) + " did not open");
    for (std::size_t bit = 0; bit < frame.size() * 8; ++bit) {
      wire::Bytes bad = frame;
      bad[bit / 8] ^= static_cast<std::uint8_t>(0x80 >> (bit % 8));
      ++flips;
      try {
        wire::open_frame(bad, key);
      } catch (const wire::WireError&) {
        ++caught;
      }
    }
  }
  o.expect(caught == flips, std::to_string(flips - caught) + " single-bit corruptions accepted");
  o.detail = "check 0x" + [&] {
    std::ostringstream s;
    s << std::hex << std::uppercase << cv;
    return s.str();
  }() + ", 1000/1000 agree with zlib, " + std::to_string(caught) + "/" + std::to_string(flips) +
             " bit flips rejected";
  return o;
}

// ---------------------------------------------------------------- registry

/// 1 config server, registrars for units 1 and 2, four sepsis automata in
/// unit 1 joining at 1, 2, 3 and 4 s.
struct FreshEntity : EntityRig {
  FreshEntity() {
    declare_servers(1);
    add_registrar(1);
    add_registrar(2);
    add_host(1, 1, "sepsis/rural");
    add_host(1, 2, "sepsis/cardiac");
    add_host(1, 3, "sepsis/pulmonary");
    add_host(1, 4, "sepsis/kidney");
    servers[0]->start();
    registrars[0]->start();
    run_until(0.5);
    registrars[1]->start();
    for (int i = 0; i < 4; ++i) rig.clock.schedule_at(from_seconds(1 + i), [this, i] { hosts[i]->start(); });
  }
};

Outcome registration() {
  Outcome o;
  FreshEntity e;
  e.run_until(10);
  std::size_t patterns = 0;
  auto match = [&](const std::string& who, const std::vector<std::string>& p) {
    ++patterns;
    std::string text;
    for (const auto& s : p) text += s + " ";
    o.expect(has_subsequence(e.exchange(who), p), who + " lacks " + text);
  };
  for (const char* reg : {"reg1", "reg2"}) match(reg, {">announce-registrar", "<registrar-noted", "<unit-spec"});
  match("cs0", {"<announce-registrar", ">registrar-noted", ">unit-spec", "<announce-registrar", ">registrar-noted",
                ">unit-spec"});
  // The registrar admits each automaton, then announces it to the unit.
  for (const auto& h : e.hosts) {
    ++patterns;
    const std::string addr = wire::to_string(h->address());
    std::int64_t admitted = -1, announced = -1;
    for (const auto& r : e.rig.trace.records()) {
      if (r["component"] != "reg1" || r["event"] != "send") continue;
      if (admitted < 0 && r["msg"] == "you-are-in" && r["dst"] == addr) admitted = r["seq"];
      if (admitted >= 0 && announced < 0 && r["msg"] == "I-am-starting" && r["automaton"] == h->address().automaton) {
        announced = r["seq"];
      }
    }
    o.expect(admitted >= 0 && announced > admitted, "reg1 did not admit then announce " + h->endpoint());
  }
  for (std::size_t k = 0; k < e.hosts.size(); ++k) {
    const auto& h = *e.hosts[k];
    match(h.endpoint(), {">config-server-query", "<configuration-server-located", ">registrar-query", "<unit-spec",
                         ">automaton-registration", "<you-are-in"});
    o.expect(h.phase() == registry::Phase::kRegistered, h.endpoint() + " not registered");
    // I-am-starting from each later joiner is answered with I-am-here.
    for (std::size_t j = 0; j < k; ++j) {
      const auto& earlier = *e.hosts[j];
      auto starting = e.events(earlier.endpoint(), "recv", "I-am-starting");
      bool heard = std::any_of(starting.begin(), starting.end(), [&](const Json& r) { return r["automaton"] == k + 1; });
      o.expect(heard, earlier.endpoint() + " never heard I-am-starting from " + h.endpoint());
      auto here = e.events(h.endpoint(), "recv", "I-am-here");
      bool answered = std::any_of(here.begin(), here.end(),
                                  [&](const Json& r) { return r["src"] == wire::to_string(earlier.address()); });
      o.expect(answered, h.endpoint() + " got no I-am-here from " + earlier.endpoint());
      ++patterns;
    }
  }
  o.expect(e.registrars[0]->automata() == std::set<std::uint8_t>{1, 2, 3, 4}, "reg1 unit table incomplete");
  o.expect(e.events("reg2", "recv", "I-am-starting").size() == 4, "reg2 missed an I-am-starting");
  o.detail = std::to_string(patterns) + " trace patterns over 1 config server, 2 registrars, 4 automata";
  return o;
}

Outcome failure_timing() {
  Outcome o;
  std::mt19937 rng(3);
  std::int64_t worst_dev = 0;
  for (int trial = 0; trial < 20; ++trial) {
    FreshEntity e;
    double kill_at = 20 + (rng() % 10000) / 1000.0;
    e.run_until(kill_at);
    auto& victim = *e.hosts[trial % 4];
    victim.kill();
    e.run_until(kill_at + 30);
    auto dead = e.events("reg1", "registrar.automaton.dead");
    if (!o.expect(dead.size() == 1, "trial " + std::to_string(trial) + ": expected one death")) continue;
    std::int64_t last_hb = 0;
    for (const auto& r : e.events("reg1", "recv", "heartbeat")) {
      if (r["src"] == wire::to_string(victim.address())) last_hb = us(r);
    }
    worst_dev = std::max(worst_dev, std::abs(us(dead[0]) - last_hb - 15'000'000));
  }
  o.expect(worst_dev == 0, "automaton death off 15 s by " + std::to_string(worst_dev) + " us");

  {
    FreshEntity e;
    e.run_until(10);
    e.hosts[2]->hang();
    e.run_until(40);
    o.expect(has_subsequence(e.exchange(e.hosts[2]->endpoint()), {"<you-are-dead", ">I-am-stopping"}),
             "hung automaton did not answer you-are-dead with I-am-stopping");
    o.expect(!e.hosts[2]->alive(), "hung automaton still running");
  }

  std::int64_t reg_gap = 0, cs_gap = 0;
  {
    FreshEntity e;
    e.run_until(12.3);
    e.registrars[1]->kill();
    e.run_until(40);
    auto dead = e.events("cs0", "cs.registrar.dead");
    if (o.expect(dead.size() == 1, "registrar death not declared")) reg_gap = us(dead[0]) - us(dead[0], "last_seen_us");
    e.servers[0]->kill();
    e.run_until(80);
    std::int64_t last_hb = 0;
    for (const auto& r : e.events("reg1", "recv", "heartbeat")) {
      if (r["src"] == "1.0.0") last_hb = us(r);
    }
    auto lost = e.events("reg1", "registrar.config_server.lost");
    if (o.expect(!lost.empty(), "config server loss not declared")) cs_gap = us(lost[0]) - last_hb;
  }
  o.expect(reg_gap == 15'000'000, "registrar declared after " + std::to_string(reg_gap) + " us");
  o.expect(cs_gap == 15'000'000, "config server declared after " + std::to_string(cs_gap) + " us");

  Duration worst_refill{0};
  for (double downtime : {1.0, 4.0, 8.0, 15.0, 30.0}) {
    FreshEntity e;
    e.run_until(10);
    e.registrars[0]->kill();
    e.run_until(10 + downtime);
    e.registrars[0]->start();
    SimTime restart = e.now();
    std::optional<SimTime> full;
    while (!full && e.now() < restart + from_seconds(30)) {
      e.rig.clock.advance_by(from_millis(10));
      if (e.registrars[0]->automata().size() == 4) full = e.now();
    }
    if (o.expect(full.has_value(), "unit table never repopulated")) worst_refill = std::max(worst_refill, *full - restart);
  }
  o.expect(worst_refill <= from_seconds(15), "unit table repopulated after " + std::to_string(to_seconds(worst_refill)) + " s");

  std::ostringstream d;
  d << "automaton death 15 s exactly (20 trials, max dev " << worst_dev << " us), you-are-dead -> I-am-stopping, "
    << "registrar " << reg_gap / 1e6 << " s, config server " << cs_gap / 1e6 << " s, restart refill <= "
    << to_seconds(worst_refill) << " s";
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------- open-loop safety

bool is_host(const std::string& component) { return component.find("/a") != std::string::npos; }

/// Every application message an automaton sends names an open-loop-safe
/// state of its own model in the header's safe-state field.
std::size_t queued_violations(const node::Simulation& sim, std::size_t& checked) {
  std::size_t bad = 0;
  for (const auto& r : sim.trace().records()) {
    if (r["event"] != "send" || !is_host(r["component"])) continue;
    auto type = wire::message_type_from_name(r["msg"].get<std::string>());
    if (!type || wire::kind_of(*type) != wire::MessageKind::kApplicationData) continue;
    ++checked;
    const auto* h = dynamic_cast<const registry::AutomatonHost*>(sim.component(r["component"]));
    const auto* s = h ? h->host_config().model->state(r["safe"].get<std::uint8_t>()) : nullptr;
    if (!s || !s->open_loop_safe()) ++bad;
  }
  return bad;
}

Outcome open_loop_safety() {
  Outcome o;
  std::mt19937_64 rng(5);
  std::size_t occupancies = 0, partitioned = 0, late = 0, messages = 0, unsafe = 0;
  for (int trial = 0; trial < 50; ++trial) {
    // Half the trials enter tPA Therapy, half Hypertension Control.
    const bool tpa = trial % 2 == 0;
    Json doc = node::two_site_scenario(1, 200, 1, 1e9);
    doc["seed"] = trial + 1;
    Json events = Json::array();
    auto inject = [&](double at, Json body) {
      body["at_s"] = at;
      body["do"] = "inject";
      body["target"] = "1.1.1";
      events.push_back(body);
    };
    const double enter = 20 + (rng() % 5000) / 1000.0;
    if (tpa) {
      inject(enter - 4, {{"vitals", {{"systolic_bp", 140}, {"teg_index", 1.0}}}});
      inject(enter - 3, {{"command", "start_ct"}});
      inject(enter - 2, {{"command", "ischemic"}});
      inject(enter, {{"command", "start_tpa"}});
    } else {
      inject(enter, {{"vitals", {{"systolic_bp", 185 + rng() % 20}}}});
    }
    // The partition opens while the state is occupied on both sides and
    // lasts anywhere from 1 s to past the deadline.
    const double down = enter + 1 + (rng() % 290'000) / 1000.0;
    const double up = down + 1 + (rng() % 400'000) / 1000.0;
    events.push_back({{"at_s", down}, {"do", "link"}, {"a", "rural"}, {"b", "center"}, {"up", false}});
    events.push_back({{"at_s", up}, {"do", "link"}, {"a", "rural"}, {"b", "center"}, {"up", true}});
    doc["events"] = events;
    doc["duration_s"] = std::max(up, enter + 300) + 60;

    node::Simulation sim(node::parse_scenario(doc));
    sim.run();

    std::map<std::string, std::int64_t> open;  // component -> dwell deadline
    std::size_t trial_occ = 0;
    for (const auto& r : sim.trace().records()) {
      if (r["event"] != "automaton.transition") continue;
      const std::string c = r["component"];
      if (auto it = open.find(c); it != open.end()) {
        if (us(r) > it->second) ++late;
        if (us(r) > from_seconds(down).count() && it->second >= from_seconds(down).count()) ++partitioned;
        open.erase(it);
      }
      const auto* h = dynamic_cast<const registry::AutomatonHost*>(sim.component(c));
      const auto* st = h ? h->host_config().model->state(r["to"].get<std::uint8_t>()) : nullptr;
      if (st && st->safety == automaton::Safety::kTransientSafe) {
        open[c] = us(r, "dwell_deadline_us");
        ++trial_occ;
      }
    }
    late += open.size();  // still transient at the end, past every deadline
    occupancies += trial_occ;
    o.expect(trial_occ >= 2, "trial " + std::to_string(trial) + " never occupied a transient state on both sides");
    unsafe += queued_violations(sim, messages);
  }
  o.expect(partitioned > 0, "no partition overlapped an occupancy");
  o.expect(late == 0, std::to_string(late) + " occupancies outlived their dwell deadline");
  o.expect(unsafe == 0, std::to_string(unsafe) + " messages carried a non-open-loop-safe queued state");
  o.detail = "50 partitions, " + std::to_string(occupancies) + " transient occupancies (" + std::to_string(partitioned) +
             " spanning the partition start), " + std::to_string(late) + " past deadline; " + std::to_string(messages) +
             " application messages, " + std::to_string(unsafe) + " queued-before-commit violations";
  return o;
}

// ---------------------------------------------------------------- subset sync

Outcome subset_sync() {
  Outcome o;
  std::mt19937_64 rng(6);
  const std::vector<std::string> rural_cmds = {"start_ct", "ischemic", "hemorrhagic", "start_tpa", "tpa_complete",
                                               "transport"};
  const std::vector<std::string> center_cmds = {"start_ct", "ischemic", "start_tpa", "tpa_complete", "start_aspirin",
                                                "aspirin_complete", "deterioration", "hemorrhage_protocol", "transport"};
  const auto center_def = models::load("stroke/center");
  std::size_t checks = 0, mismatches = 0, internal = 0, events_total = 0;
  for (int seq = 0; seq < 100; ++seq) {
    Json doc = node::two_site_scenario(1, 200, 1, 1e9);
    doc["seed"] = seq + 1;
    Json events = Json::array();
    double t = 15;
    for (int i = 0; i < 30; ++i) {
      t += 0.05 + (rng() % 40'000) / 1000.0;
      const bool center = rng() % 3 == 0;
      Json ev = {{"at_s", t}, {"do", "inject"}, {"target", center ? "2.1.1" : "1.1.1"}};
      if (rng() % 2) {
        ev["vitals"] = {{"systolic_bp", 130 + rng() % 70}, {"teg_index", (rng() % 25) / 10.0}};
        if (center) ev["vitals"]["glucose"] = 100 + rng() % 300;
      } else {
        const auto& cmds = center ? center_cmds : rural_cmds;
        ev["command"] = cmds[rng() % cmds.size()];
      }
      events.push_back(ev);
    }
    events_total += events.size();
    doc["events"] = events;
    doc["duration_s"] = t + 30;

    node::Simulation sim(node::parse_scenario(doc));
    sim.start();
    const auto& pair = sim.pairs().at(0);
    while (auto due = sim.clock().next_due()) {
      if (*due > sim.end_time()) break;
      sim.run_until(*due);
      if (!sim.quiescent() || !sim.comparable(pair)) continue;
      ++checks;
      auto image = automaton::project(pair.authority->instance()->current(), center_def->projection,
                                      *pair.follower->host_config().model);
      if (!image || *image != pair.follower->instance()->current()) ++mismatches;
    }
    internal += sim.projection().violations;
  }
  o.expect(checks > 1000, "too few quiescent comparable points");
  o.expect(mismatches == 0, std::to_string(mismatches) + " quiescent points where project(center) != rural");
  o.expect(internal == 0, "the simulation's own projection check reported violations");
  o.detail = "100 sequences, " + std::to_string(events_total) + " events, " + std::to_string(checks) +
             " quiescent points, " + std::to_string(mismatches) + " mismatches";
  return o;
}

// ---------------------------------------------------------------- RME

Outcome rme_single_copy() {
  Outcome o;
  Json ambulance = {{"entity", 1},
                    {"name", "ambulance"},
                    {"units", {1}},
                    {"config_servers", {{{"rank", 0}}}},
                    {"registrars", {{{"unit", 1}}}},
                    {"automata", {{{"unit", 1}, {"uid", 1}, {"model", "stroke/rural"}, {"publish_vitals", true}}}},
                    {"gateway", {{"peers", Json::array({{{"entity", 2}, {"endpoint", "center/gw"}}})}}}};
  Json center = {{"entity", 2},
                 {"name", "center"},
                 {"units", {1}},
                 {"config_servers", {{{"rank", 0}}}},
                 {"registrars", {{{"unit", 1}}}},
                 {"automata", Json::array()},
                 {"gateway", {{"peers", Json::array({{{"entity", 1}, {"endpoint", "ambulance/gw"}}})}}},
                 {"subscriptions", Json::array()}};
  for (int i = 1; i <= 3; ++i) {
    center["automata"].push_back({{"unit", 1}, {"uid", i}, {"model", "stroke/center"}});
    center["subscriptions"].push_back({{"unit", 1}, {"type", "vital-sign"}, {"subscriber", "2.1." + std::to_string(i)}});
  }
  Json events = Json::array();
  for (int s = 0; s < 60; ++s) {
    events.push_back({{"at_s", 30 + s}, {"do", "inject"}, {"target", "1.1.1"},
                      {"vitals", {{"heart_rate", 80 + s % 20}, {"systolic_bp", 140 + s % 15}}}});
  }
  Json doc = {{"name", "rme"}, {"seed", 9}, {"duration_s", 120}, {"entities", {ambulance, center}},
              {"links", {{{"a", "ambulance"}, {"b", "center"}, {"latency_ms", 80}}}}, {"events", events}};
  node::Simulation sim(node::parse_scenario(doc));
  sim.run();

  auto count = [&](const std::function<bool(const Json&)>& pred) { return sim.trace().select(pred).size(); };
  const std::size_t published = count([](const Json& r) {
    return r["component"] == "ambulance/a1.1" && r["event"] == "send" && r["msg"] == "vital-sign";
  });
  // Frames that crossed the ambulance -> center link, less the gateway's own
  // traced control traffic (keepalive heartbeats).
  const std::size_t control = count([](const Json& r) {
    return r["component"] == "ambulance/gw" && r["event"] == "send" && r["to"] == "center/gw";
  });
  const std::size_t link_frames = sim.network().link("ambulance", "center")->scheduled() - control;
  const std::size_t local = count([](const Json& r) {
    return r["event"] == "recv" && r["msg"] == "vital-sign" && r["component"].get<std::string>().rfind("center/a", 0) == 0;
  });
  const auto* gw1 = dynamic_cast<const transport::RmeGateway*>(sim.component("ambulance/gw"));
  const auto* gw2 = dynamic_cast<const transport::RmeGateway*>(sim.component("center/gw"));
  o.expect(published == 60, "expected 60 published vital-sign messages, saw " + std::to_string(published));
  o.expect(link_frames == published, "link carried " + std::to_string(link_frames) + " frames");
  o.expect(gw1 && gw1->forwarded_to(2) == published, "gateway forward counter differs from message count");
  o.expect(local == 3 * published, "local deliveries " + std::to_string(local));
  o.expect(gw2 && gw2->delivered_local() == 3 * published, "gateway local counter differs");
  o.detail = std::to_string(published) + " messages, " + std::to_string(link_frames) + " link frames, " +
             std::to_string(local) + " local deliveries to 3 subscribers";
  return o;
}

// ---------------------------------------------------------------- priority/FIFO

Outcome priority_fifo() {
  Outcome o;
  std::mt19937 rng(8);
  std::size_t orders = 0;
  for (int n = 1; n <= 8; ++n) {
    // Several priority mixes per size, including all-equal and all-distinct.
    std::vector<std::vector<std::uint8_t>> mixes = {std::vector<std::uint8_t>(n, 4)};
    std::vector<std::uint8_t> distinct(n);
    std::iota(distinct.begin(), distinct.end(), 0);
    mixes.push_back(distinct);
    for (int k = 0; k < 3; ++k) {
      std::vector<std::uint8_t> m(n);
      for (auto& p : m) p = static_cast<std::uint8_t>(rng() % 3 == 0 ? 7 : rng() % 4);
      mixes.push_back(m);
    }
    for (const auto& prios : mixes) {
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      do {
        transport::SyncQueue<int> q;
        for (int i : idx) q.push(prios[i], i);
        std::vector<int> got;
        while (auto v = q.pop()) got.push_back(*v);
        // Brute force: repeatedly take the highest priority, earliest pushed.
        std::vector<int> left = idx, want;
        while (!left.empty()) {
          auto best = left.begin();
          for (auto it = left.begin(); it != left.end(); ++it) {
            if (prios[*it] > prios[*best]) best = it;
          }
          want.push_back(*best);
          left.erase(best);
        }
        ++orders;
        if (!o.expect(got == want, "order differs for n=" + std::to_string(n))) break;
      } while (std::next_permutation(idx.begin(), idx.end()));
    }
  }
  o.detail = std::to_string(orders) + " enqueue permutations (n <= 8) match the brute-force oracle";
  return o;
}

// ---------------------------------------------------------------- poll latency

Outcome poll_latency() {
  Outcome o;
  std::mt19937_64 rng(9);
  Duration worst{0};
  int delivered = 0;
  for (int group = 0; group < 10; ++group) {
    Rig rig;
    auto cfg = rig.cfg("b", "s", {1, 1, 2});
    cfg.poll_phase = Duration(static_cast<std::int64_t>(rng() % 200'000));
    Probe a(rig.env(), rig.cfg("a", "s", {1, 1, 1}));
    Probe b(rig.env(), cfg);
    a.start();
    b.start();
    for (int i = 0; i < 100; ++i) {
      rig.clock.advance_by(Duration(static_cast<std::int64_t>(1 + rng() % 1'000'000)));
      wire::ConfigBody body;
      body.unit = 1;
      const SimTime sent = rig.clock.now();
      const std::size_t before = b.received.size();
      a.send_config("b", wire::MessageType::kHeartbeat, b.address(), body);
      while (b.received.size() == before && rig.clock.now() < sent + from_seconds(1)) rig.clock.step();
      if (!o.expect(b.received.size() == before + 1, "frame not delivered")) continue;
      ++delivered;
      worst = std::max(worst, b.received.back().at - sent);
    }
  }
  o.expect(delivered == 1000, "only " + std::to_string(delivered) + " of 1000 delivered");
  o.expect(worst <= from_millis(400), "worst enqueue-to-delivery " + std::to_string(worst.count()) + " us");
  o.detail = "1000 phases at 200 ms polling, worst " + std::to_string(worst.count() / 1000.0) + " ms (bound 400 ms)";
  return o;
}

// ---------------------------------------------------------------- scale

Outcome scalability() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  std::ostringstream d;
  d.precision(4);
  for (Duration poll : node::scale_poll_rates()) {
    node::ScaleSeries s = node::scale_series(poll, 10, 300);
    o.expect(s.fit.r2 >= 0.95, "R^2 " + std::to_string(s.fit.r2) + " at " + std::to_string(to_seconds(poll)) + " s");
    o.expect(s.fit.slope > 0, "work does not grow with automata");
    d << to_seconds(poll) * 1000 << " ms R^2=" << s.fit.r2 << " ";
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.expect(secs < 300, "sweep took " + std::to_string(secs) + " s");
  d << "(n=0..10, 300 s virtual each, " << secs << " s wall)";
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------- config fail-over

Outcome config_failover() {
  Outcome o;
  EntityRig e;
  e.declare_servers(2);
  e.add_registrar(1);
  e.add_registrar(2);
  e.add_host(1, 1);
  for (auto& s : e.servers) s->start();
  for (auto& r : e.registrars) r->start();
  e.hosts[0]->start();
  auto active = [&] {
    int n = 0;
    for (const auto& s : e.servers) n += s->active();
    return n;
  };
  e.run_until(10);
  o.expect(e.servers[0]->active() && !e.servers[1]->active(), "rank 0 not the initial active server");

  e.servers[0]->kill();
  auto& late = e.add_host(1, 2);
  late.start();
  e.run_until(60);
  o.expect(e.servers[1]->active(), "rank 1 did not take over");
  for (const auto& r : e.registrars) o.expect(r->config_server() == "cs1", r->endpoint() + " did not reattach to cs1");
  o.expect(late.phase() == registry::Phase::kRegistered, "registration did not resume under rank 1");

  e.servers[0]->start();
  e.run_until(120);
  o.expect(has_subsequence(e.exchange("cs1"), {"<I-am-running"}), "rank 1 never received I-am-running");
  o.expect(!e.events("cs1", "cs.halt").empty() && !e.servers[1]->active(), "rank 1 did not halt");
  o.expect(e.servers[0]->active(), "rank 0 not active after return");
  for (const auto& r : e.registrars) o.expect(r->config_server() == "cs0", r->endpoint() + " not back on cs0");
  o.expect(active() == 1, std::to_string(active()) + " active servers at the end");
  o.detail = "rank 1 took over, late automaton registered, rank 1 halted on I-am-running, " +
             std::to_string(active()) + " active server at the end";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"header codec", header_codec},
      {"crc-32", crc32_integrity},
      {"registration conformance", registration},
      {"failure timing", failure_timing},
      {"open-loop safety", open_loop_safety},
      {"subset synchronization", subset_sync},
      {"rme single-copy", rme_single_copy},
      {"priority/fifo", priority_fifo},
      {"poll latency", poll_latency},
      {"scalability", scalability},
      {"config fail-over", config_failover},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail;
    if (!o.pass) std::cout << " [" << o.failure << "]";
    std::cout << std::endl;
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria pass" << std::endl;
  return failed;
}
