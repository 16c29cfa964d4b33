#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "medsync/node/report.hpp"
#include "medsync/node/scale.hpp"

using namespace medsync;
using namespace medsync::node;

namespace {

Json minimal_entity() {
  return {{"entity", 1},
          {"name", "rural"},
          {"units", {1}},
          {"config_servers", {{{"rank", 0}}}},
          {"registrars", {{{"unit", 1}}}},
          {"automata", {{{"unit", 1}, {"uid", 1}, {"model", "stroke/rural"}}}}};
}

std::string status_of(const Json& summary, const std::string& id) {
  for (const auto& r : summary["requirements"]) {
    if (r["id"] == id) return r["status"];
  }
  return "missing";
}


}  // namespace

TEST(EntitySpec, DefaultsEndpointsFromName) {
  EntitySpec s = parse_entity(minimal_entity());
  EXPECT_EQ(s.config_servers.at(0).endpoint, "rural/cs0");
  EXPECT_EQ(s.registrars.at(0).endpoint, "rural/reg1");
  EXPECT_EQ(s.automata.at(0).endpoint, "rural/a1.1");
  EXPECT_EQ(s.timing.heartbeat, from_seconds(5));
  EXPECT_EQ(s.timing.misses, 3);
  EXPECT_EQ(s.poll_period, from_millis(200));
}

TEST(EntitySpec, ListsEveryProblem) {
  Json doc = minimal_entity();
  doc["aes_key"] = "abc";
  doc["registrars"].push_back({{"unit", 9}});
  doc["automata"].push_back({{"unit", 1}, {"uid", 1}, {"model", "stroke/rural"}, {"endpoint", "x"}});
  doc["automata"].push_back({{"unit", 4}, {"uid", 2}, {"model", "no/such"}});
  try {
    parse_entity(doc);
    FAIL() << "spec should not validate";
  } catch (const SpecError& e) {
    const auto& p = e.problems();
    auto mentions = [&](const std::string& needle) {
      return std::any_of(p.begin(), p.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
    };
    EXPECT_TRUE(mentions("aes_key"));
    EXPECT_TRUE(mentions("unit 9"));
    EXPECT_TRUE(mentions("used twice"));
    EXPECT_TRUE(mentions("unit not in the unit table"));
    EXPECT_TRUE(mentions("model"));
    EXPECT_GE(p.size(), 5u);
  }
}

TEST(Scenario, RejectsBadEventsAndCrossReferences) {
  Json doc = two_site_scenario(1, 200, 30);
  doc["entities"][0]["automata"][0]["sync"]["counterpart"] = "2.1.9";
  doc["events"] = {{{"at_s", 1}, {"do", "explode"}},
                   {{"at_s", 2}, {"do", "inject"}, {"target", "1.1.1"}},
                   {{"at_s", 3}, {"do", "kill"}, {"component", "nowhere"}},
                   {{"at_s", 4}, {"do", "link"}, {"a", "rural"}, {"b", "mars"}, {"up", false}}};
  try {
    parse_scenario(doc);
    FAIL() << "scenario should not validate";
  } catch (const SpecError& e) {
    EXPECT_GE(e.problems().size(), 5u) << e.what();
  }
}

TEST(Scenario, EmptyRunReportsZeroCounters) {
  Simulation sim(parse_scenario(Json{{"name", "empty"}, {"duration_s", 10}}));
  sim.run();
  Json s = summary(sim);
  for (const auto& [k, v] : s["totals"].items()) EXPECT_EQ(v, 0) << k;
  EXPECT_TRUE(s["components"].empty());
  EXPECT_EQ(s["requirements_failed"], 0);
}

TEST(Scenario, LosslessTwoSiteRunKeepsProjection) {
  Simulation sim(parse_scenario(two_site_scenario(2, 200, 240)));
  sim.run();
  Json s = summary(sim);
  EXPECT_GT(sim.projection().checks, 100u);
  EXPECT_EQ(sim.projection().violations, 0u) << s["requirements"].dump(2);
  EXPECT_EQ(s["requirements_failed"], 0) << s["requirements"].dump(2);
  for (const auto& id : {"R1", "R2", "R3", "R5", "R7", "R8", "R9", "R10"}) EXPECT_EQ(status_of(s, id), "pass") << id;
  // BP crosses 180 every minute: both sides enter Hypertension Control.
  auto rural = sim.host({1, 1, 1});
  auto center = sim.host({2, 1, 1});
  EXPECT_GT(rural->sync_latencies().size() + center->sync_latencies().size(), 0u);
  auto transitions = sim.trace().select([](const Json& r) {
    return r["event"] == "automaton.transition" && r["to_name"] == "Hypertension Control";
  });
  EXPECT_GE(transitions.size(), 4u);
}

TEST(Scenario, PartitionDuringTpaFallsBackAtDeadline) {
  Json doc = two_site_scenario(1, 200, 420, 1000);
  doc["events"] = {
      {{"at_s", 10}, {"do", "inject"}, {"target", "1.1.1"}, {"vitals", {{"systolic_bp", 140}, {"teg_index", 1.0}}}},
      {{"at_s", 11}, {"do", "inject"}, {"target", "1.1.1"}, {"command", "start_ct"}},
      {{"at_s", 12}, {"do", "inject"}, {"target", "1.1.1"}, {"command", "ischemic"}},
      {{"at_s", 13}, {"do", "inject"}, {"target", "1.1.1"}, {"command", "start_tpa"}},
      {{"at_s", 60}, {"do", "link"}, {"a", "rural"}, {"b", "center"}, {"up", false}}};
  Simulation sim(parse_scenario(doc));
  sim.run();
  auto tpa = sim.trace().select([](const Json& r) {
    return r["event"] == "automaton.transition" && r["component"] == "rural/a1.1" && r["to_name"] == "tPA Therapy";
  });
  ASSERT_EQ(tpa.size(), 1u);
  const std::int64_t deadline = tpa[0]["dwell_deadline_us"];
  auto fallback = sim.trace().select([](const Json& r) {
    return r["event"] == "automaton.transition" && r["component"] == "rural/a1.1" && r["from_name"] == "tPA Therapy";
  });
  ASSERT_EQ(fallback.size(), 1u);
  EXPECT_EQ(fallback[0]["t_us"].get<std::int64_t>(), deadline);
  EXPECT_EQ(fallback[0]["to_name"], "General Assessment");
  EXPECT_EQ(fallback[0]["link_up"], false);
  Json s = summary(sim);
  EXPECT_EQ(status_of(s, "R2"), "pass");
  EXPECT_EQ(status_of(s, "R3"), "pass");
}

TEST(Scenario, VirtualRunsAreReplayable) {
  auto run = [] {
    Json doc = two_site_scenario(2, 200, 120);
    doc["links"][0]["jitter_ms"] = 5;
    doc["links"][0]["drop"] = 0.02;
    Simulation sim(parse_scenario(doc));
    sim.run();
    std::ostringstream os;
    sim.trace().write_jsonl(os);
    return os.str();
  };
  std::string a = run();
  EXPECT_GT(a.size(), 10000u);
  EXPECT_EQ(a, run());
}

TEST(Scenario, ApiPathRejectsMalformedInjection) {
  Simulation sim(parse_scenario(two_site_scenario(1, 200, 30)));
  sim.run_until(from_seconds(15));
  EXPECT_THROW(sim.apply({{"do", "inject"}, {"target", "1.1.7"}, {"vitals", {{"systolic_bp", 1}}}}, "api"), SpecError);
  EXPECT_THROW(sim.apply({{"do", "inject"}, {"target", "1.1.1"}, {"vitals", {{"systolic_bp", "high"}}}}, "api"),
               SpecError);
  EXPECT_THROW(sim.apply({{"do", "confirm"}, {"target", "1.1.1"}}, "api"), SpecError);
  EXPECT_THROW(sim.apply({{"do", "override"}, {"target", "2.1.1"}, {"state", 40}}, "api"), SpecError);
  sim.apply({{"do", "inject"}, {"target", "1.1.1"}, {"vitals", {{"systolic_bp", 185}}}}, "api");
  sim.run_until(from_seconds(17));
  EXPECT_EQ(sim.host({1, 1, 1})->instance()->current_state().name, "Hypertension Control");
  EXPECT_EQ(sim.host({2, 1, 1})->instance()->current_state().name, "Hypertension Control");
}

TEST(Scenario, OperatorConfirmationHoldsProposal) {
  Json doc = two_site_scenario(1, 200, 60, 1000);
  doc["entities"][1]["automata"][0]["sync"]["operator_confirms"] = true;
  // A rural override is something the center cannot derive on its own.
  doc["events"] = {{{"at_s", 10}, {"do", "override"}, {"target", "1.1.1"}, {"state", 2}},
                   {{"at_s", 20}, {"do", "confirm"}, {"target", "2.1.1"}, {"accept", true}}};
  Simulation sim(parse_scenario(doc));
  sim.run_until(from_seconds(15));
  ASSERT_TRUE(sim.host({2, 1, 1})->synchronizer().pending_proposal());
  EXPECT_EQ(sim.host({2, 1, 1})->instance()->current_state().name, "General Assessment");
  EXPECT_EQ(sim.host({1, 1, 1})->instance()->current_state().name, "CT & Triage");
  sim.run_until(from_seconds(25));
  EXPECT_FALSE(sim.host({2, 1, 1})->synchronizer().pending_proposal());
  EXPECT_EQ(sim.host({2, 1, 1})->instance()->current_state().name, "CT & Triage");
  EXPECT_EQ(sim.host({1, 1, 1})->instance()->current_state().name, "CT & Triage");
}

TEST(Scenario, OperatorRejectionRestoresCenterState) {
  Json doc = two_site_scenario(1, 200, 60, 1000);
  doc["entities"][1]["automata"][0]["sync"]["operator_confirms"] = true;
  doc["events"] = {{{"at_s", 10}, {"do", "override"}, {"target", "1.1.1"}, {"state", 2}},
                   {{"at_s", 20}, {"do", "confirm"}, {"target", "2.1.1"}, {"accept", false}}};
  Simulation sim(parse_scenario(doc));
  sim.run_until(from_seconds(25));
  EXPECT_EQ(sim.host({2, 1, 1})->instance()->current_state().name, "General Assessment");
  EXPECT_EQ(sim.host({1, 1, 1})->instance()->current_state().name, "General Assessment");
}

TEST(LinearFit, RecoversExactLineAndScoresNoise) {
  std::vector<double> x, y;
  for (int i = 0; i <= 10; ++i) {
    x.push_back(i);
    y.push_back(3.5 * i + 12);
  }
  LinearFit f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 3.5, 1e-12);
  EXPECT_NEAR(f.intercept, 12, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  // Independent oracle: R² equals the squared Pearson correlation.
  std::mt19937 rng(3);
  std::normal_distribution<double> noise(0, 4);
  for (auto& v : y) v += noise(rng);
  f = fit_line(x, y);
  double mx = 5, my = 0;
  for (double v : y) my += v / 11;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i <= 10; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  EXPECT_NEAR(f.r2, sxy * sxy / (sxx * syy), 1e-9);
}

TEST(Scale, BaselineIsSmallAndGrowthLinear) {
  ScaleSeries s = scale_series(from_seconds(1), 4, 120);
  ASSERT_EQ(s.points.size(), 5u);
  EXPECT_LT(s.points[0].work_units_per_s, s.points[1].work_units_per_s);
  EXPECT_GE(s.fit.r2, 0.95);
  EXPECT_GT(s.fit.slope, 0);
}
