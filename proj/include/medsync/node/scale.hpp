#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "medsync/node/simulation.hpp"

namespace medsync::node {

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

/// Ordinary least squares of y on x. R² is 1 - SS_res / SS_tot; a constant
/// series fits perfectly.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  const double n = static_cast<double>(x.size());
  if (x.size() < 2 || x.size() != y.size()) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
  }
  f.r2 = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

/// Systolic pressure the scale workload injects at `t` seconds: a 60 s
/// sine between 150 and 190 mmHg, crossing both Hypertension Control
/// guards every cycle.
inline double scale_bp(double t) { return 170.0 + 20.0 * std::sin(2.0 * M_PI * t / 60.0); }

/// Rural (entity 1) and center (entity 2) sites, each with one config
/// server, one registrar and a gateway, plus `pairs` synchronized stroke
/// automata. The rural operator feeds every rural automaton one reading
/// per second from `feed_from_s` on.
inline Json two_site_scenario(int pairs, double poll_ms, double duration_s, double feed_from_s = 10,
                              double link_latency_ms = 20) {
  auto entity = [&](int e, const std::string& name, const std::string& model, const std::string& role) {
    Json autos = Json::array();
    for (int i = 1; i <= pairs; ++i) {
      autos.push_back({{"unit", 1},
                       {"uid", i},
                       {"model", model},
                       {"sync", {{"role", role}, {"counterpart", std::to_string(3 - e) + ".1." + std::to_string(i)}}}});
    }
    Json peer = {{"entity", 3 - e}, {"endpoint", std::string(e == 1 ? "center" : "rural") + "/gw"}};
    return Json{{"entity", e},
                {"name", name},
                {"timing", {{"poll_ms", poll_ms}}},
                {"units", {1}},
                {"config_servers", {{{"rank", 0}}}},
                {"registrars", {{{"unit", 1}}}},
                {"automata", autos},
                {"gateway", {{"peers", Json::array({peer})}}}};
  };
  Json events = Json::array();
  for (int s = static_cast<int>(feed_from_s); s < static_cast<int>(duration_s); ++s) {
    for (int i = 1; i <= pairs; ++i) {
      events.push_back({{"at_s", s}, {"do", "inject"}, {"target", "1.1." + std::to_string(i)},
                        {"vitals", {{"systolic_bp", std::round(scale_bp(s) * 10) / 10}}}});
    }
  }
  return {{"name", "two-site-" + std::to_string(pairs)},
          {"seed", 7},
          {"duration_s", duration_s},
          {"entities", {entity(1, "rural", "stroke/rural", "follower"), entity(2, "center", "stroke/center", "authority")}},
          {"links", {{{"a", "rural"}, {"b", "center"}, {"latency_ms", link_latency_ms}}}},
          {"events", events}};
}

struct ScalePoint {
  int n = 0;
  std::uint64_t work_units = 0;
  double work_units_per_s = 0;
};

struct ScaleSeries {
  Duration poll{0};
  std::vector<ScalePoint> points;
  LinearFit fit;
};

/// Work units per virtual second for n = 0..max_n synchronized pairs at one
/// poll period. Trace retention is off: the metric counts protocol work,
/// not logging.
inline ScaleSeries scale_series(Duration poll, int max_n, double duration_s) {
  ScaleSeries s;
  s.poll = poll;
  std::vector<double> xs, ys;
  for (int n = 0; n <= max_n; ++n) {
    SimOptions opt;
    opt.retain_trace = false;
    opt.check_projection = false;
    Simulation sim(parse_scenario(two_site_scenario(n, to_seconds(poll) * 1000.0, duration_s)), opt);
    sim.run();
    ScalePoint p;
    p.n = n;
    p.work_units = sim.metrics().total_work_units();
    p.work_units_per_s = static_cast<double>(p.work_units) / duration_s;
    s.points.push_back(p);
    xs.push_back(n);
    ys.push_back(p.work_units_per_s);
  }
  s.fit = fit_line(xs, ys);
  return s;
}

inline const std::vector<Duration>& scale_poll_rates() {
  static const std::vector<Duration> rates = {from_millis(100), from_seconds(1), from_seconds(5)};
  return rates;
}

inline Json to_json(const ScaleSeries& s) {
  Json pts = Json::array();
  for (const auto& p : s.points) {
    pts.push_back({{"n", p.n}, {"work_units", p.work_units}, {"work_units_per_s", p.work_units_per_s}});
  }
  return {{"poll_ms", to_seconds(s.poll) * 1000.0},
          {"points", pts},
          {"fit", {{"slope", s.fit.slope}, {"intercept", s.fit.intercept}, {"r2", s.fit.r2}}}};
}

}  // namespace medsync::node
