// medsync: run scenarios, sweep scalability, dump frames, serve a live node.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "medsync/node/report.hpp"
#include "medsync/node/scale.hpp"
#include "medsync/node/server.hpp"
#include "medsync/wire/frame_dump.hpp"

using namespace medsync;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

wire::Bytes parse_hex(std::string_view text) {
  std::string digits;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '0' && i + 1 < text.size() && (text[i + 1] == 'x' || text[i + 1] == 'X')) {
      ++i;
      continue;
    }
    if (std::isxdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
    } else if (!std::isspace(static_cast<unsigned char>(c)) && c != ':' && c != ',') {
      throw std::invalid_argument(std::string("not a hex digit: '") + c + "'");
    }
  }
  if (digits.size() % 2) throw std::invalid_argument("odd number of hex digits");
  wire::Bytes out;
  for (std::size_t i = 0; i < digits.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(digits.substr(i, 2), nullptr, 16)));
  }
  return out;
}

void print_requirements(const Json& summary) {
  for (const auto& r : summary["requirements"]) {
    std::cout << "  " << r["id"].get<std::string>() << " " << r["status"].get<std::string>() << "  "
              << r["title"].get<std::string>() << " (" << r["detail"].get<std::string>() << ")\n";
  }
}

int cmd_run(const std::string& path, const std::string& out_flag) {
  node::Simulation sim(node::load_scenario(path));
  sim.run();
  auto dir = node::output_dir(out_flag);
  Json s = node::write_report(sim, dir);
  std::cout << "scenario " << sim.scenario().name << " seed " << sim.scenario().seed << ": "
            << s["duration_s"].get<double>() << " s virtual, " << sim.trace().records().size() << " trace records, "
            << s["totals"]["work_units"].get<std::uint64_t>() << " work units\n";
  print_requirements(s);
  std::cout << "wrote " << (dir / "trace.jsonl").string() << ", metrics.csv, summary.json\n";
  return s["requirements_failed"].get<int>() == 0 ? 0 : 3;
}

int cmd_scale(double duration, int max_n, const std::string& out_flag) {
  Json series = Json::array();
  std::ostringstream csv;
  csv << "poll_ms,n,work_units,work_units_per_s\n";
  std::vector<double> slopes;
  bool ok = true;
  for (Duration poll : node::scale_poll_rates()) {
    node::ScaleSeries s = node::scale_series(poll, max_n, duration);
    double poll_ms = to_seconds(poll) * 1000.0;
    std::cout << "poll " << poll_ms << " ms\n";
    for (const auto& p : s.points) {
      std::cout << "  n=" << p.n << "  " << p.work_units_per_s << " work units/s\n";
      csv << poll_ms << ',' << p.n << ',' << p.work_units << ',' << p.work_units_per_s << '\n';
    }
    std::cout << "  fit: slope " << s.fit.slope << ", intercept " << s.fit.intercept << ", R^2 " << s.fit.r2 << "\n";
    ok &= s.fit.r2 >= 0.95;
    slopes.push_back(s.fit.slope);
    series.push_back(node::to_json(s));
  }
  double ratio = *std::max_element(slopes.begin(), slopes.end()) / *std::min_element(slopes.begin(), slopes.end());
  std::cout << "slope ratio across poll rates: " << ratio << "\n";
  auto dir = node::output_dir(out_flag);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "scale.csv") << csv.str();
  std::ofstream(dir / "scale.json") << Json{{"duration_s", duration}, {"series", series}, {"slope_ratio", ratio}}.dump(2)
                                    << '\n';
  std::cout << "wrote " << (dir / "scale.csv").string() << ", scale.json\n";
  return ok ? 0 : 3;
}

int cmd_inspect(const std::string& hex, const std::string& file, const std::string& key_hex,
                const std::string& model_file) {
  if (!model_file.empty()) {
    std::ifstream in(model_file);
    if (!in) throw std::runtime_error("cannot open " + model_file);
    std::stringstream text;
    text << in.rdbuf();
    try {
      auto def = automaton::load_model_text(text.str());
      std::cout << automaton::describe(def).dump(2) << "\n";
      return 0;
    } catch (const automaton::ModelError& e) {
      for (const auto& v : e.violations()) std::cout << automaton::to_string(v.kind) << ": " << v.message << "\n";
      return 2;
    }
  }
  wire::Bytes frame;
  if (!file.empty()) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file);
    frame.assign(std::istreambuf_iterator<char>(in), {});
  } else {
    frame = parse_hex(hex);
  }
  std::optional<wire::AesKey> key;
  if (!key_hex.empty()) key = wire::AesKey::from_hex(key_hex == "default" ? node::kDefaultKeyHex : key_hex);
  std::cout << wire::dump_frame(frame, key);
  return 0;
}

int cmd_serve(const std::string& path, const std::string& address, unsigned short port, const std::string& static_dir) {
  node::SimOptions opt;
  opt.trace_capacity = 200000;
  opt.check_projection = false;
  node::Simulation sim(node::load_scenario(path), opt);
  node::NodeServer server(sim, {address, port, static_dir});
  server.start();
  std::cout << "serving " << sim.scenario().name << " on http://" << address << ":" << server.port() << "/" << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medsync: medical best-practice message exchange and simulator"};
  app.require_subcommand(1);

  std::string scenario, out, hex, file, key, model, address = "127.0.0.1", static_dir;
  double duration = 300;
  int max_n = 10;
  unsigned short port = 8080;

  auto* run = app.add_subcommand("run", "run a scenario in virtual time and write trace, metrics and summary");
  run->add_option("scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory (default $MEDSYNC_OUT_DIR or ./out)");

  auto* scale = app.add_subcommand("scale", "work units vs. number of synchronized pairs at 100 ms, 1 s and 5 s polling");
  scale->add_option("--duration", duration, "virtual seconds per point")->check(CLI::PositiveNumber);
  scale->add_option("--max-n", max_n, "largest number of pairs")->check(CLI::Range(1, 29));
  scale->add_option("--out", out, "output directory (default $MEDSYNC_OUT_DIR or ./out)");

  auto* inspect = app.add_subcommand("inspect", "dump a frame, or validate a model document");
  inspect->add_option("hex", hex, "frame as hex digits");
  inspect->add_option("--file", file, "read the raw frame from a file")->check(CLI::ExistingFile);
  inspect->add_option("--key", key, "AES-128 key (32 hex digits, or 'default') to open the payload");
  inspect->add_option("--model", model, "validate a model JSON file instead")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "run a scenario in real time with the control API");
  serve->add_option("scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  serve->add_option("--address", address, "listen address");
  serve->add_option("--port", port, "listen port (0 = ephemeral)");
  serve->add_option("--static", static_dir, "directory holding the console bundle")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(scenario, out);
    if (*scale) return cmd_scale(duration, max_n, out);
    if (*inspect) {
      if (hex.empty() && file.empty() && model.empty()) throw std::invalid_argument("give a hex frame, --file or --model");
      return cmd_inspect(hex, file, key, model);
    }
    if (*serve) return cmd_serve(scenario, address, port, static_dir);
  } catch (const node::SpecError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
