#include <gtest/gtest.h>

#include <chrono>

#include "medsync/node/scale.hpp"
#include "medsync/node/server.hpp"

using namespace medsync;
using namespace medsync::node;

namespace {

/// Fast timing so registration completes in well under a second of wall time.
Json fast_two_site() {
  Json doc = two_site_scenario(1, 20, 3600, 1e9);
  for (auto& e : doc["entities"]) {
    e["timing"] = {{"poll_ms", 20}, {"heartbeat_s", 0.5}, {"automaton_heartbeat_s", 0.5},
                   {"discovery_interval_s", 0.1}, {"backoff_initial_s", 0.1}};
  }
  doc["links"][0]["latency_ms"] = 5;
  return doc;
}

struct Client {
  boost::asio::io_context ioc;
  unsigned short port;

  std::pair<int, Json> request(http::verb verb, const std::string& target, const std::string& body = {}) {
    tcp::socket sock(ioc);
    sock.connect({boost::asio::ip::make_address("127.0.0.1"), port});
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "localhost");
    req.set(http::field::content_type, "application/json");
    req.body() = body;
    req.prepare_payload();
    http::write(sock, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(sock, buf, res);
    boost::system::error_code ec;
    sock.shutdown(tcp::socket::shutdown_both, ec);
    Json j = res[http::field::content_type] == "application/json" ? Json::parse(res.body()) : Json(res.body());
    return {res.result_int(), j};
  }
};

}  // namespace

TEST(NodeServer, ServesApiAndStream) {
  Simulation sim(parse_scenario(fast_two_site()), {.retain_trace = true, .trace_capacity = 20000});
  NodeServer server(sim, {.address = "127.0.0.1", .port = 0});
  server.start();
  Client c{{}, server.port()};

  auto [st, snap] = c.request(http::verb::get, "/api/snapshot");
  EXPECT_EQ(st, 200);
  EXPECT_EQ(snap["entities"].size(), 2u);

  auto [mst, model] = c.request(http::verb::get, "/api/models/stroke_center");
  EXPECT_EQ(mst, 200);
  EXPECT_EQ(model["states"].size(), 12u);
  EXPECT_EQ(c.request(http::verb::get, "/api/models/nope").first, 404);
  EXPECT_EQ(c.request(http::verb::get, "/api/unknown").first, 404);
  EXPECT_EQ(c.request(http::verb::get, "/").first, 200);

  auto [bst, bad] = c.request(http::verb::post, "/api/inject", R"({"target":"1.1.1","vitals":{"systolic_bp":"x"}})");
  EXPECT_EQ(bst, 400);
  EXPECT_FALSE(bad["details"].empty());
  EXPECT_TRUE(bad.contains("audit_id"));
  EXPECT_EQ(c.request(http::verb::post, "/api/link", "not json").first, 400);
  EXPECT_EQ(c.request(http::verb::post, "/api/component", R"({"id":"rural/cs0","action":"explode"})").first, 400);

  // Stream from the beginning; wait for both automata to register.
  tcp::socket sock(c.ioc);
  sock.connect({boost::asio::ip::make_address("127.0.0.1"), server.port()});
  websocket::stream<tcp::socket> ws(std::move(sock));
  ws.handshake("localhost", "/api/stream?since=-1");
  auto wait_for = [&](auto pred) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    while (std::chrono::steady_clock::now() < deadline) {
      beast::flat_buffer buf;
      ws.read(buf);
      Json r = Json::parse(beast::buffers_to_string(buf.data()));
      if (pred(r)) return r;
    }
    return Json();
  };
  int registered = 0;
  wait_for([&](const Json& r) { return r["event"] == "automaton.registered" && ++registered == 2; });
  ASSERT_EQ(registered, 2);

  auto [ist, ok] = c.request(http::verb::post, "/api/inject", R"({"target":"1.1.1","vitals":{"systolic_bp":185}})");
  EXPECT_EQ(ist, 200);
  std::string audit = ok["audit_id"];
  Json echoed = wait_for([&](const Json& r) { return r["event"] == "api.command" && r["audit_id"] == audit; });
  EXPECT_FALSE(echoed.is_null());
  std::set<std::string> sites;
  auto start = std::chrono::steady_clock::now();
  wait_for([&](const Json& r) {
    if (r["event"] == "automaton.transition" && r["to_name"] == "Hypertension Control") {
      sites.insert(r["component"].get<std::string>());
    }
    return sites.size() == 2;
  });
  EXPECT_EQ(sites, (std::set<std::string>{"rural/a1.1", "center/a1.1"}));
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(1));

  auto [ast, automata] = c.request(http::verb::get, "/api/automata");
  EXPECT_EQ(ast, 200);
  ASSERT_EQ(automata.size(), 2u);
  for (const auto& a : automata) EXPECT_EQ(a["state"]["name"], "Hypertension Control");

  EXPECT_EQ(c.request(http::verb::post, "/api/component", R"({"id":"rural/cs0","action":"kill"})").first, 200);
  Json killed = wait_for([](const Json& r) { return r["event"] == "component.kill" && r["component"] == "rural/cs0"; });
  EXPECT_FALSE(killed.is_null());

  auto [tst, trace] = c.request(http::verb::get, "/api/trace?since=0&limit=5");
  EXPECT_EQ(tst, 200);
  EXPECT_EQ(trace["records"].size(), 5u);
  EXPECT_EQ(trace["records"][0]["seq"], 1);

  boost::system::error_code ec;
  ws.close(websocket::close_code::normal, ec);
  server.stop();
}
