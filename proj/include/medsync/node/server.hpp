#pragma once

#include <sys/socket.h>

#include <atomic>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <list>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "medsync/node/control_api.hpp"

namespace medsync::node {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

inline constexpr std::string_view kPlaceholderIndex = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>medsync node</title></head>
<body style="font-family:monospace">
<h1>medsync node</h1>
<p>No console bundle is being served (start with --static DIR). Control API:</p>
<ul>
<li>GET /api/snapshot, /api/automata, /api/models/NAME, /api/trace?since=SEQ</li>
<li>POST /api/inject, /api/confirm, /api/override, /api/link, /api/component</li>
<li>WebSocket /api/stream?since=SEQ</li>
</ul>
<pre id="feed"></pre>
<script>
const ws = new WebSocket((location.protocol === "https:" ? "wss://" : "ws://") + location.host + "/api/stream");
const feed = document.getElementById("feed");
ws.onmessage = (m) => { feed.textContent = m.data + "\n" + feed.textContent.slice(0, 20000); };
</script>
</body></html>
)";

inline std::string_view mime_type(const std::filesystem::path& p) {
  static const std::map<std::string, std::string_view> types = {
      {".html", "text/html"}, {".js", "text/javascript"}, {".mjs", "text/javascript"}, {".css", "text/css"},
      {".json", "application/json"}, {".svg", "image/svg+xml"}, {".png", "image/png"}, {".ico", "image/x-icon"},
      {".map", "application/json"}, {".txt", "text/plain"}};
  auto it = types.find(p.extension().string());
  return it == types.end() ? std::string_view("application/octet-stream") : it->second;
}

/// Real-time node: pumps the simulation clock against wall time and serves
/// the control API, the event stream and the console bundle.
///
/// Threads: one acceptor, one per connection, one clock pump. The
/// simulation is touched only under `mu_`.
class NodeServer {
 public:
  struct Options {
    std::string address = "127.0.0.1";
    unsigned short port = 8080;  // 0 picks an ephemeral port
    std::string static_dir;
    Duration pump_period = from_millis(5);
  };

  NodeServer(Simulation& sim, Options opt) : sim_(sim), api_(sim), opt_(std::move(opt)) {}
  ~NodeServer() { stop(); }

  NodeServer(const NodeServer&) = delete;
  NodeServer& operator=(const NodeServer&) = delete;

  unsigned short port() const { return bound_port_; }

  void start() {
    acceptor_.open(tcp::v4());
    acceptor_.set_option(boost::asio::socket_base::reuse_address(true));
    acceptor_.bind({boost::asio::ip::make_address(opt_.address), opt_.port});
    acceptor_.listen();
    bound_port_ = acceptor_.local_endpoint().port();
    {
      std::lock_guard lock(mu_);
      sim_.start();
      driver_.emplace(sim_.clock());
      listener_ = sim_.trace().listen([this](const Json& r) { broadcast(r.dump()); });
    }
    pump_ = std::thread([this] { pump_loop(); });
    accept_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
    boost::system::error_code ec;
    acceptor_.close(ec);
    if (accept_.joinable()) accept_.join();
    if (pump_.joinable()) pump_.join();
    {
      std::lock_guard lock(subs_mu_);
      for (const auto& s : subs_) close(*s);
    }
    {
      std::lock_guard lock(conn_mu_);
      for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : connections_) {
      if (t.joinable()) t.join();
    }
    std::lock_guard lock(mu_);
    if (listener_) sim_.trace().unlisten(*listener_);
  }

  /// Runs `fn` with exclusive access to the simulation.
  template <typename F>
  auto with_sim(F&& fn) {
    std::lock_guard lock(mu_);
    return fn(sim_);
  }

 private:
  struct Subscriber {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> queue;
    bool closed = false;
    std::size_t dropped = 0;
  };
  static constexpr std::size_t kMaxBacklog = 10000;

  static void close(Subscriber& s) {
    std::lock_guard lock(s.mu);
    s.closed = true;
    s.cv.notify_all();
  }

  void broadcast(const std::string& text) {
    std::lock_guard lock(subs_mu_);
    for (const auto& s : subs_) {
      std::lock_guard l(s->mu);
      if (s->queue.size() >= kMaxBacklog) {
        ++s->dropped;
        continue;
      }
      s->queue.push_back(text);
      s->cv.notify_one();
    }
  }

  void pump_loop() {
    auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(opt_.pump_period);
    while (!stopping_) {
      {
        std::lock_guard lock(mu_);
        driver_->pump();
      }
      std::this_thread::sleep_for(period);
    }
  }

  void accept_loop() {
    while (!stopping_) {
      boost::system::error_code ec;
      tcp::socket sock(ioc_);
      acceptor_.accept(sock, ec);
      if (ec) {
        if (stopping_) return;
        continue;
      }
      std::lock_guard lock(conn_mu_);
      open_fds_.insert(sock.native_handle());
      connections_.emplace_back([this, s = std::move(sock)]() mutable { serve(std::move(s)); });
    }
  }

  void serve(tcp::socket sock) {
    const int fd = sock.native_handle();
    beast::flat_buffer buf;
    boost::system::error_code ec;
    while (!stopping_) {
      http::request<http::string_body> req;
      http::read(sock, buf, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        stream(std::move(sock), std::move(req));
        forget(fd);
        return;
      }
      auto res = respond(req);
      http::write(sock, res, ec);
      if (ec || !req.keep_alive()) break;
    }
    sock.shutdown(tcp::socket::shutdown_both, ec);
    forget(fd);
  }

  void forget(int fd) {
    std::lock_guard lock(conn_mu_);
    open_fds_.erase(fd);
  }

  http::response<http::string_body> respond(const http::request<http::string_body>& req) {
    std::string target(req.target());
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(req.keep_alive());
    res.set(http::field::server, "medsync");
    res.set(http::field::access_control_allow_origin, "*");
    if (target.rfind("/api/", 0) == 0) {
      ApiResponse r;
      {
        std::lock_guard lock(mu_);
        r = api_.handle(std::string(req.method_string()), target, req.body());
      }
      res.result(static_cast<http::status>(r.status));
      res.set(http::field::content_type, "application/json");
      res.body() = r.body.dump();
    } else {
      serve_static(target, res);
    }
    res.prepare_payload();
    return res;
  }

  void serve_static(std::string target, http::response<http::string_body>& res) {
    target = target.substr(0, target.find('?'));
    if (target.empty() || target.back() == '/') target += "index.html";
    if (opt_.static_dir.empty()) {
      if (target == "/index.html") {
        res.result(http::status::ok);
        res.set(http::field::content_type, "text/html");
        res.body() = std::string(kPlaceholderIndex);
      } else {
        res.result(http::status::not_found);
        res.body() = "not found";
      }
      return;
    }
    namespace fs = std::filesystem;
    fs::path root = fs::weakly_canonical(opt_.static_dir);
    fs::path file = fs::weakly_canonical(root / target.substr(1));
    auto rel = file.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") {
      res.result(http::status::forbidden);
      res.body() = "forbidden";
      return;
    }
    // Single-page app: unknown paths fall back to index.html.
    if (!fs::is_regular_file(file)) file = root / "index.html";
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      res.result(http::status::not_found);
      res.body() = "not found";
      return;
    }
    std::ostringstream os;
    os << in.rdbuf();
    res.result(http::status::ok);
    res.set(http::field::content_type, std::string(mime_type(file)));
    res.body() = os.str();
  }

  /// Event stream: replays retained records after ?since=SEQ, then pushes
  /// every new trace record as one JSON text message.
  void stream(tcp::socket sock, http::request<http::string_body> req) {
    websocket::stream<tcp::socket> ws(std::move(sock));
    boost::system::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);

    std::int64_t since = -1;
    std::string target(req.target());
    if (auto p = target.find("since="); p != std::string::npos) {
      try {
        since = std::stoll(target.substr(p + 6));
      } catch (const std::exception&) {
      }
    }
    auto sub = std::make_shared<Subscriber>();
    {
      // Holding mu_ while replaying and subscribing leaves no gap.
      std::lock_guard lock(mu_);
      for (const auto& r : sim_.trace().records()) {
        if (r["seq"].get<std::int64_t>() > since) sub->queue.push_back(r.dump());
      }
      std::lock_guard l(subs_mu_);
      subs_.insert(sub);
    }
    while (true) {
      // Inbound frames (close, ping) are read on this thread between writes
      // so the session never has two operations in flight.
      if (ws.next_layer().available(ec) > 0) {
        beast::flat_buffer ignored;
        ws.read(ignored, ec);
        if (ec) break;
      }
      std::string msg;
      {
        std::unique_lock lock(sub->mu);
        sub->cv.wait_for(lock, std::chrono::milliseconds(50), [&] { return sub->closed || !sub->queue.empty(); });
        if (sub->closed) break;
        if (sub->queue.empty()) continue;
        msg = std::move(sub->queue.front());
        sub->queue.pop_front();
      }
      ws.write(boost::asio::buffer(msg), ec);
      if (ec) break;
    }
    {
      std::lock_guard l(subs_mu_);
      subs_.erase(sub);
    }
    if (ws.is_open()) ws.close(websocket::close_code::going_away, ec);
  }

  Simulation& sim_;
  ControlApi api_;
  Options opt_;
  std::mutex mu_;
  std::optional<simnet::RealTimeDriver> driver_;
  std::optional<std::size_t> listener_;

  boost::asio::io_context ioc_;
  tcp::acceptor acceptor_{ioc_};
  unsigned short bound_port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread pump_;
  std::thread accept_;

  std::mutex conn_mu_;
  std::set<int> open_fds_;
  std::list<std::thread> connections_;

  std::mutex subs_mu_;
  std::set<std::shared_ptr<Subscriber>> subs_;
};

}  // namespace medsync::node
