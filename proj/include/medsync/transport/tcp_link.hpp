#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>

#include "medsync/transport/stream_framer.hpp"

namespace medsync::transport {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

/// Receiving end of a live gateway link: accepts stream connections and
/// hands every decoded frame to the handler (from the connection thread).
class TcpFrameListener {
 public:
  using Handler = std::function<void(wire::Bytes)>;

  TcpFrameListener(std::uint16_t port, Handler handler)
      : acceptor_(io_, tcp::endpoint(asio::ip::make_address("127.0.0.1"), port)), handler_(std::move(handler)) {
    thread_ = std::thread([this] { accept_loop(); });
  }

  ~TcpFrameListener() { stop(); }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void stop() {
    if (stopped_.exchange(true)) return;
    boost::system::error_code ec;
    {
      // A blocking accept() is not interrupted by close() from another
      // thread; a throwaway connection wakes it.
      asio::io_context wake_io;
      tcp::socket wake(wake_io);
      wake.connect(acceptor_.local_endpoint(), ec);
    }
    if (thread_.joinable()) thread_.join();
    acceptor_.close(ec);
    {
      std::lock_guard lock(mu_);
      for (auto& s : sockets_) s->shutdown(tcp::socket::shutdown_both, ec);
    }
    for (auto& t : readers_) {
      if (t.joinable()) t.join();
    }
  }

  std::uint64_t framing_errors() const { return framing_errors_; }

 private:
  void accept_loop() {
    while (!stopped_) {
      auto sock = std::make_shared<tcp::socket>(io_);
      boost::system::error_code ec;
      acceptor_.accept(*sock, ec);
      if (ec || stopped_) return;
      std::lock_guard lock(mu_);
      sockets_.push_back(sock);
      readers_.emplace_back([this, sock] { read_loop(sock); });
    }
  }

  void read_loop(std::shared_ptr<tcp::socket> sock) {
    StreamFramer framer;
    std::array<std::uint8_t, 4096> chunk{};
    for (;;) {
      boost::system::error_code ec;
      std::size_t n = sock->read_some(asio::buffer(chunk), ec);
      if (ec) return;
      framer.feed(wire::ByteView(chunk.data(), n));
      try {
        while (auto f = framer.next()) handler_(std::move(*f));
      } catch (const wire::WireError&) {
        ++framing_errors_;
        sock->close(ec);
        return;
      }
    }
  }

  asio::io_context io_;
  tcp::acceptor acceptor_;
  Handler handler_;
  std::thread thread_;
  std::mutex mu_;
  std::vector<std::shared_ptr<tcp::socket>> sockets_;
  std::vector<std::thread> readers_;
  std::atomic<bool> stopped_{false};
  std::atomic<std::uint64_t> framing_errors_{0};
};

/// Sending end: one persistent connection, frames written whole.
class TcpFrameSender {
 public:
  TcpFrameSender(const std::string& host, std::uint16_t port) : socket_(io_) {
    tcp::resolver resolver(io_);
    asio::connect(socket_, resolver.resolve(host, std::to_string(port)));
    socket_.set_option(tcp::no_delay(true));
  }

  void send(wire::ByteView frame) {
    auto bytes = stream_encode(frame);
    std::lock_guard lock(mu_);
    asio::write(socket_, asio::buffer(bytes));
  }

  void close() {
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

 private:
  asio::io_context io_;
  tcp::socket socket_;
  std::mutex mu_;
};

}  // namespace medsync::transport
