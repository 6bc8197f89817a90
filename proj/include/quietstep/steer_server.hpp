// Copyright (c) 2026 The QuietStep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "quietstep/error.hpp"
#include "quietstep/records.hpp"
#include "quietstep/steer.hpp"

// HTTP + WebSocket front end for a SteerSession, all on one port.
//   GET  /health   service metadata
//   POST /command  {"epsilon"?: [0,1], "v_target"?: m/s, "pause"?: bool}
//                  200 {"accepted": true, "applied_at_tick": n}
//                  400 {"accepted": false, "error": ..., "fields": [{"field", "message"}]}
//   GET  /stream   WebSocket. Server pushes telemetry records (see records.hpp); the client may
//                  send command objects and gets {"kind": "ack", ...} or {"kind": "error", ...}.

namespace quietstep::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

struct ServerInfo {
  std::string checkpoint_hash;
  std::string method;
  std::string version;
};

inline json field_errors_json(const std::vector<FieldError>& errs) {
  json a = json::array();
  for (const auto& e : errs) a.push_back({{"field", e.field}, {"message", e.message}});
  return a;
}

/// Shared command intake for HTTP and WebSocket. Returns (status, body).
template <typename Scalar>
std::pair<http::status, json> handle_command(SteerSession<Scalar>& session, const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    return {http::status::bad_request,
            json{{"accepted", false}, {"error", "invalid-command"}, {"fields", json::array()}, {"message", e.what()}}};
  }
  std::vector<FieldError> errs;
  const auto cmd = command_from_json(j, errs);
  if (!errs.empty()) {
    return {http::status::bad_request,
            json{{"accepted", false}, {"error", "invalid-command"}, {"fields", field_errors_json(errs)}}};
  }
  const auto ack = session.submit(cmd);
  if (!ack.accepted) {
    return {http::status::bad_request,
            json{{"accepted", false}, {"error", "out-of-bounds"}, {"fields", field_errors_json(ack.errors)}}};
  }
  return {http::status::ok, json{{"accepted", true}, {"applied_at_tick", ack.applied_at_tick}}};
}

template <typename Scalar>
json health_json(const SteerSession<Scalar>& session, const ServerInfo& info) {
  json j{{"status", std::string(to_string(session.status()))},
         {"checkpoint_hash", info.checkpoint_hash},
         {"method", info.method},
         {"version", info.version},
         {"tick_rate_hz", session.options().tick_rate_hz},
         {"pacing", session.options().pacing},
         {"tick", session.ticks()},
         {"epsilon", session.epsilon()},
         {"v_target", session.v_target()},
         {"v_target_range", {session.env().v_target_min, session.env().v_target_max}},
         {"subscribers", session.subscriber_count()},
         {"queue_capacity", FrameQueue::kCapacity},
         {"rolling_window_ticks", session.window_length()},
         {"units", {{"v", "m/s"}, {"v_target", "m/s"}, {"step_cost", "normalized [0,1]"},
                    {"rolling_cost", "normalized [0,1], 1 s mean"},
                    {"db_proxy", "display-only 30+40*rolling_cost, not a measured SPL"}}}};
  if (session.status() == SteerStatus::diverged) j["message"] = session.status_message();
  return j;
}

/// Queues handed to WebSocket clients, so shutdown can detach them before the io context goes.
struct StreamRegistry {
  std::mutex mu;
  std::vector<std::weak_ptr<FrameQueue>> queues;

  void add(const std::shared_ptr<FrameQueue>& q) {
    std::lock_guard lk(mu);
    std::erase_if(queues, [](const auto& w) { return w.expired(); });
    queues.push_back(q);
  }

  void close_all() {
    std::lock_guard lk(mu);
    for (auto& w : queues) {
      if (auto q = w.lock()) q->close();
    }
    queues.clear();
  }
};

template <typename Scalar>
class WsSession : public std::enable_shared_from_this<WsSession<Scalar>> {
 public:
  WsSession(tcp::socket&& socket, SteerSession<Scalar>& session, StreamRegistry& registry)
      : ws_(std::move(socket)), session_(session), registry_(registry) {}

  ~WsSession() {
    if (queue_) session_.unsubscribe(queue_);
  }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, this->shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    queue_ = session_.subscribe();
    registry_.add(queue_);
    std::weak_ptr<WsSession> weak = this->shared_from_this();
    auto exec = ws_.get_executor();
    queue_->set_notify([weak, exec] {
      auto self = weak.lock();
      if (!self || self->wake_pending_.exchange(true)) return;
      net::post(exec, [weak] {
        if (auto self = weak.lock()) {
          self->wake_pending_ = false;
          self->do_write();
        }
      });
    });
    do_read();
    do_write();
  }

  void do_read() {
    ws_.async_read(in_, beast::bind_front_handler(&WsSession::on_read, this->shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      return;
    }
    const auto body = beast::buffers_to_string(in_.data());
    in_.consume(in_.size());
    auto [status, reply] = handle_command(session_, body);
    if (status == http::status::ok) {
      reply["kind"] = "ack";
    } else {
      reply["kind"] = "error";
    }
    outbox_.push_back(reply.dump());
    do_write();
    do_read();
  }

  void do_write() {
    if (writing_ || closed_) return;
    if (outbox_.empty()) {
      auto f = queue_ ? queue_->try_pop() : std::nullopt;
      if (!f) return;
      outbox_.push_back(to_json(**f).dump());
    }
    writing_ = true;
    current_ = std::move(outbox_.front());
    outbox_.pop_front();
    ws_.async_write(net::buffer(current_),
                    beast::bind_front_handler(&WsSession::on_write, this->shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      closed_ = true;
      return;
    }
    do_write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  SteerSession<Scalar>& session_;
  StreamRegistry& registry_;
  std::shared_ptr<FrameQueue> queue_;
  beast::flat_buffer in_;
  std::deque<std::string> outbox_;
  std::string current_;
  bool writing_ = false;
  bool closed_ = false;
  std::atomic<bool> wake_pending_{false};
};

template <typename Scalar>
class HttpSession : public std::enable_shared_from_this<HttpSession<Scalar>> {
 public:
  HttpSession(tcp::socket&& socket, SteerSession<Scalar>& session, const ServerInfo& info,
              StreamRegistry& registry)
      : stream_(std::move(socket)), session_(session), info_(info), registry_(registry) {}

  void run() { do_read(); }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     beast::bind_front_handler(&HttpSession::on_read, this->shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;
    const std::string target(req_.target());
    if (websocket::is_upgrade(req_)) {
      if (target == "/stream") {
        stream_.expires_never();
        std::make_shared<WsSession<Scalar>>(stream_.release_socket(), session_, registry_)->run(std::move(req_));
        return;
      }
      return reply(http::status::not_found, json{{"error", "not-found"}});
    }
    if (req_.method() == http::verb::options) return reply(http::status::no_content, json());
    if (target == "/health") {
      if (req_.method() != http::verb::get) return reply(http::status::method_not_allowed, json{{"error", "use GET"}});
      return reply(http::status::ok, health_json(session_, info_));
    }
    if (target == "/command") {
      if (req_.method() != http::verb::post) return reply(http::status::method_not_allowed, json{{"error", "use POST"}});
      auto [status, body] = handle_command(session_, req_.body());
      return reply(status, body);
    }
    if (target == "/stream") {
      return reply(http::status::upgrade_required, json{{"error", "/stream requires a WebSocket upgrade"}});
    }
    reply(http::status::not_found, json{{"error", "not-found"}});
  }

  void reply(http::status status, const json& body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::server, "quietstep");
    res->set(http::field::access_control_allow_origin, "*");
    res->set(http::field::access_control_allow_headers, "Content-Type");
    res->set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    if (!body.is_null()) {
      res->set(http::field::content_type, "application/json");
      res->body() = body.dump();
    }
    res->keep_alive(req_.keep_alive());
    res->prepare_payload();
    auto self = this->shared_from_this();
    http::async_write(stream_, *res, [self, res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  SteerSession<Scalar>& session_;
  const ServerInfo& info_;
  StreamRegistry& registry_;
};

/// Owns the io thread. The control loop (session.run) is driven by the caller.
template <typename Scalar>
class SteerServer {
 public:
  SteerServer(SteerSession<Scalar>& session, ServerInfo info) : session_(session), info_(std::move(info)) {}
  ~SteerServer() { stop(); }

  SteerServer(const SteerServer&) = delete;
  SteerServer& operator=(const SteerServer&) = delete;

  /// Binds "host:port" (port 0 picks a free one) and starts serving.
  void start(const std::string& host, std::uint16_t port) {
    try {
      const auto addr = net::ip::make_address(host);
      acceptor_.open(addr.is_v6() ? tcp::v6() : tcp::v4());
      acceptor_.set_option(net::socket_base::reuse_address(true));
      acceptor_.bind({addr, port});
      acceptor_.listen();
    } catch (const boost::system::system_error& e) {
      throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port) + ": " + e.what());
    }
    do_accept();
    thread_ = std::thread([this] { io_.run(); });
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void stop() {
    if (!thread_.joinable()) return;
    // Detach every stream queue and let an in-flight fan-out finish, so no callback can reach
    // this io context once it stops.
    registry_.close_all();
    session_.flush();
    io_.stop();
    thread_.join();
  }

 private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(io_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) std::make_shared<HttpSession<Scalar>>(std::move(socket), session_, info_, registry_)->run();
      if (acceptor_.is_open()) do_accept();
    });
  }

  SteerSession<Scalar>& session_;
  ServerInfo info_;
  StreamRegistry registry_;
  net::io_context io_{1};
  tcp::acceptor acceptor_{io_};
  std::thread thread_;
};

/// "host:port" -> parts. Missing host means 127.0.0.1.
inline std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  std::string host = colon == std::string::npos ? bind : bind.substr(0, colon);
  const std::string port_s = colon == std::string::npos ? "8765" : bind.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  if (host.size() > 1 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_s, &used);
    if (used != port_s.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(Errc::invalid_params, "bad bind address '" + bind + "'");
  }
  if (port < 0 || port > 65535) throw Error(Errc::invalid_params, "bad port in '" + bind + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

}  // namespace quietstep::server
