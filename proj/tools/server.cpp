// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#include "server.hpp"

#include <atomic>
#include <csignal>
#include <optional>
#include <deque>
#include <iostream>
#include <thread>
#include <vector>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace dvr::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr std::size_t kBodyLimit = 16 * 1024 * 1024;

void log_error(beast::error_code ec, const char* what) {
  if (ec == net::error::operation_aborted || ec == websocket::error::closed || ec == http::error::end_of_stream) return;
  std::cerr << "dvr serve: " << what << ": " << ec.message() << '\n';
}

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response make_response(const Request& req, http::status status, std::string body, const char* type) {
  Response res{status, req.version()};
  res.set(http::field::server, "dvr");
  res.set(http::field::content_type, type);
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response json_response(const Request& req, http::status status, const nlohmann::json& j) {
  return make_response(req, status, j.dump(), "application/json");
}

Response handle_http(const Catalog& catalog, const Request& req) {
  const std::string target(req.target());
  const std::string path = target.substr(0, target.find('?'));
  if (req.method() == http::verb::options) {
    Response res = make_response(req, http::status::no_content, "", "text/plain");
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    return res;
  }
  if (path == "/healthz" && req.method() == http::verb::get)
    return json_response(req, http::status::ok, {{"status", "ok"}, {"volumes", catalog.size()}});
  if (path == "/volumes" && req.method() == http::verb::get)
    return json_response(req, http::status::ok, catalog.to_json());
  if (path == "/render" && req.method() == http::verb::post) {
    try {
      const auto body = detail::parse_json_text(req.body(), "request body");
      const auto png = render_once(catalog, body);
      return make_response(req, http::status::ok, std::string(png.begin(), png.end()), "image/png");
    } catch (const NotFoundError& e) {
      return json_response(req, http::status::not_found, error_json("volume", e.what()));
    } catch (const ValidationError& e) {
      return json_response(req, http::status::bad_request, error_json(e.field(), e.message()));
    } catch (const FormatError& e) {
      return json_response(req, http::status::bad_request, error_json("body", e.what()));
    } catch (const nlohmann::json::exception& e) {
      return json_response(req, http::status::bad_request, error_json("body", e.what()));
    } catch (const std::exception& e) {
      return json_response(req, http::status::internal_server_error, error_json("server", e.what()));
    }
  }
  if (path == "/volumes" || path == "/render" || path == "/healthz")
    return json_response(req, http::status::method_not_allowed, error_json("method", "method not allowed"));
  return json_response(req, http::status::not_found, error_json("path", "no such endpoint: " + path));
}

// One WebSocket viewer. Reads and writes run on the connection's strand;
// finished frames arrive from the scheduler thread and are posted onto it.
class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, std::shared_ptr<const Catalog> catalog, const ServerOptions& options,
            std::uint64_t id)
      : ws_(std::move(socket)), catalog_(std::move(catalog)), options_(options), session_(*catalog_), id_(id) {}

  void run(Request req) {
    websocket::stream_base::timeout t = websocket::stream_base::timeout::suggested(beast::role_type::server);
    t.idle_timeout = options_.idle_timeout;
    t.keep_alive_pings = false;
    ws_.set_option(t);
    ws_.set_option(websocket::stream_base::decorator(
        [](websocket::response_type& res) { res.set(http::field::server, "dvr"); }));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  ~WsSession() {
    // Joins the render thread before the session state goes away.
    scheduler_.reset();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return log_error(ec, "accept");
    const auto executor = ws_.get_executor();
    std::weak_ptr<WsSession> weak = weak_from_this();
    scheduler_ = std::make_unique<FrameScheduler>(
        [executor, weak](const FrameHeader& h, std::vector<std::uint8_t> png) {
          auto message = std::make_shared<std::string>();
          const auto bytes = encode_frame_message(h, png);
          message->assign(bytes.begin(), bytes.end());
          net::post(executor, [weak, message] {
            if (auto self = weak.lock()) self->send(message, true);
          });
        },
        options_.scheduler);
    nlohmann::json hello = to_json(session_.state());
    hello["type"] = "state";
    hello["session"] = id_;
    send(std::make_shared<std::string>(hello.dump()), false);
    if (catalog_->empty()) send(std::make_shared<std::string>(error_json("volume", "no volumes available").dump()), false);
    submit();
    read();
  }

  void submit() {
    if (auto grid = session_.grid()) scheduler_->submit(std::move(grid), session_.state());
  }

  void read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      log_error(ec, "read");
      return;
    }
    ApplyResult result;
    if (!ws_.got_text()) {
      result.reply = error_json("message", "expected a text message");
    } else {
      const std::string text = beast::buffers_to_string(buffer_.data());
      const auto j = nlohmann::json::parse(text, nullptr, false);
      if (j.is_discarded())
        result.reply = error_json("message", "invalid JSON");
      else
        result = session_.apply(j);
    }
    buffer_.consume(buffer_.size());
    send(std::make_shared<std::string>(result.reply.dump()), false);
    if (result.accepted) submit();
    read();
  }

  void send(std::shared_ptr<std::string> message, bool binary) {
    queue_.push_back({std::move(message), binary});
    if (queue_.size() == 1) write_next();
  }

  void write_next() {
    ws_.binary(queue_.front().binary);
    ws_.async_write(net::buffer(*queue_.front().data),
                    beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) return log_error(ec, "write");
    queue_.pop_front();
    if (!queue_.empty()) write_next();
  }

  struct Outgoing {
    std::shared_ptr<std::string> data;
    bool binary = false;
  };

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::shared_ptr<const Catalog> catalog_;
  ServerOptions options_;
  Session session_;
  std::uint64_t id_;
  std::deque<Outgoing> queue_;
  std::unique_ptr<FrameScheduler> scheduler_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, std::shared_ptr<const Catalog> catalog, const ServerOptions& options,
              std::atomic<std::uint64_t>& next_id)
      : stream_(std::move(socket)), catalog_(std::move(catalog)), options_(options), next_id_(next_id) {}

  void run() { net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::read, shared_from_this())); }

 private:
  void read() {
    parser_.emplace();
    parser_->body_limit(kBodyLimit);
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) return close();
    if (ec) return log_error(ec, "http read");
    Request req = parser_->release();
    if (websocket::is_upgrade(req)) {
      const std::string target(req.target());
      if (target.substr(0, target.find('?')) == "/session") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), catalog_, options_, next_id_++)->run(std::move(req));
        return;
      }
    }
    auto res = std::make_shared<Response>(handle_http(*catalog_, req));
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
                        if (wec) return log_error(wec, "http write");
                        if (!res->keep_alive()) return self->close();
                        self->read();
                      });
  }

  void close() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  std::shared_ptr<const Catalog> catalog_;
  const ServerOptions& options_;
  std::atomic<std::uint64_t>& next_id_;
};

}  // namespace

struct Server::Impl {
  Impl(std::shared_ptr<const Catalog> c, ServerOptions o)
      : catalog(std::move(c)), options(std::move(o)), ioc(std::max(1, options.io_threads)), acceptor(net::make_strand(ioc)) {
    const tcp::endpoint endpoint{net::ip::make_address(options.address), options.port};
    acceptor.open(endpoint.protocol());
    acceptor.set_option(net::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen(net::socket_base::max_listen_connections);
    accept();
  }

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        log_error(ec, "accept");
        if (ec == net::error::operation_aborted) return;
      } else {
        std::make_shared<HttpSession>(std::move(socket), catalog, options, next_id)->run();
      }
      accept();
    });
  }

  std::shared_ptr<const Catalog> catalog;
  ServerOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::atomic<std::uint64_t> next_id{1};
};

Server::Server(std::shared_ptr<const Catalog> catalog, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(catalog), std::move(options))) {}

Server::~Server() = default;

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  std::optional<net::signal_set> signals;
  if (impl_->options.handle_signals) {
    signals.emplace(impl_->ioc, SIGINT, SIGTERM);
    signals->async_wait([this](beast::error_code, int) { impl_->ioc.stop(); });
  }
  std::vector<std::jthread> extra;
  for (int t = 1; t < std::max(1, impl_->options.io_threads); ++t) extra.emplace_back([this] { impl_->ioc.run(); });
  impl_->ioc.run();
}

void Server::stop() { impl_->ioc.stop(); }

}  // namespace dvr::server
