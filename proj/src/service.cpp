#include "dhm/service.hpp"

#include <atomic>
#include <condition_variable>
#include <csignal>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace dhm {
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

using Batch = std::shared_ptr<const std::vector<std::vector<std::uint8_t>>>;

constexpr const char* kStubPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>dhm</title></head><body>"
    "<h1>dhm reconstruction service</h1>"
    "<p>No viewer assets configured. Endpoints: <code>GET /info</code>, "
    "WebSocket <code>/stream</code>.</p></body></html>";

std::string mime_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

std::string path_of(beast::string_view target) {
  const std::string t(target.data(), target.size());
  return t.substr(0, t.find('?'));
}

}  // namespace

class WsSession;

struct Service::Impl {
  Impl(ServiceConfig c, std::unique_ptr<FrameSource> s, ServiceInfo i)
      : cfg(std::move(c)), source(std::move(s)), info(i), mailbox(cfg.initial) {}

  void broadcast(const Batch& batch);
  void accept_next();
  void request_shutdown() {
    {
      std::scoped_lock lock(stop_mutex);
      shutdown_requested = true;
    }
    stop_cv.notify_all();
  }

  http::response<http::string_body> handle(const http::request<http::string_body>& req) const;

  ServiceConfig cfg;
  std::unique_ptr<FrameSource> source;
  ServiceInfo info;
  ParamMailbox mailbox;

  std::atomic<std::size_t> clients{0};
  std::atomic<std::uint64_t> published{0};
  std::atomic<std::uint64_t> dropped{0};
  std::atomic<unsigned short> bound_port{0};

  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool shutdown_requested = false;
  bool running = false;

  // Touched only on the network thread.
  std::vector<std::weak_ptr<WsSession>> sessions;
  Batch last_batch;

  // Declared last: destroying the context destroys pending handlers, which
  // may still reference the members above.
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::unique_ptr<net::signal_set> signals;
  std::thread io_thread;
  std::jthread pipeline;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Service::Impl* svc) : ws_(std::move(socket)), svc_(svc) {}
  ~WsSession() {
    if (accepted_) --svc_->clients;
  }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(1 << 16);
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  void offer(const Batch& batch) {
    if (closed_) return;
    if (pending_) ++svc_->dropped;
    pending_ = batch;
    pump();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    accepted_ = true;
    ++svc_->clients;
    svc_->sessions.push_back(weak_from_this());
    if (svc_->last_batch) offer(svc_->last_batch);
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      close();
      return;
    }
    if (!ws_.got_text()) {
      reject("control messages must be text");
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    handle(text);
    if (!close_after_write_) do_read();
  }

  void reject(const std::string& why) {
    texts_.push_back(encode_error(why));
    close_after_write_ = true;
    pump();
  }

  void handle(const std::string& text) {
    ControlMessage msg;
    try {
      msg = decode_control(text);
    } catch (const ProtocolError& e) {
      reject(e.what());
      return;
    }
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, SetParams>) {
            try {
              const ClampResult r = svc_->mailbox.post_update([&](ReconstructionParams& p) { apply_set_params(m, p); });
              send_text(encode_ack("set_params", r));
            } catch (const InvalidArgument& e) {
              send_text(encode_error(e.what()));
            }
          } else if constexpr (std::is_same_v<T, GetInfo>) {
            send_text(encode_info(svc_->info, svc_->mailbox.latest()));
          } else if constexpr (std::is_same_v<T, Pause>) {
            svc_->mailbox.pause();
            send_text(encode_ack("pause", svc_->mailbox.latest(), true));
          } else {
            svc_->mailbox.resume();
            send_text(encode_ack("resume", svc_->mailbox.latest(), false));
          }
        },
        msg);
  }

  void send_text(std::string s) {
    texts_.push_back(std::move(s));
    pump();
  }

  // One write in flight at a time: control replies first, then frames.
  void pump() {
    if (writing_ || closed_) return;
    if (!texts_.empty()) {
      writing_ = true;
      ws_.text(true);
      ws_.async_write(net::buffer(texts_.front()),
                      beast::bind_front_handler(&WsSession::on_text_written, shared_from_this()));
      return;
    }
    if (close_after_write_) {
      closed_ = true;
      ws_.async_close(websocket::close_code::policy_error,
                      [self = shared_from_this()](beast::error_code) {
                        beast::error_code ignored;
                        beast::get_lowest_layer(self->ws_).socket().close(ignored);
                      });
      return;
    }
    if (!current_ && pending_) {
      current_ = std::move(pending_);
      pending_.reset();
      index_ = 0;
    }
    if (current_) {
      writing_ = true;
      ws_.binary(true);
      ws_.async_write(net::buffer((*current_)[index_]),
                      beast::bind_front_handler(&WsSession::on_frame_written, shared_from_this()));
    }
  }

  void on_text_written(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      close();
      return;
    }
    texts_.pop_front();
    pump();
  }

  void on_frame_written(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      close();
      return;
    }
    if (++index_ >= current_->size()) current_.reset();
    pump();
  }

  websocket::stream<beast::tcp_stream> ws_;
  Service::Impl* svc_;
  beast::flat_buffer buffer_;
  std::deque<std::string> texts_;
  Batch pending_;
  Batch current_;
  std::size_t index_ = 0;
  bool writing_ = false;
  bool close_after_write_ = false;
  bool closed_ = false;
  bool accepted_ = false;
};

namespace {

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Service::Impl* svc) : stream_(std::move(socket)), svc_(svc) {}

  void run() { do_read(); }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(1 << 16);
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    http::request<http::string_body> req = parser_->release();
    if (websocket::is_upgrade(req)) {
      if (path_of(req.target()) == "/stream") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), svc_)->run(std::move(req));
        return;
      }
    }
    auto res = std::make_shared<http::response<http::string_body>>(svc_->handle(req));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
      if (wec) return;
      if (res->need_eof()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  Service::Impl* svc_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

class NetworkSink final : public FrameSink {
 public:
  explicit NetworkSink(Service::Impl* svc) : svc_(svc) {}

  void publish(const TimedFrame& frame) override {
    auto batch = std::make_shared<std::vector<std::vector<std::uint8_t>>>();
    for (const auto& m : make_frame_messages(frame)) batch->push_back(encode_frame(m));
    ++svc_->published;
    net::post(svc_->ioc, [svc = svc_, b = Batch(std::move(batch))] { svc->broadcast(b); });
  }

  void on_event(const LoopEvent& e) override {
    if (e.kind == LoopEventKind::Error) std::cerr << "dhm: frame error: " << e.message << "\n";
    if (e.kind == LoopEventKind::SourceExhausted) std::cerr << "dhm: source finished: " << e.message << "\n";
  }

 private:
  Service::Impl* svc_;
};

}  // namespace

void Service::Impl::broadcast(const Batch& batch) {
  last_batch = batch;
  std::erase_if(sessions, [](const auto& w) { return w.expired(); });
  for (const auto& w : sessions)
    if (auto s = w.lock()) s->offer(batch);
}

void Service::Impl::accept_next() {
  acceptor.async_accept(ioc, [this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec == net::error::operation_aborted) return;
    } else {
      std::make_shared<HttpSession>(std::move(socket), this)->run();
    }
    accept_next();
  });
}

http::response<http::string_body> Service::Impl::handle(const http::request<http::string_body>& req) const {
  auto reply = [&](http::status status, std::string body, const std::string& type) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::server, "dhm");
    res.set(http::field::content_type, type);
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  };
  if (req.method() != http::verb::get && req.method() != http::verb::head)
    return reply(http::status::method_not_allowed, encode_error("only GET is supported"), "application/json");
  const std::string path = path_of(req.target());
  if (path == "/info") return reply(http::status::ok, encode_info(info, mailbox.latest()), "application/json");
  if (path == "/stream")
    return reply(http::status::upgrade_required, encode_error("WebSocket upgrade required"), "application/json");

  const std::string rel = path == "/" ? "index.html" : path.substr(1);
  if (!cfg.viewer_dir.empty() && rel.find("..") == std::string::npos) {
    const auto file = cfg.viewer_dir / rel;
    std::ifstream in(file, std::ios::binary);
    if (in && std::filesystem::is_regular_file(file)) {
      std::ostringstream ss;
      ss << in.rdbuf();
      return reply(http::status::ok, ss.str(), mime_type(file));
    }
  }
  if (path == "/" || path == "/index.html") return reply(http::status::ok, kStubPage, "text/html; charset=utf-8");
  return reply(http::status::not_found, encode_error("not found"), "application/json");
}

ServiceConfig service_config_from(const KeyValueConfig& cfg) {
  ServiceConfig s;
  s.address = cfg.get_string("server.address", s.address);
  const long port = cfg.get_int("server.port", s.port);
  if (port < 0 || port > 65535) throw InvalidArgument("server.port out of range");
  s.port = static_cast<unsigned short>(port);
  s.viewer_dir = cfg.get_string("server.viewer_dir", "");
  s.loop.fps_window = static_cast<std::size_t>(cfg.get_int("pipeline.fps_window", 10));
  s.loop.max_fps = cfg.get_double("pipeline.max_fps", 0.0);
  ReconstructionParams p;
  p.z = -cfg.get_double("params.z_m", p.focus_distance());
  p.magnification = cfg.get_double("params.magnification", p.magnification);
  p.method = method_from_string(cfg.get_string("params.method", "bldsf"));
  p.output = output_kind_from_string(cfg.get_string("params.output", "amplitude"));
  s.initial = clamp_params(p).params;
  return s;
}

Service::Service(ServiceConfig config, std::unique_ptr<FrameSource> source, ServiceInfo info)
    : impl_(std::make_shared<Impl>(std::move(config), std::move(source), info)) {
  if (!impl_->source) throw InvalidArgument("service needs a frame source");
}

Service::~Service() { stop(); }

void Service::start() {
  Impl& s = *impl_;
  if (s.running) return;
  try {
    const tcp::endpoint ep(net::ip::make_address(s.cfg.address), s.cfg.port);
    s.acceptor.open(ep.protocol());
    s.acceptor.set_option(net::socket_base::reuse_address(true));
    s.acceptor.bind(ep);
    s.acceptor.listen(net::socket_base::max_listen_connections);
  } catch (const boost::system::system_error& e) {
    throw std::runtime_error("cannot listen on " + s.cfg.address + ":" + std::to_string(s.cfg.port) + ": " +
                             e.code().message());
  }
  s.bound_port = s.acceptor.local_endpoint().port();
  s.signals = std::make_unique<net::signal_set>(s.ioc, SIGINT, SIGTERM);
  s.signals->async_wait([&s](beast::error_code ec, int) {
    if (!ec) s.request_shutdown();
  });
  s.accept_next();
  s.running = true;
  s.io_thread = std::thread([&s] { s.ioc.run(); });
  s.pipeline = std::jthread([&s](std::stop_token st) {
    NetworkSink sink(&s);
    run_loop(*s.source, s.mailbox, sink, st, s.cfg.loop);
  });
}

void Service::stop() {
  Impl& s = *impl_;
  if (!s.running) return;
  s.running = false;
  s.pipeline.request_stop();
  if (s.pipeline.joinable()) s.pipeline.join();
  net::post(s.ioc, [&s] {
    beast::error_code ec;
    s.acceptor.close(ec);
    if (s.signals) s.signals->cancel(ec);
    for (const auto& w : s.sessions)
      if (auto p = w.lock()) p->close();
    s.ioc.stop();
  });
  if (s.io_thread.joinable()) s.io_thread.join();
  s.request_shutdown();
}

void Service::wait() {
  Impl& s = *impl_;
  std::unique_lock lock(s.stop_mutex);
  s.stop_cv.wait(lock, [&] { return s.shutdown_requested; });
}

unsigned short Service::port() const { return impl_->bound_port; }
std::size_t Service::client_count() const { return impl_->clients; }
std::uint64_t Service::frames_published() const { return impl_->published; }
std::uint64_t Service::frames_dropped() const { return impl_->dropped; }
ParamMailbox& Service::mailbox() { return impl_->mailbox; }

}  // namespace dhm
