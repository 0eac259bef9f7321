#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <unistd.h>

#include "doctest.h"
#include "dhm/service.hpp"
#include "json.hpp"

using namespace dhm;
using namespace std::chrono_literals;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

const OpticalParams kOptics{650e-9};
const Pitch kP = Pitch::square(2.5e-6);

std::unique_ptr<FrameSource> disk_source() {
  const GridSpec g{64, 64, kP};
  std::vector<HologramFrame> frames{generate_hologram(ObjectSpec::opaque_disk(30e-6), 0.011, g, kOptics)};
  return std::make_unique<VectorSource>(frames, true);
}

ServiceInfo disk_info() { return {64, 64, kP, kOptics.wavelength, {}}; }

ServiceConfig test_config() {
  ServiceConfig c;
  c.port = 0;
  c.loop.max_fps = 50;
  return c;
}

struct HttpReply {
  unsigned status;
  std::string content_type;
  std::string body;
};

HttpReply http_request(unsigned short port, http::verb verb, const std::string& target) {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  stream.expires_after(10s);
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {res.result_int(), std::string(res[http::field::content_type]), res.body()};
}

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    beast::get_lowest_layer(ws_).connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    beast::get_lowest_layer(ws_).expires_after(10s);
    ws_.handshake("127.0.0.1", "/stream");
  }

  void send(const std::string& text) {
    beast::get_lowest_layer(ws_).expires_after(10s);
    ws_.text(true);
    ws_.write(net::buffer(text));
  }

  /// Next message: text replies as JSON, binary frames decoded.
  std::variant<json, FrameMessage> read() {
    beast::get_lowest_layer(ws_).expires_after(10s);
    beast::flat_buffer buf;
    ws_.read(buf);
    const auto data = static_cast<const std::uint8_t*>(buf.data().data());
    if (ws_.got_text()) return json::parse(std::string(reinterpret_cast<const char*>(data), buf.size()));
    return decode_frame(std::span<const std::uint8_t>(data, buf.size()));
  }

  json read_reply() {
    for (int i = 0; i < 200; ++i)
      if (auto m = read(); std::holds_alternative<json>(m)) return std::get<json>(m);
    throw std::runtime_error("no reply");
  }

  FrameMessage read_frame() {
    for (int i = 0; i < 200; ++i)
      if (auto m = read(); std::holds_alternative<FrameMessage>(m)) return std::get<FrameMessage>(m);
    throw std::runtime_error("no frame");
  }

  /// Reads frames until one satisfies `pred`, at most `limit` frames.
  std::optional<FrameMessage> frame_where(const std::function<bool(const FrameMessage&)>& pred, int limit = 20) {
    for (int i = 0; i < limit; ++i)
      if (auto f = read_frame(); pred(f)) return f;
    return std::nullopt;
  }

  websocket::stream<beast::tcp_stream>& ws() { return ws_; }

 private:
  net::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
};

bool wait_for(const std::function<bool()>& cond, std::chrono::milliseconds limit = 5000ms) {
  const auto end = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < end) {
    if (cond()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return cond();
}

}  // namespace

TEST_CASE("service config keys") {
  const auto cfg = KeyValueConfig::parse(
      "server.port = 9000\nserver.viewer_dir = /srv/viewer\npipeline.max_fps = 5\n"
      "params.z_m = 0.02\nparams.magnification = 10\nparams.method = asm\nparams.output = both\n");
  const auto s = service_config_from(cfg);
  CHECK(s.port == 9000);
  CHECK(s.viewer_dir == "/srv/viewer");
  CHECK(s.loop.max_fps == 5.0);
  CHECK(s.initial.z == -0.02);
  CHECK(s.initial.magnification == 4.0);
  CHECK(s.initial.method == Method::Asm);
  CHECK(s.initial.output == OutputKind::Both);
  CHECK_THROWS_AS(service_config_from(KeyValueConfig::parse("server.port = 70000\n")), InvalidArgument);
}

TEST_CASE("HTTP endpoints") {
  const auto dir = std::filesystem::temp_directory_path() / ("dhm_viewer_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir / "assets");
  std::ofstream(dir / "assets" / "app.js") << "console.log(1);";
  std::ofstream(dir.parent_path() / "dhm_secret.txt") << "secret";

  ServiceConfig cfg = test_config();
  Service bare(cfg, disk_source(), disk_info());
  bare.start();
  REQUIRE(bare.port() != 0);

  const auto info = http_request(bare.port(), http::verb::get, "/info");
  CHECK(info.status == 200);
  CHECK(info.content_type == "application/json");
  const auto j = json::parse(info.body);
  CHECK(j.at("width") == 64);
  CHECK(j.at("wavelength_m") == 650e-9);
  CHECK(j.at("pitch_m") == 2.5e-6);

  const auto stub = http_request(bare.port(), http::verb::get, "/");
  CHECK(stub.status == 200);
  CHECK(stub.body.find("/stream") != std::string::npos);
  CHECK(http_request(bare.port(), http::verb::get, "/nope").status == 404);
  CHECK(http_request(bare.port(), http::verb::post, "/info").status == 405);
  CHECK(http_request(bare.port(), http::verb::get, "/stream").status == 426);
  bare.stop();

  cfg.viewer_dir = dir;
  Service with_viewer(cfg, disk_source(), disk_info());
  with_viewer.start();
  const auto js = http_request(with_viewer.port(), http::verb::get, "/assets/app.js?v=2");
  CHECK(js.status == 200);
  CHECK(js.content_type == "text/javascript");
  CHECK(js.body == "console.log(1);");
  CHECK(http_request(with_viewer.port(), http::verb::get, "/../dhm_secret.txt").status == 404);
  CHECK(http_request(with_viewer.port(), http::verb::get, "/assets/../../dhm_secret.txt").status == 404);
  with_viewer.stop();
  std::filesystem::remove_all(dir);
  std::filesystem::remove(dir.parent_path() / "dhm_secret.txt");
}

TEST_CASE("streamed frames and parameter updates") {
  Service svc(test_config(), disk_source(), disk_info());
  svc.start();
  Client c(svc.port());

  const FrameMessage first = c.read_frame();
  CHECK(first.kind == FrameKind::Amplitude);
  CHECK(first.width == 64);
  CHECK(first.height == 64);
  CHECK(first.payload.size() == 64 * 64);
  CHECK(first.z_m == 0.011f);
  CHECK(first.magnification == 1.0f);
  CHECK(first.pitch_m == 2.5e-6f);
  CHECK(wait_for([&] { return svc.client_count() == 1; }));

  SUBCASE("zoom update reaches the frame header") {
    c.send(R"({"type":"set_params","z_m":0.011,"magnification":1.2,"method":"bldsf"})");
    const json ack = c.read_reply();
    CHECK(ack.at("type") == "ack");
    CHECK(ack.at("clamped") == false);
    CHECK(ack.at("params").at("magnification") == 1.2);
    const auto f = c.frame_where([](const FrameMessage& m) { return m.magnification == 1.2f; });
    REQUIRE(f);
    CHECK(f->z_m == 0.011f);
    CHECK(f->pitch_m == static_cast<float>(2.5e-6 / 1.2));
  }

  SUBCASE("out of range magnification is clamped with an advisory") {
    c.send(R"({"type":"set_params","magnification":100})");
    const json ack = c.read_reply();
    CHECK(ack.at("clamped") == true);
    CHECK(ack.at("params").at("magnification") == 4.0);
    CHECK(ack.at("advisory").get<std::string>().find("clamped to 4") != std::string::npos);
    const auto f = c.frame_where([](const FrameMessage& m) { return m.magnification == 4.0f; });
    REQUIRE(f);
    CHECK(f->pitch_m == static_cast<float>(2.5e-6 / 4.0));
  }

  SUBCASE("phase output and method switch") {
    c.send(R"({"type":"set_params","method":"asm","output":"both","z_m":0.012})");
    c.read_reply();
    const auto f = c.frame_where([](const FrameMessage& m) { return m.kind == FrameKind::Phase; });
    REQUIRE(f);
    CHECK(f->magnification == 1.0f);
    CHECK(f->z_m == 0.012f);
  }

  SUBCASE("invalid values are refused without disconnecting") {
    c.send(R"({"type":"set_params","magnification":-1})");
    const json err = c.read_reply();
    CHECK(err.at("type") == "error");
    c.send(R"({"type":"get_info"})");
    const json info = c.read_reply();
    CHECK(info.at("type") == "info");
    CHECK(info.at("wavelength_m") == 650e-9);
    CHECK(info.at("methods") == json::array({"asm", "bldsf"}));
    CHECK(info.at("params").at("magnification") == 1.0);
  }

  SUBCASE("sequence numbers increase") {
    std::uint64_t last = first.sequence;
    for (int i = 0; i < 5; ++i) {
      const auto f = c.read_frame();
      CHECK(f.sequence > last);
      last = f.sequence;
    }
  }
  svc.stop();
}

TEST_CASE("a protocol violation disconnects only the offending client") {
  Service svc(test_config(), disk_source(), disk_info());
  svc.start();
  Client good(svc.port());
  Client bad(svc.port());
  good.read_frame();
  bad.read_frame();
  bad.send("{this is not json");
  const json err = bad.read_reply();
  CHECK(err.at("type") == "error");
  bool closed = false;
  try {
    for (int i = 0; i < 200; ++i) bad.read();
  } catch (const boost::system::system_error& e) {
    closed = e.code() == websocket::error::closed;
    CHECK(bad.ws().reason().code == websocket::close_code::policy_error);
  }
  CHECK(closed);
  CHECK(wait_for([&] { return svc.client_count() == 1; }));
  const auto a = good.read_frame();
  const auto b = good.read_frame();
  CHECK(b.sequence > a.sequence);
  good.send(R"({"type":"get_info"})");
  CHECK(good.read_reply().at("type") == "info");
  svc.stop();
}

TEST_CASE("parameters are last writer wins across clients") {
  Service svc(test_config(), disk_source(), disk_info());
  svc.start();
  Client a(svc.port());
  Client b(svc.port());
  a.send(R"({"type":"set_params","magnification":1.5})");
  a.read_reply();
  b.send(R"({"type":"set_params","magnification":2.0})");
  b.read_reply();
  CHECK(svc.mailbox().latest().magnification == 2.0);
  CHECK(a.frame_where([](const FrameMessage& m) { return m.magnification == 2.0f; }));
  // Both clients see the same stream.
  CHECK(b.frame_where([](const FrameMessage& m) { return m.magnification == 2.0f; }));
  svc.stop();
}

TEST_CASE("pause and resume") {
  Service svc(test_config(), disk_source(), disk_info());
  svc.start();
  Client c(svc.port());
  c.read_frame();
  c.send(R"({"type":"pause"})");
  const json ack = c.read_reply();
  CHECK(ack.at("paused") == true);
  std::this_thread::sleep_for(100ms);
  const auto held = svc.frames_published();
  std::this_thread::sleep_for(200ms);
  CHECK(svc.frames_published() == held);
  c.send(R"({"type":"resume"})");
  CHECK(c.read_reply().at("paused") == false);
  CHECK(wait_for([&] { return svc.frames_published() > held + 2; }));
  svc.stop();
}

TEST_CASE("a busy port fails at startup") {
  Service first(test_config(), disk_source(), disk_info());
  first.start();
  ServiceConfig cfg = test_config();
  cfg.port = first.port();
  Service second(cfg, disk_source(), disk_info());
  CHECK_THROWS_AS(second.start(), std::runtime_error);
  first.stop();
}

TEST_CASE("a newly connected client receives the latest frame") {
  Service svc(test_config(), disk_source(), disk_info());
  svc.start();
  CHECK(wait_for([&] { return svc.frames_published() > 0; }));
  svc.mailbox().pause();
  std::this_thread::sleep_for(100ms);
  Client c(svc.port());
  const auto f = c.read_frame();
  CHECK(f.sequence >= 1);
  svc.stop();
}
