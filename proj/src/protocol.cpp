#include "dhm/protocol.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "json.hpp"

namespace dhm {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "frame encoding assumes a little-endian host");

double number_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ProtocolError(std::string("'") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ProtocolError(std::string("'") + key + "' must be finite");
  return d;
}

std::string string_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ProtocolError(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

json params_json(const ReconstructionParams& p) {
  return {{"z_m", p.focus_distance()},
          {"magnification", p.magnification},
          {"method", std::string(to_string(p.method))},
          {"output", std::string(to_string(p.output))}};
}

template <typename T>
void append(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t>& in) {
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in = in.subspan(sizeof(T));
  return v;
}

std::vector<std::uint8_t> to_bytes(const Image& display) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(display.size()));
  const auto& v = display.values();
  for (Index i = 0; i < v.size(); ++i)
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::clamp(v.data()[i], 0.0, 255.0));
  return out;
}

}  // namespace

std::string encode_control(const ControlMessage& msg) {
  json j;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SetParams>) {
          j["type"] = "set_params";
          if (m.z_m) j["z_m"] = *m.z_m;
          if (m.magnification) j["magnification"] = *m.magnification;
          if (m.method) j["method"] = std::string(to_string(*m.method));
          if (m.output) j["output"] = std::string(to_string(*m.output));
        } else if constexpr (std::is_same_v<T, GetInfo>) {
          j["type"] = "get_info";
        } else if constexpr (std::is_same_v<T, Pause>) {
          j["type"] = "pause";
        } else {
          j["type"] = "resume";
        }
      },
      msg);
  return j.dump();
}

ControlMessage decode_control(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ProtocolError("malformed JSON");
  if (!j.is_object()) throw ProtocolError("control message must be a JSON object");
  if (!j.contains("type")) throw ProtocolError("control message has no 'type'");
  const std::string type = string_field(j, "type");
  try {
    if (type == "set_params") {
      SetParams m;
      if (j.contains("z_m")) m.z_m = number_field(j, "z_m");
      else if (j.contains("z")) m.z_m = number_field(j, "z");  // shorthand for z_m
      if (j.contains("magnification")) m.magnification = number_field(j, "magnification");
      if (j.contains("method")) m.method = method_from_string(string_field(j, "method"));
      if (j.contains("output")) m.output = output_kind_from_string(string_field(j, "output"));
      return m;
    }
  } catch (const InvalidArgument& e) {
    throw ProtocolError(e.what());
  }
  if (type == "get_info") return GetInfo{};
  if (type == "pause") return Pause{};
  if (type == "resume") return Resume{};
  throw ProtocolError("unknown message type '" + type + "'");
}

void apply_set_params(const SetParams& msg, ReconstructionParams& params) {
  if (msg.z_m) params.z = -*msg.z_m;
  if (msg.magnification) params.magnification = *msg.magnification;
  if (msg.method) params.method = *msg.method;
  if (msg.output) params.output = *msg.output;
}

std::vector<std::uint8_t> encode_frame(const FrameMessage& msg) {
  if (msg.payload.size() != static_cast<std::size_t>(msg.width) * msg.height)
    throw ProtocolError("frame payload length does not match its dimensions");
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + msg.payload.size());
  out.insert(out.end(), {'H', 'O', 'L', 'O'});
  append<std::uint8_t>(out, static_cast<std::uint8_t>(msg.kind));
  append(out, msg.width);
  append(out, msg.height);
  append(out, msg.pitch_m);
  append(out, msg.z_m);
  append(out, msg.magnification);
  append(out, msg.fps);
  append(out, msg.sequence);
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

FrameMessage decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw ProtocolError("frame shorter than its header");
  if (std::memcmp(bytes.data(), "HOLO", 4) != 0) throw ProtocolError("bad frame magic");
  bytes = bytes.subspan(4);
  FrameMessage m;
  const auto kind = take<std::uint8_t>(bytes);
  if (kind > 1) throw ProtocolError("unknown frame kind");
  m.kind = static_cast<FrameKind>(kind);
  m.width = take<std::uint32_t>(bytes);
  m.height = take<std::uint32_t>(bytes);
  m.pitch_m = take<float>(bytes);
  m.z_m = take<float>(bytes);
  m.magnification = take<float>(bytes);
  m.fps = take<float>(bytes);
  m.sequence = take<std::uint64_t>(bytes);
  if (bytes.size() != static_cast<std::size_t>(m.width) * m.height)
    throw ProtocolError("frame payload length does not match its dimensions");
  m.payload.assign(bytes.begin(), bytes.end());
  return m;
}

std::vector<FrameMessage> make_frame_messages(const TimedFrame& frame) {
  std::vector<FrameMessage> out;
  auto one = [&](const Image& img, FrameKind kind) {
    FrameMessage m;
    m.kind = kind;
    m.width = static_cast<std::uint32_t>(img.width());
    m.height = static_cast<std::uint32_t>(img.height());
    m.pitch_m = static_cast<float>(frame.output_pitch.x);
    m.z_m = static_cast<float>(frame.params.focus_distance());
    m.magnification = static_cast<float>(frame.params.magnification);
    m.fps = static_cast<float>(frame.fps);
    m.sequence = frame.sequence;
    m.payload = to_bytes(img);
    out.push_back(std::move(m));
  };
  if (frame.amplitude) one(*frame.amplitude, FrameKind::Amplitude);
  if (frame.phase) one(*frame.phase, FrameKind::Phase);
  return out;
}

std::string encode_info(const ServiceInfo& info, const ReconstructionParams& current) {
  json j = {{"type", "info"},
            {"width", info.width},
            {"height", info.height},
            {"pitch_m", info.pitch.x},
            {"pitch_y_m", info.pitch.y},
            {"wavelength_m", info.wavelength},
            {"methods", {"asm", "bldsf"}},
            {"outputs", {"amplitude", "phase", "both"}},
            {"z_range_m", {0.0, kMaxAbsDistance}},
            {"magnification_range", {kMinMagnification, kMaxMagnification}},
            {"defaults", params_json(info.defaults)},
            {"params", params_json(current)}};
  return j.dump();
}

std::string encode_ack(std::string_view request, const ClampResult& result) {
  json j = {{"type", "ack"},
            {"request", std::string(request)},
            {"params", params_json(result.params)},
            {"clamped", result.clamped}};
  if (result.clamped) j["advisory"] = result.advisory;
  return j.dump();
}

std::string encode_ack(std::string_view request, const ReconstructionParams& params, bool paused) {
  json j = {{"type", "ack"}, {"request", std::string(request)}, {"params", params_json(params)}, {"paused", paused}};
  return j.dump();
}

std::string encode_error(std::string_view message) {
  return json{{"type", "error"}, {"message", std::string(message)}}.dump();
}

}  // namespace dhm
