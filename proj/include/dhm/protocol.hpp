#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dhm/pipeline.hpp"

namespace dhm {

/// A message that does not follow the wire schema.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Absent fields keep their current value. z_m is the positive focus
/// distance shown to the user.
struct SetParams {
  std::optional<double> z_m;
  std::optional<double> magnification;
  std::optional<Method> method;
  std::optional<OutputKind> output;
  bool operator==(const SetParams&) const = default;
};
struct GetInfo {
  bool operator==(const GetInfo&) const = default;
};
struct Pause {
  bool operator==(const Pause&) const = default;
};
struct Resume {
  bool operator==(const Resume&) const = default;
};

using ControlMessage = std::variant<SetParams, GetInfo, Pause, Resume>;

std::string encode_control(const ControlMessage& msg);
ControlMessage decode_control(std::string_view text);

/// Applies a set_params on top of `params`.
void apply_set_params(const SetParams& msg, ReconstructionParams& params);

enum class FrameKind : std::uint8_t { Amplitude = 0, Phase = 1 };

// Binary frame: "HOLO", u8 kind, u32 width, u32 height, f32 pitch_m,
// f32 z_m, f32 magnification, f32 fps, u64 sequence, width*height bytes.
// All integers and floats little-endian.
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 4 + 4 + 4 * 4 + 8;

struct FrameMessage {
  FrameKind kind = FrameKind::Amplitude;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  float pitch_m = 0.0f;
  float z_m = 0.0f;
  float magnification = 1.0f;
  float fps = 0.0f;
  std::uint64_t sequence = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const FrameMessage&) const = default;
};

std::vector<std::uint8_t> encode_frame(const FrameMessage& msg);
FrameMessage decode_frame(std::span<const std::uint8_t> bytes);

/// One message per display image the frame carries (amplitude first).
std::vector<FrameMessage> make_frame_messages(const TimedFrame& frame);

/// Static description of the running service.
struct ServiceInfo {
  Index width = 0;
  Index height = 0;
  Pitch pitch;
  double wavelength = 0.0;
  ReconstructionParams defaults;
};

std::string encode_info(const ServiceInfo& info, const ReconstructionParams& current);
std::string encode_ack(std::string_view request, const ClampResult& result);
std::string encode_ack(std::string_view request, const ReconstructionParams& params, bool paused);
std::string encode_error(std::string_view message);

}  // namespace dhm
