#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "dhm/field.hpp"

namespace dhm {

/// Malformed, truncated or unsupported file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian raw dumps:
//   magic (4 bytes), u32 width, u32 height, f64 pitch_x, f64 pitch_y, samples
// "CFLD" stores (re, im) f64 pairs, "RIMG" one f64 per pixel, row-major.
inline constexpr char kFieldMagic[4] = {'C', 'F', 'L', 'D'};
inline constexpr char kImageMagic[4] = {'R', 'I', 'M', 'G'};
inline constexpr std::size_t kDumpHeaderBytes = 4 + 4 + 4 + 8 + 8;

void write_field(std::ostream& out, const Field& field);
void write_image(std::ostream& out, const Image& image);
Field read_field(std::istream& in);
Image read_image(std::istream& in);

/// Next "RIMG" record of a stream, or nullopt at a clean end of stream.
/// A partial record throws FormatError.
std::optional<Image> read_image_record(std::istream& in);

void save_field(const std::filesystem::path& path, const Field& field);
void save_image(const std::filesystem::path& path, const Image& image);
Field load_field(const std::filesystem::path& path);
Image load_image(const std::filesystem::path& path);

}  // namespace dhm
