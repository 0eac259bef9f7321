#include "dhm/dump.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace dhm {
namespace {

static_assert(std::endian::native == std::endian::little, "dump I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) throw FormatError("truncated dump header");
  return v;
}

void put_header(std::ostream& out, const char* magic, Index width, Index height, Pitch pitch) {
  out.write(magic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(height));
  put<double>(out, pitch.x);
  put<double>(out, pitch.y);
}

struct Header {
  Index width;
  Index height;
  Pitch pitch;
};

Header get_header_after_magic(std::istream& in) {
  const auto w = get<std::uint32_t>(in);
  const auto h = get<std::uint32_t>(in);
  const auto px = get<double>(in);
  const auto py = get<double>(in);
  if (w == 0 || h == 0) throw FormatError("dump has zero dimensions");
  if (!(px > 0.0) || !(py > 0.0) || !std::isfinite(px) || !std::isfinite(py))
    throw FormatError("dump has an invalid pitch");
  return {static_cast<Index>(w), static_cast<Index>(h), {px, py}};
}

void expect_magic(std::istream& in, const char* magic) {
  std::array<char, 4> m{};
  in.read(m.data(), 4);
  if (in.gcount() != 4) throw FormatError("truncated dump header");
  if (std::memcmp(m.data(), magic, 4) != 0)
    throw FormatError(std::string("bad dump magic, expected ") + std::string(magic, 4));
}

void read_payload(std::istream& in, char* dst, std::size_t bytes) {
  in.read(dst, static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) throw FormatError("truncated dump payload");
}

Image read_image_body(std::istream& in) {
  const Header h = get_header_after_magic(in);
  RealGrid<double> values(h.height, h.width);
  read_payload(in, reinterpret_cast<char*>(values.data()), static_cast<std::size_t>(values.size()) * sizeof(double));
  if (!values.allFinite()) throw FormatError("dump contains non-finite samples");
  return Image(std::move(values), h.pitch);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ostream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void write_field(std::ostream& out, const Field& field) {
  put_header(out, kFieldMagic, field.width(), field.height(), field.pitch());
  out.write(reinterpret_cast<const char*>(field.samples().data()),
            static_cast<std::streamsize>(field.size() * static_cast<Index>(sizeof(std::complex<double>))));
}

void write_image(std::ostream& out, const Image& image) {
  put_header(out, kImageMagic, image.width(), image.height(), image.pitch());
  out.write(reinterpret_cast<const char*>(image.values().data()),
            static_cast<std::streamsize>(image.size() * static_cast<Index>(sizeof(double))));
}

Field read_field(std::istream& in) {
  expect_magic(in, kFieldMagic);
  const Header h = get_header_after_magic(in);
  ComplexGrid<double> samples(h.height, h.width);
  read_payload(in, reinterpret_cast<char*>(samples.data()),
               static_cast<std::size_t>(samples.size()) * sizeof(std::complex<double>));
  if (!samples.abs().allFinite()) throw FormatError("dump contains non-finite samples");
  return Field(std::move(samples), h.pitch);
}

Image read_image(std::istream& in) {
  expect_magic(in, kImageMagic);
  return read_image_body(in);
}

std::optional<Image> read_image_record(std::istream& in) {
  std::array<char, 4> m{};
  in.read(m.data(), 4);
  if (in.gcount() == 0) return std::nullopt;
  if (in.gcount() != 4) throw FormatError("truncated record header");
  if (std::memcmp(m.data(), kImageMagic, 4) != 0) throw FormatError("stream record is not RIMG");
  return read_image_body(in);
}

void save_field(const std::filesystem::path& path, const Field& field) {
  auto out = open_out(path);
  write_field(out, field);
  finish(out, path);
}

void save_image(const std::filesystem::path& path, const Image& image) {
  auto out = open_out(path);
  write_image(out, image);
  finish(out, path);
}

Field load_field(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_field(in);
}

Image load_image(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_image(in);
}

}  // namespace dhm
