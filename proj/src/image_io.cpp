#include "dhm/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include <png.h>

namespace dhm {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

Pitch require_pitch(std::optional<Pitch> pitch, const char* what) {
  if (!pitch) throw InvalidArgument(std::string(what) + " input needs an explicit pixel pitch");
  detail::check_grid(1, 1, *pitch);
  return *pitch;
}

// libpng reports errors through longjmp; keep the message for the exception.
struct PngErrorState {
  std::jmp_buf jump;
  char message[256] = "png error";
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  std::longjmp(state->jump, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct PngPixels {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int bits = 0;
  bool color = false;
  std::vector<std::uint16_t> data;
};

// Plain C-style body so nothing with a destructor lives across setjmp.
bool decode_png(std::FILE* f, PngPixels* out, PngErrorState* err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  // Assigned after setjmp, so volatile keeps them valid on the error path.
  png_bytep* volatile rows = nullptr;
  png_bytep volatile pixels = nullptr;
  if (info == nullptr || setjmp(err->jump)) {
    std::free(rows);
    std::free(pixels);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  int bits = png_get_bit_depth(png, info);
  if ((color_type & PNG_COLOR_MASK_COLOR) != 0) {
    out->color = true;
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
  }
  if (bits < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    bits = 8;
  }
  if ((color_type & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(png);
  if (bits == 16) png_set_swap(png);
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels = static_cast<png_bytep>(std::malloc(rowbytes * h));
  rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * h));
  if (pixels == nullptr || rows == nullptr) png_error(png, "out of memory");
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = pixels + r * rowbytes;
  png_read_image(png, rows);
  png_read_end(png, nullptr);

  out->width = w;
  out->height = h;
  out->bits = bits;
  out->data.resize(static_cast<std::size_t>(w) * h);
  for (png_uint_32 r = 0; r < h; ++r) {
    for (png_uint_32 c = 0; c < w; ++c) {
      out->data[static_cast<std::size_t>(r) * w + c] =
          bits == 16 ? reinterpret_cast<const std::uint16_t*>(rows[r])[c] : rows[r][c];
    }
  }
  std::free(rows);
  std::free(pixels);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

Image read_png(const std::filesystem::path& path, Pitch pitch) {
  FilePtr f = open_file(path, "rb");
  PngPixels px;
  PngErrorState err;
  if (!decode_png(f.get(), &px, &err)) throw FormatError(path.string() + ": " + err.message);
  if (px.color) throw FormatError(path.string() + ": grayscale required (color PNG)");
  RealGrid<double> values(px.height, px.width);
  for (std::size_t i = 0; i < px.data.size(); ++i) values.data()[i] = px.data[i];
  return Image(std::move(values), pitch);
}

// PGM header tokens may be separated by whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw FormatError("truncated PGM header");
  return tok;
}

long pgm_number(std::istream& in) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size()) throw FormatError("");
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad PGM header value '" + tok + "'");
  }
}

Image read_pgm(const std::filesystem::path& path, Pitch pitch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = pgm_token(in);
  if (magic == "P6" || magic == "P3") throw FormatError(path.string() + ": grayscale required (PPM color)");
  if (magic != "P5") throw FormatError(path.string() + ": only binary PGM (P5) is supported");
  const long w = pgm_number(in);
  const long h = pgm_number(in);
  const long maxval = pgm_number(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw FormatError(path.string() + ": bad PGM header");
  const bool wide = maxval > 255;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<unsigned char> raw(n * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw FormatError(path.string() + ": truncated PGM data");
  RealGrid<double> values(h, w);
  for (std::size_t i = 0; i < n; ++i)
    values.data()[i] = wide ? static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
  return Image(std::move(values), pitch);
}

int max_level(int bits) {
  if (bits != 8 && bits != 16) throw InvalidArgument("image bit depth must be 8 or 16");
  return bits == 8 ? 255 : 65535;
}

std::vector<std::uint16_t> quantize(const Image& image, int bits) {
  const double top = max_level(bits);
  std::vector<std::uint16_t> out(static_cast<std::size_t>(image.size()));
  const auto& v = image.values();
  for (Index i = 0; i < v.size(); ++i) {
    const double x = std::isfinite(v.data()[i]) ? v.data()[i] : 0.0;
    out[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(std::clamp(std::round(x), 0.0, top));
  }
  return out;
}

bool encode_png(std::FILE* f, const std::uint16_t* levels, std::uint32_t w, std::uint32_t h, int bits,
                PngErrorState* err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  png_bytep volatile row = nullptr;
  if (info == nullptr || setjmp(err->jump)) {
    std::free(row);
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, bits, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t bytes_per = bits == 16 ? 2 : 1;
  row = static_cast<png_bytep>(std::malloc(w * bytes_per));
  if (row == nullptr) png_error(png, "out of memory");
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      const std::uint16_t v = levels[static_cast<std::size_t>(r) * w + c];
      if (bits == 16) {
        row[2 * c] = static_cast<png_byte>(v >> 8);  // PNG is big-endian
        row[2 * c + 1] = static_cast<png_byte>(v & 0xff);
      } else {
        row[c] = static_cast<png_byte>(v);
      }
    }
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  std::free(row);
  png_destroy_write_struct(&png, &info);
  return true;
}

// Source intervals covered by each output sample along one axis.
struct Tap {
  Index source;
  double weight;
};

std::vector<std::vector<Tap>> area_taps(Index source, Index target) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(target));
  const double scale = static_cast<double>(source) / static_cast<double>(target);
  for (Index i = 0; i < target; ++i) {
    const double lo = static_cast<double>(i) * scale;
    const double hi = static_cast<double>(i + 1) * scale;
    const Index first = static_cast<Index>(std::floor(lo));
    const Index last = std::min(source - 1, static_cast<Index>(std::ceil(hi)) - 1);
    for (Index s = first; s <= last; ++s) {
      const double overlap = std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) taps[static_cast<std::size_t>(i)].push_back({s, overlap / scale});
    }
  }
  return taps;
}

}  // namespace

ImageFileFormat detect_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<unsigned char, 8> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto n = in.gcount();
  if (n >= 8 && png_sig_cmp(head.data(), 0, 8) == 0) return ImageFileFormat::Png;
  if (n >= 4 && std::equal(head.begin(), head.begin() + 4, kImageMagic)) return ImageFileFormat::Rimg;
  if (n >= 4 && std::equal(head.begin(), head.begin() + 4, kFieldMagic)) return ImageFileFormat::Cfld;
  if (n >= 2 && head[0] == 'P' && (head[1] == '5' || head[1] == '2')) return ImageFileFormat::Pgm;
  if (n >= 2 && head[0] == 'P' && (head[1] == '6' || head[1] == '3'))
    throw FormatError(path.string() + ": grayscale required (PPM color)");
  throw FormatError(path.string() + ": unsupported image format");
}

Image read_grayscale(const std::filesystem::path& path, std::optional<Pitch> pitch) {
  switch (detect_format(path)) {
    case ImageFileFormat::Png:
      return read_png(path, require_pitch(pitch, "PNG"));
    case ImageFileFormat::Pgm:
      return read_pgm(path, require_pitch(pitch, "PGM"));
    case ImageFileFormat::Rimg: {
      Image img = load_image(path);
      if (!pitch) return img;
      detail::check_grid(1, 1, *pitch);
      return Image(img.values(), *pitch);
    }
    case ImageFileFormat::Cfld: {
      const Field f = load_field(path);
      if ((f.samples().imag() != 0.0).any()) throw FormatError(path.string() + ": CFLD input must be real-valued");
      return Image(f.samples().real(), pitch.value_or(f.pitch()));
    }
  }
  throw FormatError("unreachable");
}

void write_png(const std::filesystem::path& path, const Image& image, int bits) {
  const auto levels = quantize(image, bits);
  FilePtr f = open_file(path, "wb");
  PngErrorState err;
  if (!encode_png(f.get(), levels.data(), static_cast<std::uint32_t>(image.width()),
                  static_cast<std::uint32_t>(image.height()), bits, &err))
    throw IoError(path.string() + ": " + err.message);
  if (std::fflush(f.get()) != 0) throw IoError("write failed: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const Image& image, int bits) {
  const auto levels = quantize(image, bits);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << image.width() << " " << image.height() << "\n" << max_level(bits) << "\n";
  for (const auto v : levels) {
    if (bits == 16) out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void write_image_file(const std::filesystem::path& path, const Image& image, int bits) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png")
    write_png(path, image, bits);
  else if (ext == ".pgm")
    write_pgm(path, image, bits);
  else
    save_image(path, image);
}

Image downsample(const Image& image, Index target_width, Index target_height) {
  if (target_width < 1 || target_height < 1) throw InvalidArgument("downsample target must be at least 1x1");
  if (target_width > image.width() || target_height > image.height())
    throw InvalidArgument("downsample target must not exceed the source size");
  const Pitch pitch{image.pitch().x * static_cast<double>(image.width()) / static_cast<double>(target_width),
                    image.pitch().y * static_cast<double>(image.height()) / static_cast<double>(target_height)};
  if (target_width == image.width() && target_height == image.height()) return Image(image.values(), pitch);

  const auto tx = area_taps(image.width(), target_width);
  const auto ty = area_taps(image.height(), target_height);
  const auto& src = image.values();
  RealGrid<double> rows_done(image.height(), target_width);
  for (Index c = 0; c < target_width; ++c) {
    rows_done.col(c).setZero();
    for (const Tap& t : tx[static_cast<std::size_t>(c)]) rows_done.col(c) += t.weight * src.col(t.source);
  }
  RealGrid<double> out = RealGrid<double>::Zero(target_height, target_width);
  for (Index r = 0; r < target_height; ++r)
    for (const Tap& t : ty[static_cast<std::size_t>(r)]) out.row(r) += t.weight * rows_done.row(t.source);
  return Image(std::move(out), pitch);
}

}  // namespace dhm
