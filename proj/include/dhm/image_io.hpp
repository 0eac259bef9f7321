#pragma once

#include <filesystem>
#include <optional>

#include "dhm/dump.hpp"
#include "dhm/field.hpp"

namespace dhm {

enum class ImageFileFormat { Png, Pgm, Rimg, Cfld };

/// Detects the format from the leading bytes, not the extension.
ImageFileFormat detect_format(const std::filesystem::path& path);

/// Loads a grayscale intensity image. PNG and PGM (8 or 16 bit) keep their
/// integer levels as values (255 -> 255.0). RIMG dumps carry their own pitch;
/// CFLD dumps must be real-valued. A given `pitch` overrides the file's;
/// PNG and PGM need one.
Image read_grayscale(const std::filesystem::path& path, std::optional<Pitch> pitch = std::nullopt);

/// Writes values rounded and clamped to [0, 2^bits - 1]; bits is 8 or 16.
void write_png(const std::filesystem::path& path, const Image& image, int bits = 8);
void write_pgm(const std::filesystem::path& path, const Image& image, int bits = 8);

/// Picks the writer from the extension: .png, .pgm, anything else RIMG.
void write_image_file(const std::filesystem::path& path, const Image& image, int bits = 8);

/// Area-weighted resampling to a smaller (or equal) grid. Each output pixel
/// averages the source area it covers; pitch grows by source / target.
Image downsample(const Image& image, Index target_width, Index target_height);

}  // namespace dhm
