#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dhm/config.hpp"
#include "dhm/image_io.hpp"
#include "dhm/sim.hpp"

namespace dhm {

enum class SourceKind { SingleFile, DirectorySequence, Synthetic, RawStream };

std::string_view to_string(SourceKind kind);
SourceKind source_kind_from_string(std::string_view name);

/// Everything needed to open a frame source.
struct SourceConfig {
  SourceKind kind = SourceKind::Synthetic;
  std::filesystem::path path;  // file, directory, or raw stream ("-" is stdin)
  std::optional<Pitch> pitch;  // native pitch; required for PNG/PGM inputs
  OpticalParams optics;
  Index target_width = 0;  // 0 keeps the native size
  Index target_height = 0;
  bool loop = false;
  std::uint64_t max_frames = 0;  // 0 means unlimited

  // Synthetic sources only.
  ObjectSpec object;
  double object_distance = 0.011;
  Index width = 256;
  Index height = 256;
  NoiseOptions noise;

  void validate() const;
  bool downsamples() const { return target_width > 0 || target_height > 0; }
};

/// Reads `source.*`, `optics.wavelength` and `object.*` keys.
SourceConfig source_config_from(const KeyValueConfig& cfg);

/// Pull-based frame producer. Owned by a single consumer.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next frame, or nullopt once the source is exhausted.
  virtual std::optional<HologramFrame> next_frame() = 0;
};

std::unique_ptr<FrameSource> make_source(const SourceConfig& config);

/// Files of a directory sequence, sorted by file name. Only extensions
/// .png .pgm .rimg .cfld are considered.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

/// Serves a fixed list of frames in order (test and replay helper).
class VectorSource final : public FrameSource {
 public:
  explicit VectorSource(std::vector<HologramFrame> frames, bool loop = false)
      : frames_(std::move(frames)), loop_(loop) {}
  std::optional<HologramFrame> next_frame() override;

 private:
  std::vector<HologramFrame> frames_;
  bool loop_;
  std::size_t next_ = 0;
};

/// Returns `first` once, then defers to the wrapped source.
class PrefetchedSource final : public FrameSource {
 public:
  PrefetchedSource(HologramFrame first, std::unique_ptr<FrameSource> rest)
      : first_(std::move(first)), rest_(std::move(rest)) {}
  std::optional<HologramFrame> next_frame() override;

 private:
  std::optional<HologramFrame> first_;
  std::unique_ptr<FrameSource> rest_;
};

/// Drains a producer on its own thread and keeps only the newest frame, so a
/// slow consumer always gets the latest one. Stale frames are counted and
/// dropped. Errors raised by the producer are rethrown to the consumer.
class LatestFrameSource final : public FrameSource {
 public:
  explicit LatestFrameSource(std::unique_ptr<FrameSource> producer);
  ~LatestFrameSource() override;
  LatestFrameSource(const LatestFrameSource&) = delete;
  LatestFrameSource& operator=(const LatestFrameSource&) = delete;

  std::optional<HologramFrame> next_frame() override;
  std::uint64_t dropped() const;

 private:
  void run(std::stop_token stop);

  std::unique_ptr<FrameSource> producer_;
  mutable std::mutex mutex_;
  std::condition_variable_any ready_;
  std::optional<HologramFrame> slot_;
  std::exception_ptr error_;
  bool done_ = false;
  std::uint64_t dropped_ = 0;
  std::jthread thread_;
};

}  // namespace dhm
