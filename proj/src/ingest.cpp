#include "dhm/ingest.hpp"

#include <algorithm>
#include <iostream>

namespace dhm {
namespace {

HologramFrame prepare(Image image, const SourceConfig& cfg, std::optional<double> distance) {
  if (cfg.downsamples()) {
    const Index tw = cfg.target_width > 0 ? cfg.target_width : image.width();
    const Index th = cfg.target_height > 0 ? cfg.target_height : image.height();
    image = downsample(image, tw, th);
  }
  return {std::move(image), distance, cfg.optics};
}

class FrameLimiter : public FrameSource {
 public:
  FrameLimiter(std::unique_ptr<FrameSource> inner, std::uint64_t limit) : inner_(std::move(inner)), limit_(limit) {}
  std::optional<HologramFrame> next_frame() override {
    if (served_ >= limit_) return std::nullopt;
    auto f = inner_->next_frame();
    if (f) ++served_;
    return f;
  }

 private:
  std::unique_ptr<FrameSource> inner_;
  std::uint64_t limit_;
  std::uint64_t served_ = 0;
};

class SingleFileSource : public FrameSource {
 public:
  explicit SingleFileSource(SourceConfig cfg) : cfg_(std::move(cfg)) {}
  std::optional<HologramFrame> next_frame() override {
    if (served_ && !cfg_.loop) return std::nullopt;
    if (!cached_) cached_ = prepare(read_grayscale(cfg_.path, cfg_.pitch), cfg_, std::nullopt);
    served_ = true;
    return cached_;
  }

 private:
  SourceConfig cfg_;
  std::optional<HologramFrame> cached_;
  bool served_ = false;
};

class DirectorySource : public FrameSource {
 public:
  explicit DirectorySource(SourceConfig cfg) : cfg_(std::move(cfg)), files_(list_frame_files(cfg_.path)) {
    if (files_.empty()) throw IoError("no frame files in " + cfg_.path.string());
  }
  std::optional<HologramFrame> next_frame() override {
    if (next_ >= files_.size()) {
      if (!cfg_.loop) return std::nullopt;
      next_ = 0;
    }
    return prepare(read_grayscale(files_[next_++], cfg_.pitch), cfg_, std::nullopt);
  }

 private:
  SourceConfig cfg_;
  std::vector<std::filesystem::path> files_;
  std::size_t next_ = 0;
};

class SyntheticSource : public FrameSource {
 public:
  explicit SyntheticSource(SourceConfig cfg) : cfg_(std::move(cfg)) {}
  std::optional<HologramFrame> next_frame() override {
    const GridSpec grid{cfg_.width, cfg_.height, cfg_.pitch.value_or(Pitch::square(2.5e-6))};
    if (cfg_.noise.sigma > 0.0) {
      NoiseOptions noise = cfg_.noise;
      noise.seed += index_++;
      auto f = generate_hologram(cfg_.object, cfg_.object_distance, grid, cfg_.optics, noise);
      return prepare(std::move(f.image), cfg_, cfg_.object_distance);
    }
    if (!cached_) {
      auto f = generate_hologram(cfg_.object, cfg_.object_distance, grid, cfg_.optics);
      cached_ = prepare(std::move(f.image), cfg_, cfg_.object_distance);
    }
    return cached_;
  }

 private:
  SourceConfig cfg_;
  std::optional<HologramFrame> cached_;
  std::uint64_t index_ = 0;
};

class RawStreamSource : public FrameSource {
 public:
  explicit RawStreamSource(SourceConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.path != "-") {
      file_.open(cfg_.path, std::ios::binary);
      if (!file_) throw IoError("cannot open " + cfg_.path.string());
    }
  }
  std::optional<HologramFrame> next_frame() override {
    std::istream& in = cfg_.path == "-" ? std::cin : static_cast<std::istream&>(file_);
    auto img = read_image_record(in);
    if (!img) return std::nullopt;
    if (cfg_.pitch) img = Image(img->values(), *cfg_.pitch);
    return prepare(std::move(*img), cfg_, std::nullopt);
  }

 private:
  SourceConfig cfg_;
  std::ifstream file_;
};

}  // namespace

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::SingleFile:
      return "single_file";
    case SourceKind::DirectorySequence:
      return "directory_sequence";
    case SourceKind::Synthetic:
      return "synthetic";
    case SourceKind::RawStream:
      return "raw_stream";
  }
  return "unknown";
}

SourceKind source_kind_from_string(std::string_view name) {
  if (name == "single_file") return SourceKind::SingleFile;
  if (name == "directory_sequence") return SourceKind::DirectorySequence;
  if (name == "synthetic") return SourceKind::Synthetic;
  if (name == "raw_stream") return SourceKind::RawStream;
  throw InvalidArgument("unknown source kind '" + std::string(name) + "'");
}

void SourceConfig::validate() const {
  optics.validate();
  if (pitch) detail::check_grid(1, 1, *pitch);
  if (target_width < 0 || target_height < 0) throw InvalidArgument("downsample target must be non-negative");
  if (kind == SourceKind::Synthetic) {
    GridSpec{width, height, pitch.value_or(Pitch::square(2.5e-6))}.validate();
    if (!(object_distance > 0.0)) throw InvalidArgument("synthetic object distance must be positive");
    object.validate();
    if (target_width > width || target_height > height)
      throw InvalidArgument("downsample target must not exceed the native size");
  } else if (path.empty()) {
    throw InvalidArgument("source path is required for " + std::string(to_string(kind)));
  }
}

SourceConfig source_config_from(const KeyValueConfig& cfg) {
  SourceConfig s;
  s.kind = source_kind_from_string(cfg.get_string("source.kind", "synthetic"));
  s.path = cfg.get_string("source.path", "");
  if (cfg.contains("source.pitch")) s.pitch = Pitch::square(cfg.get_double("source.pitch", 0.0));
  s.optics.wavelength = cfg.get_double("optics.wavelength", s.optics.wavelength);
  s.target_width = cfg.get_int("source.target_width", 0);
  s.target_height = cfg.get_int("source.target_height", 0);
  s.loop = cfg.get_bool("source.loop", s.kind == SourceKind::SingleFile || s.kind == SourceKind::DirectorySequence);
  s.max_frames = static_cast<std::uint64_t>(cfg.get_int("source.max_frames", 0));
  s.object = object_spec_from_config(cfg);
  s.object_distance = cfg.get_double("source.object_distance", s.object_distance);
  s.width = cfg.get_int("source.width", s.width);
  s.height = cfg.get_int("source.height", s.height);
  s.noise.sigma = cfg.get_double("source.noise_sigma", 0.0);
  s.noise.seed = static_cast<std::uint64_t>(cfg.get_int("source.noise_seed", 0));
  s.validate();
  return s;
}

std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".pgm" || ext == ".rimg" || ext == ".cfld") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

std::unique_ptr<FrameSource> make_source(const SourceConfig& config) {
  config.validate();
  std::unique_ptr<FrameSource> src;
  switch (config.kind) {
    case SourceKind::SingleFile:
      src = std::make_unique<SingleFileSource>(config);
      break;
    case SourceKind::DirectorySequence:
      src = std::make_unique<DirectorySource>(config);
      break;
    case SourceKind::Synthetic:
      src = std::make_unique<SyntheticSource>(config);
      break;
    case SourceKind::RawStream:
      src = std::make_unique<RawStreamSource>(config);
      break;
  }
  if (config.max_frames > 0) src = std::make_unique<FrameLimiter>(std::move(src), config.max_frames);
  return src;
}

std::optional<HologramFrame> VectorSource::next_frame() {
  if (frames_.empty()) return std::nullopt;
  if (next_ >= frames_.size()) {
    if (!loop_) return std::nullopt;
    next_ = 0;
  }
  return frames_[next_++];
}

std::optional<HologramFrame> PrefetchedSource::next_frame() {
  if (first_) {
    auto f = std::move(first_);
    first_.reset();
    return f;
  }
  return rest_ ? rest_->next_frame() : std::nullopt;
}

LatestFrameSource::LatestFrameSource(std::unique_ptr<FrameSource> producer) : producer_(std::move(producer)) {
  thread_ = std::jthread([this](std::stop_token st) { run(st); });
}

LatestFrameSource::~LatestFrameSource() {
  thread_.request_stop();
  ready_.notify_all();
}

void LatestFrameSource::run(std::stop_token stop) {
  try {
    while (!stop.stop_requested()) {
      auto frame = producer_->next_frame();
      std::scoped_lock lock(mutex_);
      if (!frame) break;
      if (slot_) ++dropped_;
      slot_ = std::move(frame);
      ready_.notify_all();
    }
  } catch (...) {
    std::scoped_lock lock(mutex_);
    error_ = std::current_exception();
  }
  std::scoped_lock lock(mutex_);
  done_ = true;
  ready_.notify_all();
}

std::optional<HologramFrame> LatestFrameSource::next_frame() {
  std::unique_lock lock(mutex_);
  ready_.wait(lock, [&] { return slot_.has_value() || done_; });
  if (slot_) {
    auto f = std::move(slot_);
    slot_.reset();
    return f;
  }
  if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
  return std::nullopt;
}

std::uint64_t LatestFrameSource::dropped() const {
  std::scoped_lock lock(mutex_);
  return dropped_;
}

}  // namespace dhm
