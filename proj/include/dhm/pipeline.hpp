#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>

#include "dhm/diffraction.hpp"
#include "dhm/ingest.hpp"
#include "dhm/plan_cache.hpp"
#include "dhm/sim.hpp"

namespace dhm {

enum class OutputKind { Amplitude, Phase, Both };

std::string_view to_string(OutputKind kind);
OutputKind output_kind_from_string(std::string_view name);

inline constexpr double kMinMagnification = 0.25;
inline constexpr double kMaxMagnification = 4.0;
inline constexpr double kMaxAbsDistance = 0.1;

/// The live reconstruction state. `z` is the signed propagation distance
/// applied to the hologram, so the default back-propagates by 11 mm. User
/// facing focus distances are positive: z = -focus_distance.
struct ReconstructionParams {
  double z = -0.011;
  double magnification = 1.0;
  Method method = Method::BlDsf;
  OutputKind output = OutputKind::Amplitude;

  double focus_distance() const { return -z; }
  bool operator==(const ReconstructionParams&) const = default;
};

struct ClampResult {
  ReconstructionParams params;
  bool clamped = false;
  std::string advisory;  // empty unless clamped
};

/// Validates and clamps M to [0.25, 4] and z to [-0.1, 0.1]. Non-finite
/// values, M <= 0 and z = 0 with BL-DSF are rejected with InvalidArgument.
ClampResult clamp_params(const ReconstructionParams& params);

using Clock = std::chrono::steady_clock;

/// One reconstructed, display-mapped frame (8-bit levels stored as doubles).
struct TimedFrame {
  std::optional<Image> amplitude;
  std::optional<Image> phase;
  ReconstructionParams params;  // effective: ASM records M = 1
  Pitch output_pitch;
  std::uint64_t sequence = 0;
  Clock::time_point capture_time{};
  Clock::time_point publish_time{};
  double fps = 0.0;
};

/// Raw (not display-mapped) reconstruction products.
struct Reconstruction {
  Field field;
  ReconstructionParams params;
};

/// Holds the plan cache and scratch memory that make repeated frames cheap.
class Reconstructor {
 public:
  explicit Reconstructor(std::size_t cache_capacity = PlanCache<double>::kDefaultCapacity)
      : cache_(cache_capacity) {}

  /// Propagated complex field for `params` (not clamped here).
  Reconstruction propagate(const HologramFrame& frame, const ReconstructionParams& params);

  /// Full frame: propagate, extract amplitude and/or phase, display-map.
  /// Sequence and timestamps are left for the caller.
  TimedFrame reconstruct(const HologramFrame& frame, const ReconstructionParams& params);

  PlanCache<double>& cache() noexcept { return cache_; }

 private:
  PlanCache<double> cache_;
  Workspace<double> workspace_;
};

/// One-shot form of Reconstructor::reconstruct.
TimedFrame reconstruct_frame(const HologramFrame& frame, const ReconstructionParams& params);

/// Latest-wins parameter inbox plus pause state, shared between the control
/// side and the reconstruction loop.
class ParamMailbox {
 public:
  explicit ParamMailbox(ReconstructionParams initial = {}) : current_(initial) {}

  /// Replaces any pending update.
  void post(const ReconstructionParams& params);
  /// Applies a partial update on top of the most recent parameters and
  /// posts the clamped result.
  ClampResult post_update(const std::function<void(ReconstructionParams&)>& edit);

  /// Pending update, if any, consumed.
  std::optional<ReconstructionParams> take();
  /// Most recently posted (or initial) parameters.
  ReconstructionParams latest() const;

  void pause();
  void resume();
  bool paused() const;
  /// Blocks while paused. Returns false if stopped while waiting.
  bool wait_while_paused(std::stop_token stop);

 private:
  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  ReconstructionParams current_;
  std::optional<ReconstructionParams> pending_;
  bool paused_ = false;
};

/// Single-element hand-off that overwrites instead of queueing. Tracks how
/// many values were dropped and the largest depth ever observed.
template <typename T>
class LatestSlot {
 public:
  void put(T value) {
    {
      std::scoped_lock lock(mutex_);
      if (value_) ++dropped_;
      value_ = std::move(value);
      max_depth_ = std::max<std::size_t>(max_depth_, 1);
    }
    cv_.notify_all();
  }

  std::optional<T> try_take() {
    std::scoped_lock lock(mutex_);
    auto v = std::move(value_);
    value_.reset();
    return v;
  }

  std::optional<T> wait_take(std::stop_token stop) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, stop, [&] { return value_.has_value(); });
    auto v = std::move(value_);
    value_.reset();
    return v;
  }

  std::size_t depth() const {
    std::scoped_lock lock(mutex_);
    return value_ ? 1 : 0;
  }
  std::uint64_t dropped() const {
    std::scoped_lock lock(mutex_);
    return dropped_;
  }
  std::size_t max_depth() const {
    std::scoped_lock lock(mutex_);
    return max_depth_;
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  std::optional<T> value_;
  std::uint64_t dropped_ = 0;
  std::size_t max_depth_ = 0;
};

/// Frame rate over the most recent `window` timestamps:
/// (n - 1) / (t_last - t_first), or 0 with fewer than two frames.
class FpsMeter {
 public:
  explicit FpsMeter(std::size_t window = 10);
  double record(Clock::time_point t);
  double fps() const;
  std::size_t window() const noexcept { return window_; }

 private:
  std::size_t window_;
  std::deque<Clock::time_point> stamps_;
};

enum class LoopEventKind { Error, SourceExhausted, Stopped };

struct LoopEvent {
  LoopEventKind kind;
  std::string message;
};

/// Receives finished frames and loop events. publish must not block for
/// long: the loop calls it on the reconstruction thread.
class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void publish(const TimedFrame& frame) = 0;
  virtual void on_event(const LoopEvent&) {}
};

struct LoopOptions {
  std::size_t fps_window = 10;
  double max_fps = 0.0;  // 0 means unthrottled
  std::function<Clock::time_point()> clock;  // defaults to Clock::now
  std::size_t cache_capacity = PlanCache<double>::kDefaultCapacity;
};

struct LoopStats {
  std::uint64_t published = 0;
  std::uint64_t errors = 0;
};

/// Pull, reconstruct, publish until the source ends or a stop is requested.
/// A stop lets the frame in progress finish. Reconstruction errors are
/// reported as events and the loop continues with the next frame.
LoopStats run_loop(FrameSource& source, ParamMailbox& inbox, FrameSink& sink, std::stop_token stop,
                   const LoopOptions& options = {});

}  // namespace dhm
