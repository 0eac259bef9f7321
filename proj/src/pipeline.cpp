#include "dhm/pipeline.hpp"

#include <cmath>
#include <sstream>
#include <thread>

namespace dhm {

std::string_view to_string(OutputKind kind) {
  switch (kind) {
    case OutputKind::Amplitude:
      return "amplitude";
    case OutputKind::Phase:
      return "phase";
    case OutputKind::Both:
      return "both";
  }
  return "unknown";
}

OutputKind output_kind_from_string(std::string_view name) {
  if (name == "amplitude") return OutputKind::Amplitude;
  if (name == "phase") return OutputKind::Phase;
  if (name == "both") return OutputKind::Both;
  throw InvalidArgument("unknown output '" + std::string(name) + "'");
}

ClampResult clamp_params(const ReconstructionParams& params) {
  if (!std::isfinite(params.z)) throw InvalidArgument("focus distance must be finite");
  if (!std::isfinite(params.magnification) || !(params.magnification > 0.0))
    throw InvalidArgument("magnification must be positive and finite");
  ClampResult out{params, false, {}};
  std::ostringstream note;
  const double m = std::clamp(params.magnification, kMinMagnification, kMaxMagnification);
  if (m != params.magnification) {
    note << "magnification " << params.magnification << " clamped to " << m;
    out.params.magnification = m;
  }
  const double z = std::clamp(params.z, -kMaxAbsDistance, kMaxAbsDistance);
  if (z != params.z) {
    if (note.tellp() > 0) note << "; ";
    note << "distance " << std::abs(params.z) << " m clamped to " << std::abs(z) << " m";
    out.params.z = z;
  }
  if (out.params.method == Method::BlDsf && out.params.z == 0.0)
    throw InvalidArgument("BL-DSF needs a nonzero focus distance");
  out.advisory = note.str();
  out.clamped = !out.advisory.empty();
  return out;
}

Reconstruction Reconstructor::propagate(const HologramFrame& frame, const ReconstructionParams& params) {
  const Field input = hologram_to_field(frame);
  const GridSpec grid = GridSpec::of(input);
  const auto plan = cache_.get_or_create(params.method, grid, params.z, params.magnification, frame.optics);
  ReconstructionParams effective = params;
  if (params.method == Method::Asm) effective.magnification = 1.0;
  return {plan.apply(input, workspace_), effective};
}

TimedFrame Reconstructor::reconstruct(const HologramFrame& frame, const ReconstructionParams& params) {
  Reconstruction r = propagate(frame, params);
  TimedFrame out;
  out.params = r.params;
  out.output_pitch = r.field.pitch();
  if (params.output != OutputKind::Phase) out.amplitude = to_display(amplitude(r.field), DisplayMode::Amplitude);
  if (params.output != OutputKind::Amplitude) out.phase = to_display(phase(r.field), DisplayMode::Phase);
  return out;
}

TimedFrame reconstruct_frame(const HologramFrame& frame, const ReconstructionParams& params) {
  Reconstructor r(1);
  return r.reconstruct(frame, params);
}

void ParamMailbox::post(const ReconstructionParams& params) {
  std::scoped_lock lock(mutex_);
  current_ = params;
  pending_ = params;
}

ClampResult ParamMailbox::post_update(const std::function<void(ReconstructionParams&)>& edit) {
  std::scoped_lock lock(mutex_);
  ReconstructionParams next = current_;
  edit(next);
  ClampResult r = clamp_params(next);
  current_ = r.params;
  pending_ = r.params;
  return r;
}

std::optional<ReconstructionParams> ParamMailbox::take() {
  std::scoped_lock lock(mutex_);
  auto p = pending_;
  pending_.reset();
  return p;
}

ReconstructionParams ParamMailbox::latest() const {
  std::scoped_lock lock(mutex_);
  return current_;
}

void ParamMailbox::pause() {
  std::scoped_lock lock(mutex_);
  paused_ = true;
}

void ParamMailbox::resume() {
  {
    std::scoped_lock lock(mutex_);
    paused_ = false;
  }
  cv_.notify_all();
}

bool ParamMailbox::paused() const {
  std::scoped_lock lock(mutex_);
  return paused_;
}

bool ParamMailbox::wait_while_paused(std::stop_token stop) {
  std::unique_lock lock(mutex_);
  return cv_.wait(lock, stop, [&] { return !paused_; });
}

FpsMeter::FpsMeter(std::size_t window) : window_(window) {
  if (window_ < 2) throw InvalidArgument("fps window must be at least 2");
}

double FpsMeter::record(Clock::time_point t) {
  stamps_.push_back(t);
  while (stamps_.size() > window_) stamps_.pop_front();
  return fps();
}

double FpsMeter::fps() const {
  if (stamps_.size() < 2) return 0.0;
  const double span = std::chrono::duration<double>(stamps_.back() - stamps_.front()).count();
  return span > 0.0 ? static_cast<double>(stamps_.size() - 1) / span : 0.0;
}

LoopStats run_loop(FrameSource& source, ParamMailbox& inbox, FrameSink& sink, std::stop_token stop,
                   const LoopOptions& options) {
  const auto now = options.clock ? options.clock : [] { return Clock::now(); };
  Reconstructor reconstructor(options.cache_capacity);
  FpsMeter meter(options.fps_window);
  ReconstructionParams params = inbox.latest();
  LoopStats stats;
  std::uint64_t sequence = 0;
  const auto min_interval = options.max_fps > 0.0
                                ? std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / options.max_fps))
                                : Clock::duration::zero();
  auto last_start = Clock::now() - min_interval;

  while (!stop.stop_requested()) {
    if (!inbox.wait_while_paused(stop)) break;
    if (min_interval > Clock::duration::zero()) {
      const auto next = last_start + min_interval;
      while (Clock::now() < next && !stop.stop_requested())
        std::this_thread::sleep_for(std::min<Clock::duration>(next - Clock::now(), std::chrono::milliseconds(20)));
      if (stop.stop_requested()) break;
      last_start = Clock::now();
    }
    if (auto update = inbox.take()) params = *update;

    std::optional<HologramFrame> frame;
    try {
      frame = source.next_frame();
    } catch (const std::exception& e) {
      ++stats.errors;
      sink.on_event({LoopEventKind::Error, std::string("source: ") + e.what()});
      sink.on_event({LoopEventKind::SourceExhausted, "source failed"});
      return stats;
    }
    if (!frame) {
      sink.on_event({LoopEventKind::SourceExhausted, "end of stream"});
      return stats;
    }
    const auto captured = now();
    try {
      TimedFrame out = reconstructor.reconstruct(*frame, params);
      out.sequence = ++sequence;
      out.capture_time = captured;
      out.publish_time = now();
      out.fps = meter.record(out.publish_time);
      sink.publish(out);
      ++stats.published;
    } catch (const std::exception& e) {
      ++stats.errors;
      sink.on_event({LoopEventKind::Error, e.what()});
    }
  }
  sink.on_event({LoopEventKind::Stopped, "stop requested"});
  return stats;
}

}  // namespace dhm
