#include "dhm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace dhm {
namespace {

std::uint64_t fnv1a(const Image& img) {
  std::uint64_t h = 1469598103934665603ull;
  for (Index i = 0; i < img.size(); ++i) {
    h ^= static_cast<std::uint64_t>(img.values().data()[i]);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

BenchReport run_bench(const BenchOptions& o) {
  if (o.width < 64 || o.height < 64) throw InvalidArgument("bench dimensions must be at least 64");
  if (o.frames < 1) throw InvalidArgument("bench needs at least one frame");
  if (o.methods.empty()) throw InvalidArgument("bench needs at least one method");
  const GridSpec grid{o.width, o.height, o.pitch};
  const HologramFrame frame = generate_hologram(random_scene(o.seed, grid), o.focus_distance, grid, o.optics);

  BenchReport report;
  for (const Method method : o.methods) {
    ReconstructionParams params;
    params.z = -o.focus_distance;
    params.magnification = o.magnification;
    params.method = method;
    params = clamp_params(params).params;

    MethodBench result;
    result.method = method;
    result.frames = o.frames;
    reset_peak_memory();
    const std::size_t baseline = memory_stats().current_bytes;
    {
      Reconstructor reconstructor(1);
      reconstructor.reconstruct(frame, params);  // warm-up: plan and workspace
      std::vector<double> ms;
      ms.reserve(static_cast<std::size_t>(o.frames));
      TimedFrame last;
      for (int i = 0; i < o.frames; ++i) {
        const auto t0 = Clock::now();
        last = reconstructor.reconstruct(frame, params);
        ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
      }
      const double total_ms = std::accumulate(ms.begin(), ms.end(), 0.0);
      result.mean_fps = total_ms > 0.0 ? 1000.0 * static_cast<double>(o.frames) / total_ms : 0.0;
      std::sort(ms.begin(), ms.end());
      const std::size_t n = ms.size();
      result.p50_ms = n % 2 == 1 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
      result.checksum = fnv1a(*last.amplitude);
    }
    const std::size_t peak = memory_stats().peak_bytes;
    result.peak_bytes_estimate = peak > baseline ? peak - baseline : 0;
    report.methods.push_back(result);
  }

  auto find = [&](Method m) -> const MethodBench* {
    for (const auto& r : report.methods)
      if (r.method == m) return &r;
    return nullptr;
  };
  const auto* a = find(Method::Asm);
  const auto* b = find(Method::BlDsf);
  if (a != nullptr && b != nullptr && a->mean_fps > 0.0) report.speedup_bldsf_over_asm = b->mean_fps / a->mean_fps;
  return report;
}

std::string bench_report_json_lines(const BenchReport& report) {
  std::ostringstream out;
  for (const auto& r : report.methods) {
    nlohmann::json j = {{"method", std::string(to_string(r.method))},
                        {"frames", r.frames},
                        {"mean_fps", r.mean_fps},
                        {"p50_ms", r.p50_ms},
                        {"peak_bytes_estimate", r.peak_bytes_estimate}};
    out << j.dump() << "\n";
  }
  if (report.speedup_bldsf_over_asm)
    out << nlohmann::json{{"speedup_bldsf_over_asm", *report.speedup_bldsf_over_asm}}.dump() << "\n";
  return out.str();
}

}  // namespace dhm
