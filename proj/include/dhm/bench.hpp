#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dhm/pipeline.hpp"

namespace dhm {

struct BenchOptions {
  Index width = 1920;
  Index height = 1440;
  int frames = 5;
  std::vector<Method> methods{Method::Asm, Method::BlDsf};
  std::uint64_t seed = 1;
  double magnification = 1.0;
  Pitch pitch = Pitch::square(2.5e-6);
  OpticalParams optics;
  double focus_distance = 0.011;
};

struct MethodBench {
  Method method = Method::BlDsf;
  int frames = 0;
  double mean_fps = 0.0;
  double p50_ms = 0.0;
  std::size_t peak_bytes_estimate = 0;  // counted plan + workspace high-water mark
  std::uint64_t checksum = 0;           // hash of the last display payload
};

struct BenchReport {
  std::vector<MethodBench> methods;
  std::optional<double> speedup_bldsf_over_asm;
};

/// Times end-to-end frames (propagation plus display mapping) on a
/// synthetic hologram. One untimed warm-up frame per method builds the plan.
BenchReport run_bench(const BenchOptions& options);

/// One JSON object per line: each method, then the speedup if both ran.
std::string bench_report_json_lines(const BenchReport& report);

}  // namespace dhm
