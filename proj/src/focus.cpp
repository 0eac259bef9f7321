#include "dhm/focus.hpp"

#include <cmath>

namespace dhm {

double normalized_variance(const Image& amplitude, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("region fraction must lie in (0, 1]");
  const auto w = std::max<Index>(1, static_cast<Index>(std::lround(fraction * static_cast<double>(amplitude.width()))));
  const auto h = std::max<Index>(1, static_cast<Index>(std::lround(fraction * static_cast<double>(amplitude.height()))));
  const Image roi = crop(amplitude, w, h);
  const double mean = roi.mean();
  if (mean == 0.0) return 0.0;
  const double var = (roi.values() - mean).square().mean();
  return var / (mean * mean);
}

std::vector<double> linspace(double first, double last, int steps) {
  if (steps < 2) throw InvalidArgument("a sweep needs at least two steps");
  std::vector<double> out(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    out[static_cast<std::size_t>(i)] = first + (last - first) * static_cast<double>(i) / static_cast<double>(steps - 1);
  out.back() = last;
  return out;
}

SweepResult focus_sweep(const HologramFrame& frame, const std::vector<double>& focus_distances,
                        const SweepOptions& options) {
  if (focus_distances.empty()) throw InvalidArgument("empty focus sweep");
  Reconstructor reconstructor(1);
  SweepResult result;
  for (const double d : focus_distances) {
    ReconstructionParams p;
    p.z = -d;
    p.magnification = options.magnification;
    p.method = options.method;
    p = clamp_params(p).params;
    const Image amp = amplitude(reconstructor.propagate(frame, p).field);
    const SweepPoint point{d, normalized_variance(amp, options.roi_fraction)};
    if (options.on_image) options.on_image(point, amp);
    result.points.push_back(point);
    if (point.sharpness > result.points[result.best].sharpness) result.best = result.points.size() - 1;
  }
  return result;
}

}  // namespace dhm
