#pragma once

#include <functional>
#include <vector>

#include "dhm/pipeline.hpp"

namespace dhm {

/// var(a) / mean(a)^2 over the centered window covering `fraction` of each
/// axis. Returns 0 for a zero-mean window.
double normalized_variance(const Image& amplitude, double fraction = 0.5);

/// `steps` evenly spaced values from first to last inclusive (steps >= 2).
std::vector<double> linspace(double first, double last, int steps);

struct SweepPoint {
  double focus_distance = 0.0;  // positive, meters
  double sharpness = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::size_t best = 0;

  double best_distance() const { return points.at(best).focus_distance; }
};

struct SweepOptions {
  Method method = Method::BlDsf;
  double magnification = 1.0;
  double roi_fraction = 0.5;
  /// Called with each raw amplitude image, e.g. to write it out.
  std::function<void(const SweepPoint&, const Image& amplitude)> on_image;
};

/// Reconstructs at each positive focus distance and scores the amplitude.
SweepResult focus_sweep(const HologramFrame& frame, const std::vector<double>& focus_distances,
                        const SweepOptions& options = {});

}  // namespace dhm
