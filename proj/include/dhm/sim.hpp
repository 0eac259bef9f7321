#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dhm/config.hpp"
#include "dhm/diffraction.hpp"
#include "dhm/field.hpp"

namespace dhm {

/// Thin circular object. Offsets are from the grid center, in meters.
struct Disk {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  double absorption = 1.0;  // in [0, 1]
  double phase = 0.0;       // radians
};

/// Rectangular patch of parallel bars. The period is given in pixels of the
/// hologram grid so zoom ratios can be measured against it directly.
struct BarTarget {
  double center_x = 0.0;
  double center_y = 0.0;
  double width = 0.0;   // meters
  double height = 0.0;  // meters
  double period_px = 16.0;
  double duty = 0.5;
  double absorption = 1.0;
  double phase = 0.0;
  bool vertical = true;  // bars vary along x
};

using Shape = std::variant<Disk, BarTarget>;

enum class ObjectKind { Empty, OpaqueDisk, PhaseDisk, BarTarget, Composite };

/// A thin sample as a stack of shapes. Overlapping transmittances multiply.
struct ObjectSpec {
  std::vector<Shape> shapes;

  ObjectKind kind() const;
  void validate() const;

  static ObjectSpec opaque_disk(double radius, double absorption = 1.0, double cx = 0.0, double cy = 0.0);
  static ObjectSpec phase_disk(double radius, double phase, double cx = 0.0, double cy = 0.0);
  static ObjectSpec bar_target(const BarTarget& bars);
};

/// A recorded (or synthesized) in-line hologram.
struct HologramFrame {
  Image image;
  std::optional<double> object_distance;  // ground truth, meters, when known
  OpticalParams optics;
};

struct NoiseOptions {
  double sigma = 0.0;  // additive Gaussian, intensity units; 0 disables
  std::uint64_t seed = 0;
};

/// t = (1 - a) exp(i phi) inside each shape, 1 elsewhere.
Field transmittance(const ObjectSpec& spec, const GridSpec& grid);

/// Unit plane wave through the object, free-space ASM propagation by +z,
/// intensity recording. The illumination is treated as unbounded: only the
/// object's perturbation t - 1 is propagated on the padded grid, the plane
/// wave itself contributes its exact DC phase factor.
HologramFrame generate_hologram(const ObjectSpec& spec, double z, const GridSpec& grid,
                                const OpticalParams& optics, const NoiseOptions& noise = {});

/// Intensity as the real part of a complex field (imaginary part zero).
Field hologram_to_field(const HologramFrame& frame);

/// A few random disks near the grid center, deterministic in the seed.
ObjectSpec random_scene(std::uint64_t seed, const GridSpec& grid);

/// Many small opaque particles: a dense scene with a pronounced focus.
struct ParticleSceneOptions {
  int count = 20;
  double min_radius = 10e-6;
  double max_radius = 16e-6;
  double half_extent = 130e-6;  // centers drawn from [-half_extent, half_extent]^2
  double absorption = 1.0;
};

ObjectSpec particle_scene(std::uint64_t seed, const ParticleSceneOptions& options = {});

/// Reads `object.<n>.*` entries:
///   kind = opaque_disk | phase_disk | disk | bar_target
///   center_x, center_y, radius, absorption, phase (disks)
///   center_x, center_y, width, height, period_px, duty, absorption, phase, orientation (bars)
ObjectSpec object_spec_from_config(const KeyValueConfig& cfg);
std::string object_spec_to_config(const ObjectSpec& spec);

}  // namespace dhm
