#include "dhm/sim.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace dhm {
namespace {

std::complex<double> shape_factor(double absorption, double phase) {
  return std::polar(1.0 - absorption, phase);
}

bool inside(const Disk& d, double x, double y, Pitch) {
  const double dx = x - d.center_x;
  const double dy = y - d.center_y;
  return dx * dx + dy * dy <= d.radius * d.radius;
}

bool inside(const BarTarget& b, double x, double y, Pitch pitch) {
  if (std::abs(x - b.center_x) > 0.5 * b.width || std::abs(y - b.center_y) > 0.5 * b.height) return false;
  const double along = b.vertical ? (x - (b.center_x - 0.5 * b.width)) / pitch.x
                                  : (y - (b.center_y - 0.5 * b.height)) / pitch.y;
  // Small bias keeps pixel centers that land exactly on a bar edge stable.
  const double cycles = along / b.period_px + 1e-9;
  return cycles - std::floor(cycles) < b.duty;
}

void check_fraction(double a, const char* what) {
  if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

ObjectKind ObjectSpec::kind() const {
  if (shapes.empty()) return ObjectKind::Empty;
  if (shapes.size() > 1) return ObjectKind::Composite;
  if (const auto* d = std::get_if<Disk>(&shapes.front()))
    return (d->absorption == 0.0 && d->phase != 0.0) ? ObjectKind::PhaseDisk : ObjectKind::OpaqueDisk;
  return ObjectKind::BarTarget;
}

void ObjectSpec::validate() const {
  for (const auto& shape : shapes) {
    if (const auto* d = std::get_if<Disk>(&shape)) {
      if (!(d->radius > 0.0) || !std::isfinite(d->radius)) throw InvalidArgument("disk radius must be positive");
      check_fraction(d->absorption, "disk absorption");
      if (!std::isfinite(d->phase) || !std::isfinite(d->center_x) || !std::isfinite(d->center_y))
        throw InvalidArgument("disk geometry and phase must be finite");
    } else {
      const auto& b = std::get<BarTarget>(shape);
      if (!(b.width > 0.0) || !(b.height > 0.0)) throw InvalidArgument("bar target extent must be positive");
      if (!(b.period_px > 0.0)) throw InvalidArgument("bar period must be positive");
      if (!(b.duty > 0.0 && b.duty < 1.0)) throw InvalidArgument("bar duty cycle must lie in (0, 1)");
      check_fraction(b.absorption, "bar absorption");
      if (!std::isfinite(b.phase)) throw InvalidArgument("bar phase must be finite");
    }
  }
}

ObjectSpec ObjectSpec::opaque_disk(double radius, double absorption, double cx, double cy) {
  return {{Disk{cx, cy, radius, absorption, 0.0}}};
}

ObjectSpec ObjectSpec::phase_disk(double radius, double phase, double cx, double cy) {
  return {{Disk{cx, cy, radius, 0.0, phase}}};
}

ObjectSpec ObjectSpec::bar_target(const BarTarget& bars) { return {{bars}}; }

Field transmittance(const ObjectSpec& spec, const GridSpec& grid) {
  grid.validate();
  spec.validate();
  ComplexGrid<double> t = ComplexGrid<double>::Ones(grid.height, grid.width);
  for (const auto& shape : spec.shapes) {
    std::visit(
        [&](const auto& s) {
          const auto factor = shape_factor(s.absorption, s.phase);
          for (Index r = 0; r < grid.height; ++r) {
            const double y = static_cast<double>(r - grid.height / 2) * grid.pitch.y;
            for (Index c = 0; c < grid.width; ++c) {
              const double x = static_cast<double>(c - grid.width / 2) * grid.pitch.x;
              if (inside(s, x, y, grid.pitch)) t(r, c) *= factor;
            }
          }
        },
        shape);
  }
  return Field(std::move(t), grid.pitch);
}

HologramFrame generate_hologram(const ObjectSpec& spec, double z, const GridSpec& grid,
                                const OpticalParams& optics, const NoiseOptions& noise) {
  if (!(z > 0.0) || !std::isfinite(z)) throw InvalidArgument("hologram distance must be positive");
  optics.validate();
  const Field t = transmittance(spec, grid);
  const Field perturbation(t.samples() - std::complex<double>(1.0, 0.0), grid.pitch);
  const Field scattered = asm_propagate(perturbation, {z, optics});
  // Transfer function at zero frequency: the plane wave's own phase.
  const std::complex<double> plane = std::polar(1.0, -2.0 * std::numbers::pi * z / optics.wavelength);
  RealGrid<double> intensity = (scattered.samples() + plane).abs2();
  if (noise.sigma > 0.0) {
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, noise.sigma);
    for (Index i = 0; i < intensity.size(); ++i)
      intensity.data()[i] = std::max(0.0, intensity.data()[i] + gauss(rng));
  }
  return {Image(std::move(intensity), grid.pitch), z, optics};
}

Field hologram_to_field(const HologramFrame& frame) {
  return Field(frame.image.values().cast<std::complex<double>>(), frame.image.pitch());
}

ObjectSpec random_scene(std::uint64_t seed, const GridSpec& grid) {
  grid.validate();
  std::mt19937_64 rng(seed);
  const double half_x = 0.25 * static_cast<double>(grid.width) * grid.pitch.x;
  const double half_y = 0.25 * static_cast<double>(grid.height) * grid.pitch.y;
  const double min_pitch = std::min(grid.pitch.x, grid.pitch.y);
  std::uniform_int_distribution<int> count(3, 6);
  std::uniform_real_distribution<double> ux(-half_x, half_x);
  std::uniform_real_distribution<double> uy(-half_y, half_y);
  std::uniform_real_distribution<double> radius(4.0 * min_pitch, 12.0 * min_pitch);
  std::uniform_real_distribution<double> absorption(0.3, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 1.5);
  ObjectSpec spec;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double cx = ux(rng);
    const double cy = uy(rng);
    const double r = radius(rng);
    const double a = absorption(rng);
    const double p = phase(rng);
    spec.shapes.emplace_back(Disk{cx, cy, r, a, p});
  }
  return spec;
}

ObjectSpec particle_scene(std::uint64_t seed, const ParticleSceneOptions& o) {
  if (o.count < 0 || !(o.min_radius > 0.0) || o.max_radius < o.min_radius || !(o.half_extent >= 0.0))
    throw InvalidArgument("invalid particle scene options");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-o.half_extent, o.half_extent);
  std::uniform_real_distribution<double> radius(o.min_radius, o.max_radius);
  ObjectSpec spec;
  for (int i = 0; i < o.count; ++i) {
    const double cx = pos(rng);
    const double cy = pos(rng);
    spec.shapes.emplace_back(Disk{cx, cy, radius(rng), o.absorption, 0.0});
  }
  spec.validate();
  return spec;
}

ObjectSpec object_spec_from_config(const KeyValueConfig& cfg) {
  ObjectSpec spec;
  for (const auto& id : cfg.subkeys("object")) {
    const std::string p = "object." + id + ".";
    const std::string kind = cfg.require_string(p + "kind");
    if (kind == "opaque_disk" || kind == "phase_disk" || kind == "disk") {
      Disk d;
      d.center_x = cfg.get_double(p + "center_x", 0.0);
      d.center_y = cfg.get_double(p + "center_y", 0.0);
      d.radius = cfg.get_double(p + "radius", 0.0);
      d.absorption = cfg.get_double(p + "absorption", kind == "phase_disk" ? 0.0 : 1.0);
      d.phase = cfg.get_double(p + "phase", 0.0);
      spec.shapes.emplace_back(d);
    } else if (kind == "bar_target") {
      BarTarget b;
      b.center_x = cfg.get_double(p + "center_x", 0.0);
      b.center_y = cfg.get_double(p + "center_y", 0.0);
      b.width = cfg.get_double(p + "width", 0.0);
      b.height = cfg.get_double(p + "height", 0.0);
      b.period_px = cfg.get_double(p + "period_px", b.period_px);
      b.duty = cfg.get_double(p + "duty", b.duty);
      b.absorption = cfg.get_double(p + "absorption", 1.0);
      b.phase = cfg.get_double(p + "phase", 0.0);
      const std::string orient = cfg.get_string(p + "orientation", "vertical");
      if (orient != "vertical" && orient != "horizontal")
        throw InvalidArgument("bar orientation must be vertical or horizontal");
      b.vertical = orient == "vertical";
      spec.shapes.emplace_back(b);
    } else {
      throw InvalidArgument("unknown object kind '" + kind + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string object_spec_to_config(const ObjectSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  int i = 0;
  for (const auto& shape : spec.shapes) {
    const std::string p = "object." + std::to_string(i++) + ".";
    if (const auto* d = std::get_if<Disk>(&shape)) {
      out << p << "kind = disk\n"
          << p << "center_x = " << d->center_x << "\n"
          << p << "center_y = " << d->center_y << "\n"
          << p << "radius = " << d->radius << "\n"
          << p << "absorption = " << d->absorption << "\n"
          << p << "phase = " << d->phase << "\n";
    } else {
      const auto& b = std::get<BarTarget>(shape);
      out << p << "kind = bar_target\n"
          << p << "center_x = " << b.center_x << "\n"
          << p << "center_y = " << b.center_y << "\n"
          << p << "width = " << b.width << "\n"
          << p << "height = " << b.height << "\n"
          << p << "period_px = " << b.period_px << "\n"
          << p << "duty = " << b.duty << "\n"
          << p << "absorption = " << b.absorption << "\n"
          << p << "phase = " << b.phase << "\n"
          << p << "orientation = " << (b.vertical ? "vertical" : "horizontal") << "\n";
    }
  }
  return out.str();
}

}  // namespace dhm
