#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dhm/sim.hpp"
#include "support/oracles.hpp"

using namespace dhm;

namespace {
const OpticalParams kOptics{650e-9};
const GridSpec kGrid{256, 256, Pitch::square(2.5e-6)};
}  // namespace

TEST_CASE("transmittance of simple objects") {
  const GridSpec g{32, 32, Pitch::square(1e-6)};
  CHECK((transmittance(ObjectSpec{}, g).samples() == std::complex<double>(1.0, 0.0)).all());
  CHECK(ObjectSpec{}.kind() == ObjectKind::Empty);

  const auto disk = ObjectSpec::opaque_disk(5e-6);
  CHECK(disk.kind() == ObjectKind::OpaqueDisk);
  const Field t = transmittance(disk, g);
  for (Index r = 0; r < 32; ++r)
    for (Index c = 0; c < 32; ++c) {
      const double x = (c - 16) * 1e-6, y = (r - 16) * 1e-6;
      const bool in = x * x + y * y <= 25e-12;
      CHECK(t(r, c) == (in ? std::complex<double>(0.0) : std::complex<double>(1.0)));
    }

  const auto pd = ObjectSpec::phase_disk(5e-6, std::numbers::pi / 2);
  CHECK(pd.kind() == ObjectKind::PhaseDisk);
  const Field tp = transmittance(pd, g);
  CHECK((tp.samples().abs() - 1.0).abs().maxCoeff() < 1e-15);
  CHECK(std::arg(tp(16, 16)) == doctest::Approx(std::numbers::pi / 2));
  CHECK(std::arg(tp(0, 0)) == 0.0);
}

TEST_CASE("object validation") {
  CHECK_THROWS_AS(transmittance(ObjectSpec::opaque_disk(-1e-6), kGrid), InvalidArgument);
  CHECK_THROWS_AS(transmittance(ObjectSpec::opaque_disk(1e-6, 1.5), kGrid), InvalidArgument);
  BarTarget b;
  b.width = 1e-4;
  b.height = 1e-4;
  b.duty = 1.0;
  CHECK_THROWS_AS(ObjectSpec::bar_target(b).validate(), InvalidArgument);
  CHECK_THROWS_AS(generate_hologram(ObjectSpec{}, 0.0, kGrid, kOptics), InvalidArgument);
  CHECK_THROWS_AS(generate_hologram(ObjectSpec{}, -0.01, kGrid, kOptics), InvalidArgument);
}

TEST_CASE("bar target pattern") {
  BarTarget b;
  b.width = 64e-6;
  b.height = 32e-6;
  b.period_px = 8;
  const GridSpec g{64, 64, Pitch::square(1e-6)};
  const Field t = transmittance(ObjectSpec::bar_target(b), g);
  // Left edge at x = -32 um (column 0). First 4 columns opaque, next 4 clear.
  for (Index c = 0; c < 16; ++c) CHECK(std::abs(t(32, c)) == ((c % 8) < 4 ? 0.0 : 1.0));
  CHECK(std::abs(t(5, 3)) == 1.0);  // outside the patch vertically
}

TEST_CASE("empty scene records a uniform hologram") {
  const HologramFrame h = generate_hologram(ObjectSpec{}, 0.011, kGrid, kOptics);
  CHECK((h.image.values() - 1.0).abs().maxCoeff() <= 1e-9);
  CHECK(h.image.values().sum() == doctest::Approx(256.0 * 256.0));
  CHECK(h.object_distance.value() == 0.011);
  CHECK(h.image.pitch() == kGrid.pitch);
}

TEST_CASE("opaque disk hologram refocuses to the right radius") {
  const HologramFrame h = generate_hologram(ObjectSpec::opaque_disk(50e-6), 0.011, kGrid, kOptics);
  // Fringes: the hologram is not flat around the disk.
  CHECK(h.image.values().maxCoeff() > 1.1);
  const Field u = hologram_to_field(h);
  CHECK(u.samples().imag().abs().maxCoeff() == 0.0);
  const Image amp = amplitude(asm_propagate(u, {-0.011, kOptics}));
  const double r = oracle::dark_disk_radius_px(amp, 40.0);
  MESSAGE("measured radius " << r << " px, truth 20 px");
  CHECK(std::abs(r - 20.0) <= 2.0);
}

TEST_CASE("weak phase disk is nearly invisible in amplitude and visible in phase") {
  auto contrast = [](const Image& a) {
    // Difference between the mean inside a 12 px radius and a ring outside.
    double in = 0, out = 0;
    int ni = 0, no = 0;
    for (Index r = 0; r < a.height(); ++r)
      for (Index c = 0; c < a.width(); ++c) {
        const double d = std::hypot(c - 128.0, r - 128.0);
        if (d < 12) in += a(r, c), ++ni;
        else if (d > 30 && d < 45) out += a(r, c), ++no;
      }
    return std::abs(in / ni - out / no);
  };
  // In-line recording leaves a twin-image term whose real part grows with the
  // phase step, so the property holds for weak phase objects.
  const double phi = 0.05;
  const auto pd = generate_hologram(ObjectSpec::phase_disk(50e-6, phi), 0.011, kGrid, kOptics);
  const auto od = generate_hologram(ObjectSpec::opaque_disk(50e-6), 0.011, kGrid, kOptics);
  const Field fp = asm_propagate(hologram_to_field(pd), {-0.011, kOptics});
  const Field fo = asm_propagate(hologram_to_field(od), {-0.011, kOptics});
  const double cp = contrast(amplitude(fp)), co = contrast(amplitude(fo));
  MESSAGE("amplitude contrast phase disk " << cp << ", opaque disk " << co);
  CHECK(cp < 0.1 * co);
  // The phase map carries most of the phase step.
  CHECK(contrast(phase(fp)) > 0.6 * phi);
}

TEST_CASE("reconstruction is sharpest at the recording distance") {
  const GridSpec g{256, 256, Pitch::square(2.5e-6)};
  const auto h = generate_hologram(particle_scene(3), 0.011, g, kOptics);
  const Field u = hologram_to_field(h);
  const double at = oracle::normalized_variance(amplitude(asm_propagate(u, {-0.011, kOptics})));
  const double near = oracle::normalized_variance(amplitude(asm_propagate(u, {-0.008, kOptics})));
  const double far = oracle::normalized_variance(amplitude(asm_propagate(u, {-0.015, kOptics})));
  CHECK(at > near);
  CHECK(at > far);
}

TEST_CASE("weak objects superpose nearly linearly") {
  // For weak absorbers the hologram deviation from 1 is close to additive.
  const auto a = ObjectSpec::opaque_disk(20e-6, 0.1, -100e-6, 0.0);
  const auto b = ObjectSpec::opaque_disk(20e-6, 0.1, 100e-6, 0.0);
  ObjectSpec ab;
  ab.shapes = {a.shapes[0], b.shapes[0]};
  const RealGrid<double> ha = generate_hologram(a, 0.011, kGrid, kOptics).image.values() - 1.0;
  const RealGrid<double> hb = generate_hologram(b, 0.011, kGrid, kOptics).image.values() - 1.0;
  const RealGrid<double> hab = generate_hologram(ab, 0.011, kGrid, kOptics).image.values() - 1.0;
  const double err = std::sqrt((hab - ha - hb).abs2().sum() / hab.abs2().sum());
  CHECK(err < 0.1);
}

TEST_CASE("noise is deterministic in the seed and clamps at zero") {
  const auto spec = ObjectSpec::opaque_disk(30e-6);
  const auto n1 = generate_hologram(spec, 0.011, kGrid, kOptics, {0.5, 7});
  const auto n2 = generate_hologram(spec, 0.011, kGrid, kOptics, {0.5, 7});
  const auto n3 = generate_hologram(spec, 0.011, kGrid, kOptics, {0.5, 8});
  CHECK((n1.image.values() == n2.image.values()).all());
  CHECK_FALSE((n1.image.values() == n3.image.values()).all());
  CHECK(n1.image.values().minCoeff() >= 0.0);
}

TEST_CASE("scene generators are deterministic") {
  CHECK(object_spec_to_config(random_scene(5, kGrid)) == object_spec_to_config(random_scene(5, kGrid)));
  CHECK(object_spec_to_config(random_scene(5, kGrid)) != object_spec_to_config(random_scene(6, kGrid)));
  const auto p = particle_scene(1);
  CHECK(p.shapes.size() == 20);
  for (const auto& s : p.shapes) {
    const auto& d = std::get<Disk>(s);
    CHECK(d.radius >= 10e-6);
    CHECK(d.radius <= 16e-6);
    CHECK(std::abs(d.center_x) <= 130e-6);
  }
  CHECK_THROWS_AS(particle_scene(1, {.count = 3, .min_radius = 5e-6, .max_radius = 1e-6}), InvalidArgument);
}

TEST_CASE("object config round trip") {
  BarTarget b;
  b.center_x = 1e-5;
  b.width = 2e-4;
  b.height = 1e-4;
  b.period_px = 12;
  b.vertical = false;
  ObjectSpec spec = random_scene(9, kGrid);
  spec.shapes.emplace_back(b);
  const auto text = object_spec_to_config(spec);
  const auto back = object_spec_from_config(KeyValueConfig::parse(text));
  CHECK(object_spec_to_config(back) == text);
  CHECK(transmittance(back, kGrid).samples().isApprox(transmittance(spec, kGrid).samples()));

  const auto cfg = KeyValueConfig::parse("object.a.kind = phase_disk\nobject.a.radius = 1e-5\nobject.a.phase = 1\n");
  const auto pd = object_spec_from_config(cfg);
  CHECK(pd.kind() == ObjectKind::PhaseDisk);
  CHECK_THROWS_AS(object_spec_from_config(KeyValueConfig::parse("object.0.kind = star\n")), InvalidArgument);
  CHECK_THROWS_AS(object_spec_from_config(KeyValueConfig::parse("object.0.radius = 1\n")), InvalidArgument);
}

TEST_CASE("hologram to field") {
  const Image img = Image::constant(4, 2, Pitch::square(1e-6), 2.5);
  const Field f = hologram_to_field({img, std::nullopt, kOptics});
  CHECK((f.samples() == std::complex<double>(2.5, 0.0)).all());
}
