#include <cmath>
#include <random>

#include "doctest.h"
#include "dhm/diffraction.hpp"
#include "dhm/sim.hpp"
#include "support/oracles.hpp"

using namespace dhm;

namespace {
const OpticalParams kOptics{650e-9};
const Pitch kP = Pitch::square(2.5e-6);

Field gaussian_mix(Index n, unsigned seed) {
  // A few tilted Gaussian beams well inside the window and the propagating band.
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> off(-60e-6, 60e-6), freq(-5e3, 5e3), ph(0.0, 6.28);
  Field sum = Field::zeros(n, n, kP);
  ComplexGrid<double> acc = sum.samples();
  for (int k = 0; k < 4; ++k) {
    const double dx = off(rng), dy = off(rng), fx = freq(rng), fy = freq(rng);
    acc += oracle::gaussian_beam(n, n, kP, 40e-6, fx, fy, dx, dy).samples() * std::polar(1.0, ph(rng));
  }
  return Field(acc, kP);
}
}  // namespace

TEST_CASE("method names") {
  CHECK(to_string(Method::Asm) == "asm");
  CHECK(method_from_string("bldsf") == Method::BlDsf);
  CHECK_THROWS_AS(method_from_string("fresnel"), InvalidArgument);
}

TEST_CASE("ASM matches a direct DFT evaluation on a small non-square grid") {
  const Field u = oracle::random_field(6, 5, Pitch{1.0e-6, 1.5e-6}, 3);
  for (double z : {50e-6, -120e-6, 1e-3}) {
    const Field fast = asm_propagate(u, {z, kOptics});
    const Field ref = oracle::asm_reference(u, z, kOptics.wavelength);
    CHECK(oracle::rel_l2(fast, ref) < 1e-12);
    CHECK(fast.pitch() == u.pitch());
  }
}

TEST_CASE("ASM at z = 0 is the identity") {
  const Field u = oracle::random_field(64, 48, kP, 11);
  CHECK(relative_l2(asm_propagate(u, {0.0, kOptics}), u) <= 1e-9);
}

TEST_CASE("ASM round trip") {
  SUBCASE("unit impulse returns its peak to the center pixel") {
    ComplexGrid<double> g = ComplexGrid<double>::Zero(256, 256);
    g(128, 128) = 1.0;
    const Field u(g, kP);
    const Field back = asm_propagate(asm_propagate(u, {0.011, kOptics}), {-0.011, kOptics});
    Index r = 0, c = 0;
    back.samples().abs().maxCoeff(&r, &c);
    CHECK(r == 128);
    CHECK(c == 128);
  }
  SUBCASE("confined field recovers to 1e-6") {
    const Field u = gaussian_mix(256, 5);
    const Field back = asm_propagate(asm_propagate(u, {0.011, kOptics}), {-0.011, kOptics});
    CHECK(relative_l2(back, u) <= 1e-6);
  }
}

TEST_CASE("ASM conserves energy of a confined propagating field") {
  const Field u = gaussian_mix(256, 9);
  for (double z : {0.002, 0.011, -0.007}) {
    const double e = asm_propagate(u, {z, kOptics}).energy();
    CHECK(std::abs(e / u.energy() - 1.0) <= 1e-6);
  }
}

TEST_CASE("Fresnel step matches the explicit Fresnel sum") {
  const Field u = oracle::random_field(8, 6, Pitch{20e-6, 25e-6}, 7);
  for (double z : {4e-3, -3e-3}) {
    const Field fast = fresnel_ft_step(u, z, kOptics);
    const Field ref = oracle::fresnel_reference(u, z, kOptics.wavelength);
    CHECK(oracle::rel_l2(fast, ref) < 1e-12);
    CHECK(fast.pitch().x == doctest::Approx(ref.pitch().x).epsilon(1e-14));
    CHECK(fast.pitch().y == doctest::Approx(ref.pitch().y).epsilon(1e-14));
  }
}

TEST_CASE("Fresnel step output pitch") {
  CHECK(fresnel_output_pitch(256, 2.5e-6, 0.011, 650e-9) == doctest::Approx(650e-9 * 0.011 / (256 * 2.5e-6)));
  CHECK(fresnel_output_pitch(256, 2.5e-6, 0.011, 650e-9) == doctest::Approx(11.17e-6).epsilon(1e-3));
  const Field out = fresnel_ft_step(Field::constant(256, 256, kP, {1.0, 0.0}), 0.011, kOptics);
  CHECK(out.pitch().x == doctest::Approx(11.171875e-6));
}

TEST_CASE("Fresnel steps of opposite sign invert each other") {
  const Field u = oracle::random_field(32, 16, kP, 21);
  const Field mid = fresnel_ft_step(u, 0.004, kOptics);
  const Field back = fresnel_ft_step(mid, -0.004, kOptics);
  CHECK(relative_l2(back, u) < 1e-12);
  CHECK(back.pitch().x == doctest::Approx(kP.x).epsilon(1e-14));
  // Same sign twice does not invert.
  CHECK(relative_l2(fresnel_ft_step(mid, 0.004, kOptics), u) > 0.5);
}

TEST_CASE("Fresnel step conserves the energy of a plane wave") {
  const Field u = Field::constant(64, 32, kP, {0.6, 0.8});
  const Field out = fresnel_ft_step(u, 0.011, kOptics);
  CHECK(std::abs(out.energy() / u.energy() - 1.0) <= 1e-6);
}

TEST_CASE("double-step split") {
  const auto s12 = solve_dsf_split(0.011, 1.2);
  CHECK(s12.z1 == doctest::Approx(0.006).epsilon(1e-12));
  CHECK(s12.z2 == doctest::Approx(0.005).epsilon(1e-12));
  const auto s10 = solve_dsf_split(0.011, 1.0);
  CHECK(s10.z1 == doctest::Approx(0.0055));
  CHECK(s10.z2 == doctest::Approx(0.0055));
  const auto s08 = solve_dsf_split(0.011, 0.8);
  CHECK(s08.z1 == doctest::Approx(0.011 * 0.8 / 1.8).epsilon(1e-12));
  CHECK(s08.z2 == doctest::Approx(0.011 / 1.8).epsilon(1e-12));
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> zd(-0.1, 0.1), md(0.25, 4.0);
  for (int i = 0; i < 200; ++i) {
    const double z = zd(rng), m = md(rng);
    const auto s = solve_dsf_split(z, m);
    CHECK(std::abs(s.total() - z) <= 1e-12 * std::abs(z));
    CHECK(s.magnification() == doctest::Approx(m).epsilon(1e-12));
  }
  CHECK_THROWS_AS(solve_dsf_split(0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(solve_dsf_split(0.01, 0.0), InvalidArgument);
  CHECK_THROWS_AS(solve_dsf_split(0.01, -1.0), InvalidArgument);
}

TEST_CASE("virtual-plane band limits") {
  const GridSpec g{256, 256, kP};
  const auto split = solve_dsf_split(0.011, 1.0);
  // Chirp Nyquist bound: lambda |z1 z2| / (2 p_v |z|) with p_v = lambda |z1| / (N p_s).
  const double pv = 650e-9 * 0.0055 / (256 * 2.5e-6);
  const double nyquist = 650e-9 * 0.0055 * 0.0055 / (2 * pv * 0.011);
  CHECK(nyquist == doctest::Approx(160e-6));
  CHECK(chirp_nyquist_limit(split, g, kOptics).xv_max == doctest::Approx(nyquist));
  // Geometric bound used by the propagator: the largest |x_v| met by a straight
  // path from a source edge sample to a destination edge sample on the same
  // side, x_v = x_s + (x_d - x_s) z1 / z, with destination pitch p_s / M.
  for (double m : {1.0, 2.0, 0.5}) {
    const auto sm = solve_dsf_split(0.011, m);
    const double xs = 128 * 2.5e-6, xd = 128 * 2.5e-6 / m;
    const double xv = xs + (xd - xs) * sm.z1 / 0.011;
    CHECK(plan_band_limit(sm, g, kOptics).xv_max == doctest::Approx(xv));
    CHECK(chirp_nyquist_limit(sm, g, kOptics).xv_max == doctest::Approx(xv / 2));
  }
  CHECK(plan_band_limit(split, g, kOptics).xv_max == doctest::Approx(320e-6));
  const GridSpec g2{512, 512, kP};
  CHECK(plan_band_limit(split, g2, kOptics).xv_max ==
        doctest::Approx(2.0 * plan_band_limit(split, g, kOptics).xv_max));
  const GridSpec rect{256, 128, Pitch{2.5e-6, 4e-6}};
  const auto b = plan_band_limit(solve_dsf_split(-0.011, 2.0), rect, kOptics);
  CHECK(b.xv_max == doctest::Approx(0.011 / 3.0 * 256 * 2.5e-6 / 0.011));
  CHECK(b.yv_max == doctest::Approx(0.011 / 3.0 * 128 * 4e-6 / 0.011));
  CHECK_THROWS_AS(plan_band_limit(DsfSplit{0.01, -0.01}, g, kOptics), InvalidArgument);
}

TEST_CASE("BL-DSF equals two explicit Fresnel sums with the virtual-plane mask") {
  const Field u = oracle::random_field(8, 6, Pitch{20e-6, 16e-6}, 17);
  for (double z : {6e-3, -6e-3}) {
    for (double m : {1.0, 1.2, 0.8}) {
      const GridSpec grid = GridSpec::of(u);
      const BlDsfPlan<double> plan(grid, z, m, kOptics);
      const auto s = plan.split();
      const auto band = plan.band_limit();
      const Field v = oracle::fresnel_reference(u, s.z1, kOptics.wavelength);
      const Field ref = oracle::fresnel_reference(v, s.z2, kOptics.wavelength, band.xv_max, band.yv_max);
      const Field fast = bl_dsf_propagate(u, z, m, kOptics);
      CHECK(oracle::rel_l2(fast, ref) < 1e-11);
      CHECK(ref.pitch().x == doctest::Approx(fast.pitch().x).epsilon(1e-12));
      CHECK(ref.pitch().y == doctest::Approx(fast.pitch().y).epsilon(1e-12));
    }
  }
}

TEST_CASE("BL-DSF output pitch records the magnification") {
  const Field u = oracle::random_field(64, 32, kP, 2);
  for (double m : {0.25, 0.8, 1.0, 1.2, 3.7}) {
    const Field out = bl_dsf_propagate(u, -0.011, m, kOptics);
    CHECK(out.width() == 64);
    CHECK(out.height() == 32);
    CHECK(out.pitch().x * m == doctest::Approx(kP.x).epsilon(1e-15));
    CHECK(out.pitch().y * m == doctest::Approx(kP.y).epsilon(1e-15));
  }
}

TEST_CASE("band limiting lowers the error against ASM") {
  const GridSpec grid{256, 256, kP};
  double limited = 0, unlimited = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const HologramFrame h = generate_hologram(random_scene(seed, grid), 0.011, grid, kOptics);
    const Field u = hologram_to_field(h);
    const Image ref = amplitude(asm_propagate(u, {-0.011, kOptics}));
    Workspace<double> ws;
    const Image lim = amplitude(BlDsfPlan<double>(grid, -0.011, 1.0, kOptics, true).apply(u, ws));
    const Image unl = amplitude(BlDsfPlan<double>(grid, -0.011, 1.0, kOptics, false).apply(u, ws));
    limited += oracle::crop_rel_l2(lim, ref);
    unlimited += oracle::crop_rel_l2(unl, ref);
  }
  MESSAGE("mean crop error limited " << limited / 3 << ", unlimited " << unlimited / 3);
  CHECK(limited < unlimited);
}

TEST_CASE("plans reproduce the one-shot operations bit for bit") {
  const GridSpec grid{48, 40, kP};
  const auto asm_plan = make_plan<double>(Method::Asm, grid, 0.011, 1.0, kOptics);
  const auto dsf_plan = make_plan<double>(Method::BlDsf, grid, -0.011, 1.2, kOptics);
  Workspace<double> ws;
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Field u = oracle::random_field(48, 40, kP, 100 + seed);
    CHECK((asm_plan.apply(u, ws).samples() == asm_propagate(u, {0.011, kOptics}).samples()).all());
    CHECK((apply_plan(dsf_plan, u).samples() == bl_dsf_propagate(u, -0.011, 1.2, kOptics).samples()).all());
  }
  CHECK(asm_plan.key().magnification == 1.0);
  CHECK(make_plan_key(Method::Asm, grid, 0.011, 2.0, kOptics) == asm_plan.key());
  CHECK(dsf_plan.output_pitch().x == doctest::Approx(kP.x / 1.2));
  CHECK_THROWS_AS(asm_plan.apply(oracle::random_field(40, 48, kP, 1), ws), InvalidArgument);
}

TEST_CASE("propagation errors") {
  const Field u = oracle::random_field(16, 16, kP, 1);
  CHECK_THROWS_AS(bl_dsf_propagate(u, 0.0, 1.0, kOptics), InvalidArgument);
  CHECK_THROWS_AS(bl_dsf_propagate(u, 0.01, 0.0, kOptics), InvalidArgument);
  CHECK_THROWS_AS(bl_dsf_propagate(oracle::random_field(15, 16, kP, 1), 0.01, 1.0, kOptics), InvalidArgument);
  CHECK_THROWS_AS(fresnel_ft_step(u, 0.0, kOptics), InvalidArgument);
  CHECK_THROWS_AS(asm_propagate(u, {NAN, kOptics}), InvalidArgument);
  CHECK_THROWS_AS(asm_propagate(u, {0.01, OpticalParams{0.0}}), InvalidArgument);
  ComplexGrid<double> g = u.samples();
  g(3, 4) = {NAN, 0.0};
  const Field bad(g, kP);
  CHECK_THROWS_AS(asm_propagate(bad, {0.01, kOptics}), InvalidArgument);
  CHECK_THROWS_AS(bl_dsf_propagate(bad, 0.01, 1.0, kOptics), InvalidArgument);
  // Odd sizes are fine for ASM.
  CHECK_NOTHROW(asm_propagate(oracle::random_field(15, 7, kP, 1), {0.001, kOptics}));
}

TEST_CASE("single precision agrees with double precision") {
  const Field u = gaussian_mix(128, 3);
  const ComplexField<float> uf(u.samples().cast<std::complex<float>>(), u.pitch());
  const auto a = asm_propagate(uf, {0.011, kOptics});
  const auto b = bl_dsf_propagate(uf, 0.011, 1.2, kOptics);
  const Field ad = asm_propagate(u, {0.011, kOptics});
  const Field bd = bl_dsf_propagate(u, 0.011, 1.2, kOptics);
  CHECK(relative_l2(a.samples().cast<std::complex<double>>(), ad.samples()) < 1e-4);
  CHECK(relative_l2(b.samples().cast<std::complex<double>>(), bd.samples()) < 1e-4);
}

TEST_CASE("ASM needs at least three times the working set of BL-DSF") {
  for (Index n : {64, 256, 512}) {
    const GridSpec grid{n, n, kP};
    const AsmPlan<double> a(grid, 0.011, kOptics);
    const BlDsfPlan<double> b(grid, 0.011, 1.0, kOptics);
    CHECK(a.working_set_bytes() >= 3 * b.working_set_bytes());
  }
  // Measured through allocation accounting.
  const GridSpec grid{256, 256, kP};
  const Field u = oracle::random_field(256, 256, kP, 8);
  auto measure = [&](auto&& run) {
    const std::size_t base = memory_stats().current_bytes;
    reset_peak_memory();
    run();
    return memory_stats().peak_bytes - base;
  };
  const std::size_t asm_peak = measure([&] { (void)asm_propagate(u, {0.011, kOptics}); });
  const std::size_t dsf_peak = measure([&] { (void)bl_dsf_propagate(u, 0.011, 1.0, kOptics); });
  MESSAGE("ASM peak " << asm_peak << " B, BL-DSF peak " << dsf_peak << " B");
  CHECK(asm_peak >= 3 * dsf_peak);
}
