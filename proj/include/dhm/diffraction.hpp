#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "dhm/fft.hpp"
#include "dhm/field.hpp"

namespace dhm {

enum class Method { Asm, BlDsf };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

/// Sampling grid of a plane: dimensions in pixels plus pitch.
struct GridSpec {
  Index width = 0;
  Index height = 0;
  Pitch pitch;

  void validate() const { detail::check_grid(width, height, pitch); }
  bool operator==(const GridSpec&) const = default;

  template <typename Scalar>
  static GridSpec of(const ComplexField<Scalar>& f) {
    return {f.width(), f.height(), f.pitch()};
  }
};

struct PropagationSpec {
  double z = 0.0;  // signed meters
  OpticalParams optics;
};

/// Decomposition of a propagation distance into source->virtual (z1) and
/// virtual->destination (z2) legs.
struct DsfSplit {
  double z1 = 0.0;
  double z2 = 0.0;

  double total() const { return z1 + z2; }
  /// Displayed magnification p_s / p_d = |z1 / z2|.
  double magnification() const { return std::abs(z1 / z2); }
};

/// Half-widths of the rectangular pass band on the virtual plane (meters).
struct BandLimit {
  double xv_max = 0.0;
  double yv_max = 0.0;
};

/// Split realizing magnification M (object drawn M times larger on a pixel
/// grid of fixed size): z1 = z M / (M + 1), z2 = z / (M + 1).
inline DsfSplit solve_dsf_split(double z, double magnification) {
  if (!std::isfinite(z) || z == 0.0) throw InvalidArgument("double-step split needs a nonzero distance");
  if (!std::isfinite(magnification) || !(magnification > 0.0))
    throw InvalidArgument("magnification must be positive");
  return {z * magnification / (magnification + 1.0), z / (magnification + 1.0)};
}

/// Output pitch of a single Fourier-transform Fresnel step over n samples.
inline double fresnel_output_pitch(Index n, double input_pitch, double z, double wavelength) {
  return wavelength * std::abs(z) / (static_cast<double>(n) * input_pitch);
}

/// Pass band on the virtual plane: every virtual point that lies on a
/// straight path from some source sample to some destination sample.
/// With source half-width N p_s / 2 and destination half-width N p_s / (2M)
/// this is xv_max = |z2| N p_s / |z1 + z2| per axis.
inline BandLimit plan_band_limit(const DsfSplit& split, const GridSpec& grid, const OpticalParams& optics) {
  grid.validate();
  optics.validate();
  const double z = split.total();
  if (split.z1 == 0.0 || split.z2 == 0.0 || z == 0.0 || !std::isfinite(z))
    throw InvalidArgument("degenerate double-step split");
  auto limit = [&](Index n, double ps) { return std::abs(split.z2) * static_cast<double>(n) * ps / std::abs(z); };
  return {limit(grid.width, grid.pitch.x), limit(grid.height, grid.pitch.y)};
}

/// Nyquist limit of the combined virtual-plane chirp exp(i pi z v^2 / (lambda z1 z2))
/// at the virtual pitch lambda |z1| / (N p_s): half of plan_band_limit.
inline BandLimit chirp_nyquist_limit(const DsfSplit& split, const GridSpec& grid, const OpticalParams& optics) {
  const BandLimit b = plan_band_limit(split, grid, optics);
  return {0.5 * b.xv_max, 0.5 * b.yv_max};
}

/// Reusable scratch memory for plan application. Grows on demand.
template <typename Scalar>
class Workspace {
 public:
  std::complex<Scalar>* acquire(std::size_t count) {
    if (buffer_.size() < count) buffer_ = AlignedBuffer<std::complex<Scalar>>(count);
    return buffer_.data();
  }
  std::size_t bytes() const { return buffer_.bytes(); }

 private:
  AlignedBuffer<std::complex<Scalar>> buffer_;
};

namespace detail {

inline void check_finite_input(bool finite) {
  if (!finite) throw InvalidArgument("input field contains non-finite samples");
}

inline void require_even(const GridSpec& grid) {
  if (grid.width % 2 != 0 || grid.height % 2 != 0)
    throw InvalidArgument("Fourier-transform Fresnel propagation requires even grid dimensions");
}

/// exp(i pi x^2 / (lambda d)) at DC-centered coordinates x = (k - n/2) p,
/// optionally with the (-1)^k modulation that recenters a DFT.
template <typename Scalar>
AlignedBuffer<std::complex<Scalar>> chirp_vector(Index n, double pitch, double wavelength, double d,
                                                 bool checkerboard, double scale = 1.0,
                                                 double pass_half_width = -1.0) {
  AlignedBuffer<std::complex<Scalar>> v(static_cast<std::size_t>(n));
  const double k = std::numbers::pi / (wavelength * d);
  for (Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i - n / 2) * pitch;
    double s = (checkerboard && (i % 2 != 0)) ? -scale : scale;
    if (pass_half_width >= 0.0 && std::abs(x) > pass_half_width) s = 0.0;
    const std::complex<double> c = s * std::polar(1.0, k * x * x);
    v[static_cast<std::size_t>(i)] = std::complex<Scalar>(static_cast<Scalar>(c.real()), static_cast<Scalar>(c.imag()));
  }
  return v;
}

template <typename Scalar>
using ComplexMap = Eigen::Map<Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename Scalar>
using ConstComplexMap =
    Eigen::Map<const Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename Scalar>
using ConstRowMap = Eigen::Map<const Eigen::Array<std::complex<Scalar>, 1, Eigen::Dynamic>>;

/// data(r, c) *= row_factor[r] * col_factor[c]
template <typename Scalar>
void apply_separable(std::complex<Scalar>* data, Index width, Index height,
                     const AlignedBuffer<std::complex<Scalar>>& col_factor,
                     const AlignedBuffer<std::complex<Scalar>>& row_factor) {
  ConstRowMap<Scalar> cols(col_factor.data(), width);
  for (Index r = 0; r < height; ++r) {
    Eigen::Map<Eigen::Array<std::complex<Scalar>, 1, Eigen::Dynamic>> row(data + r * width, width);
    row *= cols * row_factor[static_cast<std::size_t>(r)];
  }
}

}  // namespace detail

/// Angular-spectrum propagator on a 2x zero-padded grid. The transfer
/// function exp(-2 pi i z sqrt(1/lambda^2 - fx^2 - fy^2)) is precomputed with
/// the inverse-FFT normalization folded in; evanescent frequencies are zero.
template <typename Scalar>
class AsmPlan {
 public:
  using complex_type = std::complex<Scalar>;

  AsmPlan(GridSpec grid, double z, OpticalParams optics)
      : grid_(grid), z_(z), optics_(optics), padded_width_(2 * grid.width), padded_height_(2 * grid.height) {
    grid_.validate();
    optics_.validate();
    if (!std::isfinite(z_)) throw InvalidArgument("propagation distance must be finite");
    transfer_ = AlignedBuffer<complex_type>(static_cast<std::size_t>(padded_width_ * padded_height_));
    const double norm = 1.0 / static_cast<double>(padded_width_ * padded_height_);
    const double inv_lambda2 = 1.0 / (optics_.wavelength * optics_.wavelength);
    auto frequencies = [](Index n, double pitch) {
      std::vector<double> f(static_cast<std::size_t>(n));
      for (Index k = 0; k < n; ++k) {
        const Index signed_k = k < (n + 1) / 2 ? k : k - n;
        f[static_cast<std::size_t>(k)] = static_cast<double>(signed_k) / (static_cast<double>(n) * pitch);
      }
      return f;
    };
    const auto fx = frequencies(padded_width_, grid_.pitch.x);
    const auto fy = frequencies(padded_height_, grid_.pitch.y);
    for (Index r = 0; r < padded_height_; ++r) {
      const double fy2 = fy[static_cast<std::size_t>(r)] * fy[static_cast<std::size_t>(r)];
      complex_type* row = transfer_.data() + r * padded_width_;
      for (Index c = 0; c < padded_width_; ++c) {
        std::complex<double> h(norm, 0.0);
        if (z_ != 0.0) {
          const double arg = inv_lambda2 - fx[static_cast<std::size_t>(c)] * fx[static_cast<std::size_t>(c)] - fy2;
          h = arg > 0.0 ? std::polar(norm, -2.0 * std::numbers::pi * z_ * std::sqrt(arg)) : std::complex<double>{};
        }
        row[c] = complex_type(static_cast<Scalar>(h.real()), static_cast<Scalar>(h.imag()));
      }
    }
    fft_ = std::make_unique<Fft2d<Scalar>>(static_cast<int>(padded_height_), static_cast<int>(padded_width_));
  }

  const GridSpec& grid() const noexcept { return grid_; }
  double z() const noexcept { return z_; }
  Pitch output_pitch() const noexcept { return grid_.pitch; }
  Index padded_width() const noexcept { return padded_width_; }
  Index padded_height() const noexcept { return padded_height_; }

  std::size_t workspace_elements() const noexcept { return static_cast<std::size_t>(padded_width_ * padded_height_); }
  /// Precomputed arrays plus the padded workspace one application needs.
  std::size_t working_set_bytes() const noexcept {
    return transfer_.bytes() + workspace_elements() * sizeof(complex_type);
  }

  ComplexField<Scalar> apply(const ComplexField<Scalar>& u1, Workspace<Scalar>& ws) const {
    if (GridSpec::of(u1) != grid_) throw InvalidArgument("field does not match the plan grid");
    detail::check_finite_input(u1.all_finite());
    complex_type* buf = ws.acquire(workspace_elements());
    const Index off_r = centered_offset(padded_height_, grid_.height);
    const Index off_c = centered_offset(padded_width_, grid_.width);
    const auto& src = u1.samples();
    for (Index r = 0; r < padded_height_; ++r) {
      complex_type* row = buf + r * padded_width_;
      const Index sr = r - off_r;
      if (sr < 0 || sr >= grid_.height) {
        std::fill(row, row + padded_width_, complex_type{});
        continue;
      }
      std::fill(row, row + off_c, complex_type{});
      std::copy(src.data() + sr * grid_.width, src.data() + (sr + 1) * grid_.width, row + off_c);
      std::fill(row + off_c + grid_.width, row + padded_width_, complex_type{});
    }
    fft_->execute(buf, FftDirection::Forward);
    detail::ComplexMap<Scalar> spectrum(buf, padded_height_, padded_width_);
    spectrum *= detail::ConstComplexMap<Scalar>(transfer_.data(), padded_height_, padded_width_);
    fft_->execute(buf, FftDirection::Inverse);
    ComplexGrid<Scalar> out = spectrum.block(off_r, off_c, grid_.height, grid_.width);
    return ComplexField<Scalar>(std::move(out), grid_.pitch);
  }

 private:
  GridSpec grid_;
  double z_;
  OpticalParams optics_;
  Index padded_width_;
  Index padded_height_;
  AlignedBuffer<complex_type> transfer_;
  std::unique_ptr<Fft2d<Scalar>> fft_;
};

/// Band-limited double-step Fresnel propagator. Both Fresnel legs run on the
/// unpadded grid; chirps are stored as separable per-axis vectors so the
/// working set is one N-sized buffer.
template <typename Scalar>
class BlDsfPlan {
 public:
  using complex_type = std::complex<Scalar>;

  /// `band_limited = false` drops the virtual-plane mask (diagnostics only).
  BlDsfPlan(GridSpec grid, double z, double magnification, OpticalParams optics, bool band_limited = true)
      : grid_(grid), optics_(optics), magnification_(magnification) {
    grid_.validate();
    optics_.validate();
    detail::require_even(grid_);
    split_ = solve_dsf_split(z, magnification);
    band_ = plan_band_limit(split_, grid_, optics_);
    band_limited_ = band_limited;

    const double lambda = optics_.wavelength;
    const Pitch pv{fresnel_output_pitch(grid_.width, grid_.pitch.x, split_.z1, lambda),
                   fresnel_output_pitch(grid_.height, grid_.pitch.y, split_.z1, lambda)};
    output_pitch_ = {grid_.pitch.x / magnification_, grid_.pitch.y / magnification_};
    const Pitch pd{fresnel_output_pitch(grid_.width, pv.x, split_.z2, lambda),
                   fresnel_output_pitch(grid_.height, pv.y, split_.z2, lambda)};

    // Centered DFT = (-1)^k DFT[(-1)^n f] * (-1)^(N/2). The modulation after
    // the first transform cancels the one before the second, and the two
    // global signs cancel, leaving it on the input and output chirps only.
    in_x_ = detail::chirp_vector<Scalar>(grid_.width, grid_.pitch.x, lambda, split_.z1, true);
    in_y_ = detail::chirp_vector<Scalar>(grid_.height, grid_.pitch.y, lambda, split_.z1, true);
    const double zv = split_.z1 * split_.z2 / split_.total();
    virtual_x_ = detail::chirp_vector<Scalar>(grid_.width, pv.x, lambda, zv, false, 1.0, band_limited ? band_.xv_max : -1.0);
    virtual_y_ = detail::chirp_vector<Scalar>(grid_.height, pv.y, lambda, zv, false, 1.0, band_limited ? band_.yv_max : -1.0);
    const double norm = 1.0 / static_cast<double>(grid_.width * grid_.height);
    out_x_ = detail::chirp_vector<Scalar>(grid_.width, pd.x, lambda, split_.z2, true, norm);
    out_y_ = detail::chirp_vector<Scalar>(grid_.height, pd.y, lambda, split_.z2, true);
    first_ = direction_for(split_.z1);
    second_ = direction_for(split_.z2);
    fft_ = std::make_unique<Fft2d<Scalar>>(static_cast<int>(grid_.height), static_cast<int>(grid_.width));
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const DsfSplit& split() const noexcept { return split_; }
  const BandLimit& band_limit() const noexcept { return band_; }
  bool band_limited() const noexcept { return band_limited_; }
  double magnification() const noexcept { return magnification_; }
  /// Destination pitch, p_s / M.
  Pitch output_pitch() const noexcept { return output_pitch_; }

  std::size_t workspace_elements() const noexcept { return static_cast<std::size_t>(grid_.width * grid_.height); }
  std::size_t working_set_bytes() const noexcept {
    return in_x_.bytes() + in_y_.bytes() + virtual_x_.bytes() + virtual_y_.bytes() + out_x_.bytes() +
           out_y_.bytes() + workspace_elements() * sizeof(complex_type);
  }

  ComplexField<Scalar> apply(const ComplexField<Scalar>& u1, Workspace<Scalar>& ws) const {
    if (GridSpec::of(u1) != grid_) throw InvalidArgument("field does not match the plan grid");
    detail::check_finite_input(u1.all_finite());
    complex_type* buf = ws.acquire(workspace_elements());
    std::copy(u1.samples().data(), u1.samples().data() + u1.size(), buf);
    detail::apply_separable(buf, grid_.width, grid_.height, in_x_, in_y_);
    fft_->execute(buf, first_);
    detail::apply_separable(buf, grid_.width, grid_.height, virtual_x_, virtual_y_);
    fft_->execute(buf, second_);
    detail::apply_separable(buf, grid_.width, grid_.height, out_x_, out_y_);
    ComplexGrid<Scalar> out = detail::ComplexMap<Scalar>(buf, grid_.height, grid_.width);
    return ComplexField<Scalar>(std::move(out), output_pitch_);
  }

 private:
  GridSpec grid_;
  OpticalParams optics_;
  double magnification_;
  DsfSplit split_;
  BandLimit band_;
  bool band_limited_ = true;
  Pitch output_pitch_;
  AlignedBuffer<complex_type> in_x_, in_y_, virtual_x_, virtual_y_, out_x_, out_y_;
  FftDirection first_ = FftDirection::Forward;
  FftDirection second_ = FftDirection::Forward;
  std::unique_ptr<Fft2d<Scalar>> fft_;
};

template <typename Scalar>
ComplexField<Scalar> asm_propagate(const ComplexField<Scalar>& u1, const PropagationSpec& spec) {
  Workspace<Scalar> ws;
  return AsmPlan<Scalar>(GridSpec::of(u1), spec.z, spec.optics).apply(u1, ws);
}

/// One Fourier-transform-type Fresnel step: input chirp, centered unitary FFT
/// in the direction of sgn(z), output chirp. Output pitch lambda |z| / (N p).
template <typename Scalar>
ComplexField<Scalar> fresnel_ft_step(const ComplexField<Scalar>& u1, double z, const OpticalParams& optics) {
  if (!std::isfinite(z) || z == 0.0) throw InvalidArgument("Fresnel step needs a nonzero distance");
  optics.validate();
  const GridSpec grid = GridSpec::of(u1);
  detail::require_even(grid);
  detail::check_finite_input(u1.all_finite());
  const Pitch out_pitch{fresnel_output_pitch(grid.width, grid.pitch.x, z, optics.wavelength),
                        fresnel_output_pitch(grid.height, grid.pitch.y, z, optics.wavelength)};
  const auto in_x = detail::chirp_vector<Scalar>(grid.width, grid.pitch.x, optics.wavelength, z, true);
  const auto in_y = detail::chirp_vector<Scalar>(grid.height, grid.pitch.y, optics.wavelength, z, true);
  const double sign = ((grid.width / 2 + grid.height / 2) % 2 == 0) ? 1.0 : -1.0;
  const double norm = sign / std::sqrt(static_cast<double>(grid.width * grid.height));
  const auto out_x = detail::chirp_vector<Scalar>(grid.width, out_pitch.x, optics.wavelength, z, true, norm);
  const auto out_y = detail::chirp_vector<Scalar>(grid.height, out_pitch.y, optics.wavelength, z, true);

  AlignedBuffer<std::complex<Scalar>> buf(static_cast<std::size_t>(u1.size()));
  std::copy(u1.samples().data(), u1.samples().data() + u1.size(), buf.data());
  detail::apply_separable(buf.data(), grid.width, grid.height, in_x, in_y);
  Fft2d<Scalar>(static_cast<int>(grid.height), static_cast<int>(grid.width)).execute(buf.data(), direction_for(z));
  detail::apply_separable(buf.data(), grid.width, grid.height, out_x, out_y);
  ComplexGrid<Scalar> out = detail::ComplexMap<Scalar>(buf.data(), grid.height, grid.width);
  return ComplexField<Scalar>(std::move(out), out_pitch);
}

template <typename Scalar>
ComplexField<Scalar> bl_dsf_propagate(const ComplexField<Scalar>& u1, double z, double magnification,
                                      const OpticalParams& optics) {
  Workspace<Scalar> ws;
  return BlDsfPlan<Scalar>(GridSpec::of(u1), z, magnification, optics).apply(u1, ws);
}

/// Identity of a precomputed plan. ASM ignores magnification, so its key
/// always carries M = 1.
struct PlanKey {
  Method method = Method::BlDsf;
  GridSpec grid;
  double wavelength = 0.0;
  double z = 0.0;
  double magnification = 1.0;

  bool operator==(const PlanKey&) const = default;
};

/// Either propagator behind one value type. Copies share the immutable
/// precomputed state.
template <typename Scalar>
class DiffractionPlan {
 public:
  explicit DiffractionPlan(std::shared_ptr<const AsmPlan<Scalar>> plan, PlanKey key)
      : impl_(std::move(plan)), key_(key) {}
  explicit DiffractionPlan(std::shared_ptr<const BlDsfPlan<Scalar>> plan, PlanKey key)
      : impl_(std::move(plan)), key_(key) {}

  Method method() const noexcept { return key_.method; }
  const PlanKey& key() const noexcept { return key_; }
  const GridSpec& grid() const noexcept { return key_.grid; }

  Pitch output_pitch() const {
    return std::visit([](const auto& p) { return p->output_pitch(); }, impl_);
  }
  std::size_t working_set_bytes() const {
    return std::visit([](const auto& p) { return p->working_set_bytes(); }, impl_);
  }
  ComplexField<Scalar> apply(const ComplexField<Scalar>& u1, Workspace<Scalar>& ws) const {
    return std::visit([&](const auto& p) { return p->apply(u1, ws); }, impl_);
  }
  /// True when both handles refer to the same precomputed state.
  bool same_plan(const DiffractionPlan& other) const {
    return std::visit([](const auto& p) { return static_cast<const void*>(p.get()); }, impl_) ==
           std::visit([](const auto& p) { return static_cast<const void*>(p.get()); }, other.impl_);
  }

 private:
  std::variant<std::shared_ptr<const AsmPlan<Scalar>>, std::shared_ptr<const BlDsfPlan<Scalar>>> impl_;
  PlanKey key_;
};

inline PlanKey make_plan_key(Method method, const GridSpec& grid, double z, double magnification,
                             const OpticalParams& optics) {
  return {method, grid, optics.wavelength, z, method == Method::Asm ? 1.0 : magnification};
}

template <typename Scalar>
DiffractionPlan<Scalar> make_plan(Method method, const GridSpec& grid, double z, double magnification,
                                  const OpticalParams& optics) {
  const PlanKey key = make_plan_key(method, grid, z, magnification, optics);
  if (method == Method::Asm)
    return DiffractionPlan<Scalar>(std::make_shared<const AsmPlan<Scalar>>(grid, z, optics), key);
  return DiffractionPlan<Scalar>(std::make_shared<const BlDsfPlan<Scalar>>(grid, z, magnification, optics), key);
}

template <typename Scalar>
ComplexField<Scalar> apply_plan(const DiffractionPlan<Scalar>& plan, const ComplexField<Scalar>& u1) {
  Workspace<Scalar> ws;
  return plan.apply(u1, ws);
}

}  // namespace dhm
