#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dhm {

using Index = Eigen::Index;

template <typename Scalar>
using ComplexGrid = Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RealGrid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Thrown when a field, image or parameter set violates its invariants.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Physical sampling pitch in meters per pixel.
struct Pitch {
  double x = 0.0;
  double y = 0.0;

  static constexpr Pitch square(double p) { return {p, p}; }
  bool operator==(const Pitch&) const = default;
};

struct OpticalParams {
  double wavelength = 650e-9;  // meters

  void validate() const {
    if (!(wavelength > 0.0) || !std::isfinite(wavelength))
      throw InvalidArgument("wavelength must be positive and finite");
  }
  bool operator==(const OpticalParams&) const = default;
};

namespace detail {
inline void check_grid(Index width, Index height, Pitch pitch) {
  if (width < 1 || height < 1) throw InvalidArgument("grid dimensions must be at least 1x1");
  if (!(pitch.x > 0.0) || !(pitch.y > 0.0) || !std::isfinite(pitch.x) || !std::isfinite(pitch.y))
    throw InvalidArgument("sampling pitch must be positive and finite");
}
}  // namespace detail

/// A row-major grid of complex samples tagged with its sampling pitch.
/// Rows run along y (downward), columns along x (rightward).
template <typename Scalar>
class ComplexField {
 public:
  using scalar_type = Scalar;
  using value_type = std::complex<Scalar>;
  using grid_type = ComplexGrid<Scalar>;

  ComplexField(grid_type samples, Pitch pitch) : samples_(std::move(samples)), pitch_(pitch) {
    detail::check_grid(samples_.cols(), samples_.rows(), pitch_);
  }

  static ComplexField zeros(Index width, Index height, Pitch pitch) {
    detail::check_grid(width, height, pitch);
    return ComplexField(grid_type::Zero(height, width), pitch);
  }

  static ComplexField constant(Index width, Index height, Pitch pitch, value_type value) {
    detail::check_grid(width, height, pitch);
    return ComplexField(grid_type::Constant(height, width, value), pitch);
  }

  Index width() const noexcept { return samples_.cols(); }
  Index height() const noexcept { return samples_.rows(); }
  Index size() const noexcept { return samples_.size(); }
  Pitch pitch() const noexcept { return pitch_; }
  const grid_type& samples() const noexcept { return samples_; }
  value_type operator()(Index row, Index col) const { return samples_(row, col); }

  bool all_finite() const { return samples_.abs().allFinite(); }

  /// Sum of |u|^2.
  double energy() const { return static_cast<double>(samples_.abs2().template cast<double>().sum()); }

 private:
  grid_type samples_;
  Pitch pitch_;
};

/// A row-major grid of real values (intensity, amplitude, phase or display
/// levels) with its sampling pitch.
template <typename Scalar>
class RealImage {
 public:
  using scalar_type = Scalar;
  using grid_type = RealGrid<Scalar>;

  RealImage(grid_type values, Pitch pitch) : values_(std::move(values)), pitch_(pitch) {
    detail::check_grid(values_.cols(), values_.rows(), pitch_);
  }

  static RealImage constant(Index width, Index height, Pitch pitch, Scalar value) {
    detail::check_grid(width, height, pitch);
    return RealImage(grid_type::Constant(height, width, value), pitch);
  }

  Index width() const noexcept { return values_.cols(); }
  Index height() const noexcept { return values_.rows(); }
  Index size() const noexcept { return values_.size(); }
  Pitch pitch() const noexcept { return pitch_; }
  const grid_type& values() const noexcept { return values_; }
  Scalar operator()(Index row, Index col) const { return values_(row, col); }

  bool all_finite() const { return values_.allFinite(); }
  double mean() const { return static_cast<double>(values_.template cast<double>().mean()); }

 private:
  grid_type values_;
  Pitch pitch_;
};

using Field = ComplexField<double>;
using Image = RealImage<double>;

/// Per-pixel modulus |u|.
template <typename Scalar>
RealImage<Scalar> amplitude(const ComplexField<Scalar>& field) {
  return RealImage<Scalar>(field.samples().abs(), field.pitch());
}

/// Principal argument in [-pi, pi). +pi folds onto -pi and zero-magnitude
/// samples map to 0.
template <typename Scalar>
Scalar wrapped_arg(std::complex<Scalar> v) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  if (v.real() == Scalar(0) && v.imag() == Scalar(0)) return Scalar(0);
  const Scalar a = std::atan2(v.imag(), v.real());
  return a >= pi ? -pi : a;
}

template <typename Scalar>
RealImage<Scalar> phase(const ComplexField<Scalar>& field) {
  return RealImage<Scalar>(field.samples().unaryExpr([](std::complex<Scalar> v) { return wrapped_arg(v); }),
                           field.pitch());
}

enum class DisplayMode { Amplitude, Phase };

/// Linear-interpolated percentile (q in [0, 1]) of a sample set.
inline double percentile(std::vector<double>& values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of empty set");
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double v_lo = values[lo];
  if (hi == lo) return v_lo;
  // Smallest element above the lo-th is the hi-th order statistic.
  const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(hi), values.end());
  return v_lo + (pos - static_cast<double>(lo)) * (v_hi - v_lo);
}

inline constexpr double kDisplayLowPercentile = 0.001;
inline constexpr double kDisplayHighPercentile = 0.999;

/// Maps an amplitude or phase image onto 8-bit gray levels (0..255, stored as
/// integral values). Amplitude uses the 0.1/99.9 percentile window; phase maps
/// [-pi, pi) linearly. A flat amplitude image renders mid-gray.
template <typename Scalar>
RealImage<double> to_display(const RealImage<Scalar>& img, DisplayMode mode) {
  RealGrid<double> out(img.height(), img.width());
  const auto& v = img.values();
  if (mode == DisplayMode::Phase) {
    constexpr double pi = std::numbers::pi;
    for (Index i = 0; i < v.size(); ++i) {
      const double level = std::round((static_cast<double>(v.data()[i]) + pi) / (2.0 * pi) * 255.0);
      out.data()[i] = std::clamp(level, 0.0, 255.0);
    }
    return RealImage<double>(std::move(out), img.pitch());
  }

  std::vector<double> scratch(v.data(), v.data() + v.size());
  const double lo = percentile(scratch, kDisplayLowPercentile);
  const double hi = percentile(scratch, kDisplayHighPercentile);
  if (!(hi > lo)) {
    out.setConstant(128.0);
    return RealImage<double>(std::move(out), img.pitch());
  }
  const double scale = 255.0 / (hi - lo);
  for (Index i = 0; i < v.size(); ++i) {
    const double level = std::round((static_cast<double>(v.data()[i]) - lo) * scale);
    out.data()[i] = std::clamp(level, 0.0, 255.0);
  }
  return RealImage<double>(std::move(out), img.pitch());
}

/// Offset that centers an extent of `inner` inside `outer`.
constexpr Index centered_offset(Index outer, Index inner) { return (outer - inner) / 2; }

/// Zero-pads a field to a larger grid with the original centered.
template <typename Scalar>
ComplexField<Scalar> embed(const ComplexField<Scalar>& field, Index new_width, Index new_height) {
  if (new_width < field.width() || new_height < field.height())
    throw InvalidArgument("embed target must not be smaller than the field");
  ComplexGrid<Scalar> out = ComplexGrid<Scalar>::Zero(new_height, new_width);
  out.block(centered_offset(new_height, field.height()), centered_offset(new_width, field.width()),
            field.height(), field.width()) = field.samples();
  return ComplexField<Scalar>(std::move(out), field.pitch());
}

/// Extracts the centered window of a field. Inverse of embed.
template <typename Scalar>
ComplexField<Scalar> crop(const ComplexField<Scalar>& field, Index new_width, Index new_height) {
  if (new_width < 1 || new_height < 1 || new_width > field.width() || new_height > field.height())
    throw InvalidArgument("crop target must be within the field");
  ComplexGrid<Scalar> out = field.samples().block(centered_offset(field.height(), new_height),
                                                  centered_offset(field.width(), new_width), new_height,
                                                  new_width);
  return ComplexField<Scalar>(std::move(out), field.pitch());
}

template <typename Scalar>
RealImage<Scalar> crop(const RealImage<Scalar>& img, Index new_width, Index new_height) {
  if (new_width < 1 || new_height < 1 || new_width > img.width() || new_height > img.height())
    throw InvalidArgument("crop target must be within the image");
  RealGrid<Scalar> out = img.values().block(centered_offset(img.height(), new_height),
                                            centered_offset(img.width(), new_width), new_height, new_width);
  return RealImage<Scalar>(std::move(out), img.pitch());
}

/// ||a - b||_2 / ||b||_2 over the sample grids.
template <typename Derived, typename OtherDerived>
double relative_l2(const Eigen::ArrayBase<Derived>& a, const Eigen::ArrayBase<OtherDerived>& b) {
  const double num = std::sqrt(static_cast<double>((a - b).abs2().sum()));
  const double den = std::sqrt(static_cast<double>(b.abs2().sum()));
  return den > 0.0 ? num / den : num;
}

template <typename Scalar>
double relative_l2(const ComplexField<Scalar>& a, const ComplexField<Scalar>& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw InvalidArgument("field dimensions differ");
  return relative_l2(a.samples(), b.samples());
}

}  // namespace dhm
