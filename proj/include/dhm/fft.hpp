#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <type_traits>
#include <utility>

#include <fftw3.h>

namespace dhm {

/// Bytes currently held by AlignedBuffer instances and the high-water mark
/// since the last reset. Used to account plan and workspace memory.
struct MemoryStats {
  std::size_t current_bytes = 0;
  std::size_t peak_bytes = 0;
};

MemoryStats memory_stats();
void reset_peak_memory();

namespace detail {
void* counted_alloc(std::size_t bytes);
void counted_free(void* ptr, std::size_t bytes) noexcept;
}  // namespace detail

/// SIMD-aligned heap array (fftw_malloc) whose size is tracked by
/// memory_stats(). Move-only.
template <typename T>
class AlignedBuffer {
  static_assert(std::is_trivially_copyable_v<T>);

 public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t count)
      : data_(static_cast<T*>(detail::counted_alloc(count * sizeof(T)))), size_(count) {}

  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
  AlignedBuffer(AlignedBuffer&& other) noexcept
      : data_(std::exchange(other.data_, nullptr)), size_(std::exchange(other.size_, 0)) {}
  AlignedBuffer& operator=(AlignedBuffer&& other) noexcept {
    if (this != &other) {
      release();
      data_ = std::exchange(other.data_, nullptr);
      size_ = std::exchange(other.size_, 0);
    }
    return *this;
  }
  ~AlignedBuffer() { release(); }

  T* data() noexcept { return data_; }
  const T* data() const noexcept { return data_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t bytes() const noexcept { return size_ * sizeof(T); }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  std::span<T> span() noexcept { return {data_, size_}; }
  std::span<const T> span() const noexcept { return {data_, size_}; }

 private:
  void release() noexcept {
    if (data_ != nullptr) detail::counted_free(data_, bytes());
    data_ = nullptr;
    size_ = 0;
  }

  T* data_ = nullptr;
  std::size_t size_ = 0;
};

enum class FftDirection { Forward, Inverse };

/// Direction of the transform implied by the sign of a propagation distance.
inline FftDirection direction_for(double signed_distance) {
  return signed_distance >= 0.0 ? FftDirection::Forward : FftDirection::Inverse;
}

template <typename Scalar>
struct FftTraits;

template <>
struct FftTraits<double> {
  using plan_type = fftw_plan;
  using complex_type = fftw_complex;
  static plan_type plan_2d(int rows, int cols, complex_type* in, complex_type* out, int sign,
                           unsigned flags) {
    return fftw_plan_dft_2d(rows, cols, in, out, sign, flags);
  }
  static void execute(plan_type plan, complex_type* in, complex_type* out) {
    fftw_execute_dft(plan, in, out);
  }
  static void destroy(plan_type plan) { fftw_destroy_plan(plan); }
  static void* malloc(std::size_t bytes) { return fftw_malloc(bytes); }
  static void free(void* p) { fftw_free(p); }
};

template <>
struct FftTraits<float> {
  using plan_type = fftwf_plan;
  using complex_type = fftwf_complex;
  static plan_type plan_2d(int rows, int cols, complex_type* in, complex_type* out, int sign,
                           unsigned flags) {
    return fftwf_plan_dft_2d(rows, cols, in, out, sign, flags);
  }
  static void execute(plan_type plan, complex_type* in, complex_type* out) {
    fftwf_execute_dft(plan, in, out);
  }
  static void destroy(plan_type plan) { fftwf_destroy_plan(plan); }
  static void* malloc(std::size_t bytes) { return fftwf_malloc(bytes); }
  static void free(void* p) { fftwf_free(p); }
};

namespace detail {
// The FFTW planner is not reentrant; execution is.
std::unique_lock<std::mutex> lock_planner();
}  // namespace detail

/// Unnormalized in-place 2D complex FFT over a row-major rows x cols grid.
/// Holds both directions. Executing on any fftw_malloc'd buffer of the
/// planned size is safe from several threads at once.
template <typename Scalar>
class Fft2d {
  using Traits = FftTraits<Scalar>;
  using fcomplex = typename Traits::complex_type;

 public:
  Fft2d(int rows, int cols) : rows_(rows), cols_(cols) {
    // FFTW_ESTIMATE never touches the planning buffer, so its pages are not
    // committed and it stays out of the memory accounting.
    const std::size_t bytes = static_cast<std::size_t>(rows) * cols * sizeof(fcomplex);
    auto* scratch = static_cast<fcomplex*>(Traits::malloc(bytes));
    auto lock = detail::lock_planner();
    forward_ = Traits::plan_2d(rows, cols, scratch, scratch, FFTW_FORWARD, FFTW_ESTIMATE);
    inverse_ = Traits::plan_2d(rows, cols, scratch, scratch, FFTW_BACKWARD, FFTW_ESTIMATE);
    Traits::free(scratch);
  }
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;
  ~Fft2d() {
    auto lock = detail::lock_planner();
    Traits::destroy(forward_);
    Traits::destroy(inverse_);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  void execute(std::complex<Scalar>* data, FftDirection direction) const {
    auto* p = reinterpret_cast<fcomplex*>(data);
    Traits::execute(direction == FftDirection::Forward ? forward_ : inverse_, p, p);
  }

 private:
  int rows_;
  int cols_;
  typename Traits::plan_type forward_{};
  typename Traits::plan_type inverse_{};
};

}  // namespace dhm
