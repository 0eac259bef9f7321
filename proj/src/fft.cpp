#include "dhm/fft.hpp"

#include <atomic>
#include <new>

namespace dhm {
namespace {

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};
std::mutex g_planner_mutex;

}  // namespace

MemoryStats memory_stats() { return {g_current.load(), g_peak.load()}; }

void reset_peak_memory() { g_peak.store(g_current.load()); }

namespace detail {

void* counted_alloc(std::size_t bytes) {
  if (bytes == 0) return nullptr;
  void* p = fftw_malloc(bytes);
  if (p == nullptr) throw std::bad_alloc();
  const std::size_t now = g_current.fetch_add(bytes) + bytes;
  std::size_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
  return p;
}

void counted_free(void* ptr, std::size_t bytes) noexcept {
  fftw_free(ptr);
  g_current.fetch_sub(bytes);
}

std::unique_lock<std::mutex> lock_planner() { return std::unique_lock(g_planner_mutex); }

}  // namespace detail
}  // namespace dhm
