#pragma once

#include <cstddef>
#include <list>
#include <mutex>
#include <utility>

#include "dhm/diffraction.hpp"

namespace dhm {

/// Exact-match LRU of diffraction plans. get_or_create is linearizable: the
/// lock is held while a missing plan is built, so concurrent callers asking
/// for the same key get the same plan.
template <typename Scalar>
class PlanCache {
 public:
  static constexpr std::size_t kDefaultCapacity = 8;

  explicit PlanCache(std::size_t capacity = kDefaultCapacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  DiffractionPlan<Scalar> get_or_create(Method method, const GridSpec& grid, double z, double magnification,
                                        const OpticalParams& optics) {
    const PlanKey key = make_plan_key(method, grid, z, magnification, optics);
    std::scoped_lock lock(mutex_);
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (it->key() == key) {
        ++hits_;
        entries_.splice(entries_.begin(), entries_, it);
        return entries_.front();
      }
    }
    ++misses_;
    entries_.push_front(make_plan<Scalar>(method, grid, z, magnification, optics));
    if (entries_.size() > capacity_) entries_.pop_back();
    return entries_.front();
  }

  bool contains(const PlanKey& key) const {
    std::scoped_lock lock(mutex_);
    for (const auto& p : entries_)
      if (p.key() == key) return true;
    return false;
  }

  std::size_t hits() const {
    std::scoped_lock lock(mutex_);
    return hits_;
  }
  std::size_t misses() const {
    std::scoped_lock lock(mutex_);
    return misses_;
  }
  std::size_t size() const {
    std::scoped_lock lock(mutex_);
    return entries_.size();
  }
  std::size_t capacity() const noexcept { return capacity_; }

  void clear() {
    std::scoped_lock lock(mutex_);
    entries_.clear();
  }

 private:
  mutable std::mutex mutex_;
  std::size_t capacity_;
  std::list<DiffractionPlan<Scalar>> entries_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace dhm
