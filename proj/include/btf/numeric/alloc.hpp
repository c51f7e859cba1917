#pragma once

#include <atomic>
#include <cstddef>
#include <new>

namespace btf::numeric {

// Process-wide byte accounting for tensor storage. Every tensor buffer goes
// through TrackingAllocator, so live() is the activation footprint whenever
// parameters are excluded by taking a baseline first.
struct AllocStats {
  std::size_t allocated = 0;  // cumulative
  std::size_t freed = 0;      // cumulative
  std::size_t live = 0;
  std::size_t peak = 0;
};

AllocStats alloc_stats() noexcept;
// Sets peak to the current live count.
void reset_peak() noexcept;

namespace detail {
void note_alloc(std::size_t bytes) noexcept;
void note_free(std::size_t bytes) noexcept;
}  // namespace detail

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    auto* p = static_cast<T*>(::operator new(n * sizeof(T)));
    detail::note_alloc(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    detail::note_free(n * sizeof(T));
    ::operator delete(p);
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

}  // namespace btf::numeric
