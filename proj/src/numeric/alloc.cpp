#include "btf/numeric/alloc.hpp"

#include <mutex>

namespace btf::numeric {

namespace {

std::mutex g_mutex;
AllocStats g_stats;

}  // namespace

AllocStats alloc_stats() noexcept {
  std::lock_guard lock(g_mutex);
  return g_stats;
}

void reset_peak() noexcept {
  std::lock_guard lock(g_mutex);
  g_stats.peak = g_stats.live;
}

namespace detail {

void note_alloc(std::size_t bytes) noexcept {
  std::lock_guard lock(g_mutex);
  g_stats.allocated += bytes;
  g_stats.live += bytes;
  if (g_stats.live > g_stats.peak) g_stats.peak = g_stats.live;
}

void note_free(std::size_t bytes) noexcept {
  std::lock_guard lock(g_mutex);
  g_stats.freed += bytes;
  g_stats.live -= bytes;
}

}  // namespace detail

}  // namespace btf::numeric
