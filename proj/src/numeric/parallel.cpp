#include "btf/numeric/parallel.hpp"

#include <thread>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace btf::numeric {

namespace {

thread_local std::size_t t_lanes = 1;

}  // namespace

void with_lanes(std::size_t lanes, const std::function<void()>& body) {
  if (lanes <= 1) {
    const auto saved = t_lanes;
    t_lanes = 1;
    body();
    t_lanes = saved;
    return;
  }
  tbb::task_arena arena(static_cast<int>(lanes));
  arena.execute([&] {
    const auto saved = t_lanes;
    t_lanes = lanes;
    body();
    t_lanes = saved;
  });
}

std::size_t current_lanes() noexcept { return t_lanes; }

std::size_t hardware_lanes() noexcept {
  const auto n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (end <= begin) return;
  if (t_lanes <= 1 || end - begin <= grain) {
    body(begin, end);
    return;
  }
  // Worker threads inherit no thread_local state; they only run `body`.
  tbb::parallel_for(tbb::blocked_range<std::size_t>(begin, end, grain == 0 ? 1 : grain),
                    [&](const tbb::blocked_range<std::size_t>& r) { body(r.begin(), r.end()); });
}

}  // namespace btf::numeric
