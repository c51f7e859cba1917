#pragma once

#include <cstddef>
#include <functional>

namespace btf::numeric {

// Runs `body` with at most `lanes` worker threads available to parallel_for.
void with_lanes(std::size_t lanes, const std::function<void()>& body);

// Lanes available to the calling context (1 outside with_lanes).
std::size_t current_lanes() noexcept;

std::size_t hardware_lanes() noexcept;

// Splits [begin, end) into chunks of at least `grain` indices. Each index is
// handled by exactly one call, so per-index arithmetic does not depend on the
// lane count.
void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace btf::numeric
