#pragma once

#include <cstddef>
#include <functional>

namespace brownent {

/// Trajectories are processed in chunks of this size. Chunk boundaries, and
/// therefore any per-chunk partial sums, never depend on the thread count.
inline constexpr std::size_t kTrajectoryChunk = 1024;

/// 0 means "use the available hardware parallelism".
unsigned resolve_threads(unsigned requested) noexcept;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kTrajectoryChunk) noexcept {
  return (n + chunk - 1) / chunk;
}

/// Calls body(chunk_index, begin, end) for every chunk of [0, n), spread over
/// `threads` workers. The first exception thrown by a worker is rethrown.
void parallel_chunks(std::size_t n, unsigned threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                     std::size_t chunk = kTrajectoryChunk);

}  // namespace brownent
