#pragma once

#include <cstddef>
#include <functional>

namespace matfun {

// Worker count: MATFUN_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Splits [0, count) into `chunks` contiguous ranges and runs body(begin, end,
// chunk) on up to worker_count() threads. Chunk boundaries depend only on
// `count` and `chunks`, so callers that reduce per-chunk results in chunk
// order get thread-count-independent answers.
void parallel_chunks(std::size_t count, std::size_t chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace matfun
