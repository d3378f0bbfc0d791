#pragma once

#include <cstdint>
#include <functional>

namespace batchlab {

// Worker-thread budget. Reads SDL_THREADS once on first use; defaults to the
// hardware concurrency. Every parallel loop in this library partitions work
// into ranges whose results do not depend on how many threads execute them,
// so changing the budget never changes any computed value.
int worker_threads();
void set_worker_threads(int n);

// Runs fn(begin, end) over disjoint sub-ranges of [begin, end), possibly on
// several threads. fn must only write state owned by its own range.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace batchlab
