#pragma once

#include <cstddef>
#include <functional>

namespace ksg {

/// Worker count used by kernel assembly and probe loops (default 1).
void set_thread_count(unsigned n);
unsigned thread_count() noexcept;

/// Calls body(begin, end) on contiguous chunks of [0, n). Chunks are written
/// by disjoint index ranges only, so results do not depend on the thread
/// count. Exceptions from workers are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ksg
