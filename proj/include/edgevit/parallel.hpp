#pragma once

#include <cstdint>
#include <functional>

namespace edgevit {

/// Worker count used by kernels that split independent output rows.
/// Defaults to 1, which is the bitwise-reproducible verification mode.
void set_num_threads(int n);
int num_threads() noexcept;

/// Calls body(begin_i, end_i) over disjoint chunks covering [begin, end).
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace edgevit
