#pragma once

#include <cstddef>
#include <cstdint>

namespace psa {

// Selects between the OpenMP kernel and its serial reference. Both run the
// same per-row body in the same order, so their results are bit-identical;
// the serial path is kept for tests and for the benchmark baseline.
enum class Exec { kSerial, kParallel };

// Calls fn(i) for i in [0, n). Iterations must be independent.
template <class Fn>
void for_each_index(std::size_t n, Exec exec, Fn&& fn) {
  if (exec == Exec::kSerial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
}

// Number of OpenMP threads (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace psa
