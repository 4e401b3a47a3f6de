#pragma once

#include <cstdint>
#include <functional>

namespace liteseg {

// Number of worker threads used by parallel_for. Defaults to the smaller of
// hardware_concurrency and the LITESEG_THREADS environment variable.
int num_threads();
void set_num_threads(int n);

// Runs fn(item) for item in [0, n_items). Work is split into fixed-size units
// that do not depend on the worker count, and every unit writes only to
// locations owned by its item, so results are bit-identical for any thread
// count.
void parallel_for(std::int64_t n_items, const std::function<void(std::int64_t)>& fn);

}  // namespace liteseg
