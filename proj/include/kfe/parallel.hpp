#pragma once

namespace kfe {

/// Applies the KFE_THREADS environment cap (0 or unset = all cores).
/// Called once from the CLI; library users may call it directly.
void init_threads();

/// Thread count the parallel kernels will use.
int thread_count();

/// Explicit override, mainly for tests and benchmarks.
void set_thread_count(int n);

}  // namespace kfe
