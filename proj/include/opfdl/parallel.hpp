#pragma once

#include <functional>

namespace opfdl {

// Worker-count resolution: explicit flag > OPF_DUALLEARN_THREADS > 1.
// flag_value <= 0 means "not set on the command line".
int resolve_threads(int flag_value);

// Runs fn(0..n-1). With n_threads > 1 iterations are distributed statically;
// fn must only write to per-index slots. The first exception thrown by any
// iteration is rethrown on the calling thread.
void parallel_for(int n, int n_threads, const std::function<void(int)>& fn);

// Same contract, but the body also receives the worker index
// (0..n_threads-1) so it can use per-worker scratch state (tapes, buffers).
void parallel_for_workers(int n, int n_threads,
                          const std::function<void(int worker, int i)>& fn);

}  // namespace opfdl
