#include "opfdl/parallel.hpp"

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace opfdl {

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("OPF_DUALLEARN_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 1;
}

void parallel_for_workers(int n, int n_threads,
                          const std::function<void(int, int)>& fn) {
  if (n <= 0) return;
  if (n_threads <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(0, i);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto guarded = [&](int worker, int i) {
    try {
      fn(worker, i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

#ifdef _OPENMP
#pragma omp parallel num_threads(n_threads)
  {
    int worker = omp_get_thread_num();
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) guarded(worker, i);
  }
#else
  int workers = std::min(n_threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) guarded(w, i);
    });
  }
  for (auto& th : pool) th.join();
#endif

  if (first_error) std::rethrow_exception(first_error);
}

void parallel_for(int n, int n_threads, const std::function<void(int)>& fn) {
  parallel_for_workers(n, n_threads, [&fn](int, int i) { fn(i); });
}

}  // namespace opfdl
