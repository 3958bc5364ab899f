#include "npr/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace npr {

int worker_count() {
  if (const char* env = std::getenv("NPR_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n > 64 ? 64 : n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(int n_chunks, const std::function<void(int)>& job) {
  const int workers = worker_count() < n_chunks ? worker_count() : n_chunks;
  if (workers <= 1) {
    for (int c = 0; c < n_chunks; ++c) job(c);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto run = [&] {
    for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
      try {
        job(c);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (std::thread& t : pool) t.join();
  if (failed.load()) std::rethrow_exception(error);
}

}  // namespace npr
