#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace relner {

// Runs fn(i) for i in [0,n) on up to max_concurrency threads. Results must
// be written into pre-sized slots by index so output never depends on the
// schedule. If any invocation throws, the exception with the lowest index
// is rethrown after all workers finish.
template <typename Fn>
void parallel_for(size_t n, int max_concurrency, Fn&& fn) {
  if (n == 0) {
    return;
  }
  size_t workers = static_cast<size_t>(max_concurrency < 1 ? 1 : max_concurrency);
  if (workers > n) {
    workers = n;
  }
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) {
          return;
        }
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  for (const auto& err : errors) {
    if (err) {
      std::rethrow_exception(err);
    }
  }
}

}  // namespace relner
