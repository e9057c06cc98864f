#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bdt {

/// Running first and second moments of i.i.d. samples.
struct MeanAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t n = 0;

  void add(double v) noexcept {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  void merge(const MeanAccumulator& o) noexcept {
    sum += o.sum;
    sum_sq += o.sum_sq;
    n += o.n;
  }
  double mean() const noexcept { return n == 0 ? 0.0 : sum / static_cast<double>(n); }
  double std_error() const noexcept {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - m * m);
    return std::sqrt(var * static_cast<double>(n) / static_cast<double>(n - 1) /
                     static_cast<double>(n));
  }
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits n samples into fixed-size batches, runs `work(batch, count)` for each
/// (concurrently when threads > 1) and merges the per-batch accumulators in
/// batch order. The batch layout depends only on (n, batch_size), so the
/// result is identical for any thread count.
template <typename Acc, typename Work>
Acc run_batches(std::uint64_t n, std::uint64_t batch_size, unsigned threads, Work&& work) {
  batch_size = std::max<std::uint64_t>(1, batch_size);
  const std::uint64_t batches = (n + batch_size - 1) / batch_size;
  std::vector<Acc> parts(static_cast<std::size_t>(batches));
  const auto count_of = [&](std::uint64_t b) {
    return std::min(batch_size, n - b * batch_size);
  };

  threads = static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(threads), batches));
  if (threads <= 1) {
    for (std::uint64_t b = 0; b < batches; ++b) parts[b] = work(b, count_of(b));
  } else {
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::uint64_t b = next++; b < batches; b = next++) {
          try {
            parts[b] = work(b, count_of(b));
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  Acc total{};
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace bdt
