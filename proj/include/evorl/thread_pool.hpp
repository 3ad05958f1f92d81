#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace evorl {

// Persistent worker pool executing one index-space job at a time. Workers
// pull indices dynamically, but callers must write results into per-index
// slots, so output order never depends on the schedule. workers = 1 runs
// inline on the caller thread.
class ThreadPool {
 public:
  explicit ThreadPool(int workers = 0);  // 0 = std::thread::hardware_concurrency()
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int workers() const { return workers_; }

  // Runs fn(i) for every i in [0, n); blocks until all complete. If any
  // invocations throw, rethrows the exception with the lowest index.
  void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  void worker_loop();

  int workers_ = 1;
  std::vector<std::thread> threads_;

  std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  bool stop_ = false;

  // Active job (guarded by mu_ for handoff; indices claimed via next_).
  const std::function<void(std::size_t)>* job_fn_ = nullptr;
  std::size_t job_n_ = 0;
  std::size_t next_ = 0;
  std::size_t in_flight_ = 0;
  std::uint64_t job_id_ = 0;
  std::vector<std::exception_ptr>* job_errors_ = nullptr;
};

// fn(i) -> T for i in [0, n), results in index order.
template <typename T, typename F>
std::vector<T> parallel_map_indexed(ThreadPool& pool, std::size_t n, F&& fn) {
  std::vector<T> out(n);
  pool.for_each_index(n, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace evorl
