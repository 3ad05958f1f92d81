#include "evorl/thread_pool.hpp"

#include <algorithm>

namespace evorl {

ThreadPool::ThreadPool(int workers) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers_ = std::max(workers, 1);
  if (workers_ == 1) return;
  threads_.reserve(workers_);
  for (int i = 0; i < workers_; ++i) threads_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void ThreadPool::for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers_ == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(n);
  {
    std::lock_guard<std::mutex> lock(mu_);
    job_fn_ = &fn;
    job_n_ = n;
    next_ = 0;
    in_flight_ = 0;
    job_errors_ = &errors;
    ++job_id_;
  }
  work_cv_.notify_all();

  {
    std::unique_lock<std::mutex> lock(mu_);
    done_cv_.wait(lock, [&] { return job_fn_ == nullptr && in_flight_ == 0; });
    job_errors_ = nullptr;
  }

  // Deterministic error selection: lowest failing index wins.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void ThreadPool::worker_loop() {
  std::unique_lock<std::mutex> lock(mu_);
  std::uint64_t last_done = 0;
  for (;;) {
    work_cv_.wait(lock, [&] { return stop_ || (job_fn_ != nullptr && job_id_ != last_done); });
    if (stop_) return;
    const std::uint64_t my_job = job_id_;
    const auto* fn = job_fn_;
    auto* errors = job_errors_;
    while (job_id_ == my_job && job_fn_ != nullptr && next_ < job_n_) {
      const std::size_t i = next_++;
      ++in_flight_;
      lock.unlock();
      try {
        (*fn)(i);
      } catch (...) {
        (*errors)[i] = std::current_exception();
      }
      lock.lock();
      --in_flight_;
      if (job_id_ == my_job && job_fn_ != nullptr && next_ >= job_n_) {
        job_fn_ = nullptr;  // every index claimed; waiters drain on in_flight_
      }
      if (job_fn_ == nullptr && in_flight_ == 0) done_cv_.notify_all();
    }
    last_done = my_job;
  }
}

}  // namespace evorl
