#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hmx {

/// Fixed-size worker pool with fork-join semantics.
///
/// run(count, fn) invokes fn(i) for i in [0, count) and returns once every
/// index has completed; this is the barrier between scheduling phases.
/// Index assignment is dynamic, so correctness (and bit-reproducibility)
/// relies on the caller giving each index a single-writer output region.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned workers) : target_workers_(workers == 0 ? 1 : workers) {
    for (unsigned i = 1; i < target_workers_; ++i)
      threads_.emplace_back([this] { worker_loop(); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  unsigned workers() const { return target_workers_; }

  void run(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (target_workers_ == 1 || count == 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    {
      std::lock_guard lk(m_);
      job_ = &fn;
      job_count_ = count;
      next_.store(0, std::memory_order_relaxed);
      pending_ = count;
      ++generation_;
    }
    cv_.notify_all();
    drain();  // calling thread participates
    std::unique_lock lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  void drain() {
    const std::function<void(std::size_t)>* job;
    std::size_t count;
    {
      std::lock_guard lk(m_);
      job = job_;
      count = job_count_;
    }
    if (!job) return;
    std::size_t finished = 0;
    while (true) {
      const std::size_t i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) break;
      (*job)(i);
      ++finished;
    }
    if (finished > 0) {
      std::lock_guard lk(m_);
      pending_ -= finished;
      if (pending_ == 0) done_cv_.notify_all();
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock lk(m_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      drain();
    }
  }

  unsigned target_workers_;
  std::vector<std::thread> threads_;
  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t job_count_ = 0;
  std::atomic<std::size_t> next_{0};
  std::size_t pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

inline unsigned default_worker_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

}  // namespace hmx
