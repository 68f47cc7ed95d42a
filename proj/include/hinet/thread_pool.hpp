#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace hinet {

// Shared worker pool for data-parallel loops. Results must not depend on the
// thread count: parallel_for hands out disjoint index ranges and every index
// is processed exactly once with its own fixed-order computation, so outputs
// are bitwise identical for any HINET_THREADS value.
class ThreadPool {
  struct Job {
    const std::function<void(int64_t, int64_t)>* fn;
    int64_t count = 0;
    int64_t per = 0;
    std::atomic<int64_t> next{0};
    int remaining = 0;  // chunks not yet finished, guarded by pool mutex
  };

 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  // Calls run_range on contiguous chunks covering [0, count); the calling
  // thread participates and the call returns once every chunk is done.
  // Not reentrant.
  void parallel_for(int64_t count, const std::function<void(int64_t, int64_t)>& run_range) {
    if (count <= 0) return;
    if (size() == 1 || count == 1) {
      run_range(0, count);
      return;
    }
    auto job = std::make_shared<Job>();
    job->fn = &run_range;
    job->count = count;
    int64_t chunks = std::min<int64_t>(count, size());
    job->per = (count + chunks - 1) / chunks;
    job->remaining = static_cast<int>((count + job->per - 1) / job->per);
    {
      std::unique_lock<std::mutex> lock(mu_);
      current_ = job;
      ++generation_;
    }
    cv_work_.notify_all();
    work(*job);
    std::unique_lock<std::mutex> lock(mu_);
    cv_done_.wait(lock, [&] { return job->remaining == 0; });
    current_.reset();
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_work_.notify_all();
    for (auto& t : workers_) t.join();
  }

 private:
  ThreadPool() {
    int n = 0;
    if (const char* env = std::getenv("HINET_THREADS")) {
      n = std::atoi(env);
    }
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    for (int i = 0; i < n - 1; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_work_.wait(lock, [&] { return stop_ || generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        job = current_;
      }
      if (job) work(*job);
    }
  }

  void work(Job& job) {
    for (;;) {
      int64_t begin = job.next.fetch_add(1, std::memory_order_relaxed) * job.per;
      if (begin >= job.count) break;
      (*job.fn)(begin, std::min(begin + job.per, job.count));
      std::unique_lock<std::mutex> lock(mu_);
      if (--job.remaining == 0) cv_done_.notify_all();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_work_, cv_done_;
  std::shared_ptr<Job> current_;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

// Serial below this much total work; pool dispatch costs more than it saves.
constexpr int64_t kParallelWorkThreshold = 1 << 16;

template <typename F>
void parallel_for_rows(int64_t rows, int64_t work_per_row, F&& body) {
  auto& pool = ThreadPool::instance();
  if (rows < 2 || pool.size() == 1 || rows * work_per_row < kParallelWorkThreshold) {
    for (int64_t i = 0; i < rows; ++i) body(i);
    return;
  }
  std::function<void(int64_t, int64_t)> run = [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) body(i);
  };
  pool.parallel_for(rows, run);
}

}  // namespace hinet
