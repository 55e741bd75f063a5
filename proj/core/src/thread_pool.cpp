#include "flowbench/thread_pool.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

namespace flowbench {

namespace {

class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void set_size(int n) {
    std::lock_guard<std::mutex> guard(run_mutex_);
    n = std::max(1, n);
    if (n == size_) return;
    stop_workers();
    size_ = n;
    start_workers();
  }

  int size() const { return size_; }

  void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (size_ <= 1 || n == 1) {
      fn(0, n);
      return;
    }
    std::lock_guard<std::mutex> guard(run_mutex_);
    std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(size_), n);
    std::size_t per = n / chunks;
    std::size_t rem = n % chunks;
    std::size_t pending = chunks;
    std::mutex done_mutex;
    std::condition_variable done_cv;
    {
      std::lock_guard<std::mutex> lk(queue_mutex_);
      std::size_t begin = 0;
      for (std::size_t c = 0; c < chunks; ++c) {
        std::size_t end = begin + per + (c < rem ? 1 : 0);
        tasks_.push_back([&fn, begin, end, &pending, &done_mutex, &done_cv] {
          fn(begin, end);
          std::lock_guard<std::mutex> dlk(done_mutex);
          if (--pending == 0) done_cv.notify_one();
        });
        begin = end;
      }
    }
    queue_cv_.notify_all();
    // The calling thread drains tasks too instead of just blocking.
    for (;;) {
      std::function<void()> task;
      {
        std::lock_guard<std::mutex> lk(queue_mutex_);
        if (tasks_.empty()) break;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
    }
    std::unique_lock<std::mutex> dlk(done_mutex);
    done_cv.wait(dlk, [&] { return pending == 0; });
  }

 private:
  Pool() { start_workers(); }

  ~Pool() { stop_workers(); }

  void start_workers() {
    stopping_ = false;
    for (int i = 0; i < size_ - 1; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  void stop_workers() {
    {
      std::lock_guard<std::mutex> lk(queue_mutex_);
      stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& t : threads_) t.join();
    threads_.clear();
  }

  void worker_loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lk(queue_mutex_);
        queue_cv_.wait(lk, [&] { return stopping_ || !tasks_.empty(); });
        if (stopping_ && tasks_.empty()) return;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
    }
  }

  int size_ = 1;
  std::vector<std::thread> threads_;
  std::mutex run_mutex_;
  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
};

}  // namespace

void set_thread_count(int n) { Pool::instance().set_size(n); }

int thread_count() { return Pool::instance().size(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  Pool::instance().run(n, fn);
}

}  // namespace flowbench
