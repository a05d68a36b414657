// Copyright 2026-present the lider authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lider {

using VectorId = std::uint32_t;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(got)) {}
};

/// Raised while reading vector files, index files or relevance files.
class LoadError : public Error {
 public:
  using Error::Error;
};

struct ScoredHit {
  VectorId id = 0;
  float score = 0.0f;

  friend bool operator==(const ScoredHit &, const ScoredHit &) = default;
};

/// Rank order used everywhere: higher score first, smaller id on ties.
inline bool ranks_before(const ScoredHit &a, const ScoredHit &b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Keeps the best min(k, n) hits in rank order.
inline void keep_top(std::vector<ScoredHit> &hits, std::size_t k) {
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k),
                      hits.end(), ranks_before);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), ranks_before);
  }
}

inline std::size_t ceil_log2(std::size_t n) {
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  return bits;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Worker budget: LIDER_WORKERS if set, else hardware parallelism.
inline std::size_t default_worker_budget() {
  if (const char *env = std::getenv("LIDER_WORKERS")) {
    char *end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Fixed-size pool for fork-join loops. The calling thread takes part in
/// every loop, so a budget of 1 spawns no threads and nested loops cannot
/// deadlock. Every index is visited exactly once; results must be written
/// to per-index slots so the outcome is independent of scheduling.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t budget = default_worker_budget())
      : budget_(std::max<std::size_t>(budget, 1)) {
    for (std::size_t i = 1; i < budget_; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  WorkerPool(const WorkerPool &) = delete;
  WorkerPool &operator=(const WorkerPool &) = delete;

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto &t : threads_) t.join();
  }

  std::size_t budget() const { return budget_; }

  void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn) {
    if (n == 0) return;
    if (budget_ == 1 || n == 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    auto job = std::make_shared<Job>();
    job->fn = &fn;
    job->n = n;
    {
      std::lock_guard<std::mutex> lock(mu_);
      jobs_.push_back(job);
    }
    cv_.notify_all();
    run(*job);
    {
      std::unique_lock<std::mutex> lock(job->mu);
      job->done_cv.wait(lock, [&] { return job->finished == job->n; });
    }
    std::lock_guard<std::mutex> lock(mu_);
    jobs_.erase(std::remove(jobs_.begin(), jobs_.end(), job), jobs_.end());
    if (job->error) std::rethrow_exception(job->error);
  }

 private:
  struct Job {
    const std::function<void(std::size_t)> *fn = nullptr;
    std::size_t n = 0;
    std::atomic<std::size_t> next{0};
    std::size_t finished = 0;
    std::exception_ptr error;
    std::mutex mu;
    std::condition_variable done_cv;
  };

  static void run(Job &job) {
    for (;;) {
      std::size_t i = job.next.fetch_add(1);
      if (i >= job.n) return;
      std::exception_ptr err;
      try {
        (*job.fn)(i);
      } catch (...) {
        err = std::current_exception();
      }
      std::lock_guard<std::mutex> lock(job.mu);
      if (err && !job.error) job.error = err;
      if (++job.finished == job.n) job.done_cv.notify_all();
    }
  }

  void worker_loop() {
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] {
          if (stop_) return true;
          for (auto &j : jobs_) {
            if (j->next.load() < j->n) return true;
          }
          return false;
        });
        if (stop_) return;
        for (auto &j : jobs_) {
          if (j->next.load() < j->n) {
            job = j;
            break;
          }
        }
      }
      if (job) run(*job);
    }
  }

  std::size_t budget_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::shared_ptr<Job>> jobs_;
  bool stop_ = false;
};

}  // namespace lider
