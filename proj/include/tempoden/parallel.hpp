#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace tempoden {

namespace detail {

// Persistent worker pool for splitting convolution output rows across
// threads. Each call partitions [begin,end) into contiguous chunks, one per
// worker plus the caller. Per-element reduction order inside a chunk is
// unchanged, so results are bit-identical for every thread count.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    void resize(int threads) {
        std::lock_guard<std::mutex> outer(run_mutex_);
        stop_workers();
        threads_ = std::max(1, threads);
        start_workers(threads_ - 1);
    }

    int threads() const { return threads_; }

    void run(int begin, int end, const std::function<void(int, int)>& body) {
        if (end <= begin) return;
        const int span = end - begin;
        const int parts = std::min(threads_, span);
        if (parts <= 1) {
            body(begin, end);
            return;
        }
        std::lock_guard<std::mutex> outer(run_mutex_);
        const int chunk = (span + parts - 1) / parts;
        {
            std::unique_lock<std::mutex> lk(mutex_);
            body_ = &body;
            task_begin_ = begin;
            task_end_ = end;
            task_chunk_ = chunk;
            next_chunk_.store(1, std::memory_order_relaxed);
            pending_ = threads_ - 1; // every worker checks in once per generation
            ++generation_;
        }
        cv_.notify_all();
        body(begin, std::min(end, begin + chunk)); // caller takes chunk 0
        std::unique_lock<std::mutex> lk(mutex_);
        done_cv_.wait(lk, [&] { return pending_ == 0; });
        body_ = nullptr;
    }

    ~ThreadPool() { stop_workers(); }

private:
    ThreadPool() = default;

    void start_workers(int n) {
        quit_ = false;
        for (int i = 0; i < n; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    void stop_workers() {
        {
            std::lock_guard<std::mutex> lk(mutex_);
            quit_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
        workers_.clear();
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int, int)>* body = nullptr;
            int begin = 0, end = 0, chunk = 0;
            {
                std::unique_lock<std::mutex> lk(mutex_);
                cv_.wait(lk, [&] { return quit_ || generation_ != seen; });
                seen = generation_;
                if (quit_) return;
                body = body_;
                begin = task_begin_;
                end = task_end_;
                chunk = task_chunk_;
            }
            if (!body) continue;
            const int idx = next_chunk_.fetch_add(1, std::memory_order_relaxed);
            const int b = begin + idx * chunk;
            if (b < end) (*body)(b, std::min(end, b + chunk));
            {
                std::lock_guard<std::mutex> lk(mutex_);
                if (--pending_ == 0) done_cv_.notify_one();
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::mutex run_mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(int, int)>* body_ = nullptr;
    int task_begin_ = 0, task_end_ = 0, task_chunk_ = 0;
    std::atomic<int> next_chunk_{0};
    int pending_ = 0;
    std::uint64_t generation_ = 0;
    bool quit_ = false;
    int threads_ = 1;
};

} // namespace detail

inline void set_num_threads(int n) { detail::ThreadPool::instance().resize(n); }
inline int num_threads() { return detail::ThreadPool::instance().threads(); }

// Runs body(chunk_begin, chunk_end) over a static partition of [begin,end).
inline void parallel_for(int begin, int end, const std::function<void(int, int)>& body) {
    detail::ThreadPool::instance().run(begin, end, body);
}

} // namespace tempoden
