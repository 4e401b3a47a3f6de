#include "liteseg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace liteseg {

namespace {

int default_threads() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("LITESEG_THREADS")) {
        int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return n;
}

int g_num_threads = default_threads();

thread_local bool t_in_parallel = false;

// A minimal persistent pool. Tasks are closures over a shared item counter;
// the calling thread participates as a worker.
class Pool {
  public:
    static Pool& instance() {
        // Intentionally leaked: workers block in wait() at exit and must not
        // be join()ed or destroyed.
        static Pool* pool = new Pool();
        return *pool;
    }

    void run(int workers, const std::function<void()>& body) {
        std::unique_lock<std::mutex> lock(mutex_);
        ensure_workers(workers - 1);
        // Every live worker joins every generation (notify_all wakes them
        // all); extra workers just find the item counter exhausted.
        body_ = &body;
        pending_ = static_cast<int>(threads_.size());
        ++generation_;
        cv_.notify_all();
        lock.unlock();

        body();

        lock.lock();
        done_cv_.wait(lock, [&] { return pending_ == 0; });
        body_ = nullptr;
    }

  private:
    Pool() = default;

    void ensure_workers(int n) {
        while (static_cast<int>(threads_.size()) < n) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        while (true) {
            const std::function<void()>* body = nullptr;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (body_ == nullptr) continue;  // generation raced past us
                body = body_;
            }
            (*body)();
            {
                std::lock_guard<std::mutex> lock(mutex_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void()>* body_ = nullptr;
    int pending_ = 0;
    std::uint64_t generation_ = 0;
};

}  // namespace

int num_threads() { return g_num_threads; }

void set_num_threads(int n) { g_num_threads = std::max(1, n); }

void parallel_for(std::int64_t n_items, const std::function<void(std::int64_t)>& fn) {
    if (n_items <= 0) return;
    int workers = std::min<std::int64_t>(g_num_threads, n_items);
    // Nested calls run inline; the pool is not reentrant.
    if (workers <= 1 || t_in_parallel) {
        for (std::int64_t i = 0; i < n_items; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto body = std::function<void()>([&] {
        t_in_parallel = true;
        while (true) {
            std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_items) break;
            fn(i);
        }
        t_in_parallel = false;
    });
    Pool::instance().run(workers, body);
}

}  // namespace liteseg
