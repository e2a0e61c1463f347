#include "sparsect/nn/tensor.hpp"

#include <unordered_map>

namespace sparsect::nn::detail {
namespace {

constexpr std::align_val_t kAlign{64};
constexpr std::size_t kMinPooled = std::size_t{1} << 14;
constexpr std::size_t kMaxCached = std::size_t{1} << 30;

struct BlockCache {
    std::unordered_map<std::size_t, std::vector<void*>> free;
    std::size_t cached = 0;

    ~BlockCache();
};

// Set once the thread's cache is gone; later releases bypass it.
thread_local bool cache_dead = false;

BlockCache::~BlockCache() {
    cache_dead = true;
    for (auto& [bytes, blocks] : free)
        for (void* p : blocks) ::operator delete(p, kAlign);
}

BlockCache& cache() {
    thread_local BlockCache c;
    return c;
}

}  // namespace

void* aligned_acquire(std::size_t bytes) {
    if (bytes >= kMinPooled && !cache_dead) {
        auto& c = cache();
        auto it = c.free.find(bytes);
        if (it != c.free.end() && !it->second.empty()) {
            void* p = it->second.back();
            it->second.pop_back();
            c.cached -= bytes;
            return p;
        }
    }
    return ::operator new(bytes, kAlign);
}

void aligned_release(void* p, std::size_t bytes) noexcept {
    if (!p) return;
    if (bytes >= kMinPooled && !cache_dead) {
        auto& c = cache();
        if (c.cached + bytes <= kMaxCached) {
            try {
                c.free[bytes].push_back(p);
                c.cached += bytes;
                return;
            } catch (...) {
            }
        }
    }
    ::operator delete(p, kAlign);
}

}  // namespace sparsect::nn::detail
