#pragma once

#include <cmath>
#include <cstddef>
#include <new>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsect::nn {

using Shape = std::vector<std::size_t>;

/// Thrown for shape mismatches while building a graph and for misuse of the
/// tape (e.g. calling backward on a non-scalar).
class GraphError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

namespace detail {
/// 64-byte aligned blocks. Large blocks are recycled through a per-thread
/// cache: a training step allocates the same sizes every iteration and fresh
/// pages are expensive to fault in.
void* aligned_acquire(std::size_t bytes);
void aligned_release(void* p, std::size_t bytes) noexcept;
}  // namespace detail

/// Allocator with a fixed 64-byte alignment. Vectorized reductions peel a
/// prefix that depends on buffer alignment, so a fixed alignment keeps the
/// summation order, and hence results, bitwise reproducible across runs.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) { return static_cast<T*>(detail::aligned_acquire(n * sizeof(T))); }
    void deallocate(T* p, std::size_t n) noexcept { detail::aligned_release(p, n * sizeof(T)); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major n-d array. Image-like tensors use (N=1, C, H, W).
template <class T>
class Tensor {
public:
    Tensor() : shape_{0} {}
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
    Tensor(Shape shape, std::span<const T> values) : shape_(std::move(shape)), data_(values.begin(), values.end()) {
        if (data_.size() != shape_size(shape_))
            throw GraphError("Tensor: " + std::to_string(data_.size()) + " values for shape " + shape_str(shape_));
    }
    Tensor(Shape shape, std::initializer_list<T> values) : Tensor(std::move(shape), std::span<const T>(values.begin(), values.size())) {}
    Tensor(Shape shape, const std::vector<T>& values) : Tensor(std::move(shape), std::span<const T>(values)) {}
    static Tensor scalar(T v) { return Tensor(Shape{}, {v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    T item() const {
        if (data_.size() != 1) throw GraphError("item() on tensor of shape " + shape_str(shape_));
        return data_[0];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    AlignedVector<T> data_;
};

}  // namespace sparsect::nn
