#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sparsect/nn/tape.hpp"

namespace sparsect::nn {

/// Ordered, named collection of trainable tensors.
///
/// On disk a Params set is an SCT1 container with dtype tag 2: the header's
/// rows field holds the tensor count and cols the total value count, then the
/// float32 values of all tensors back to back, then one index entry per tensor:
///   u32 name length, name bytes (UTF-8), u32 rank, u32 dims[rank], u64 offset
/// where offset counts float32 values from the start of the payload.
template <class T>
class Params {
public:
    void add(std::string name, Tensor<T> value);

    std::size_t size() const { return tensors_.size(); }
    std::size_t count() const;  ///< total number of scalars
    const std::string& name(std::size_t i) const { return names_.at(i); }
    Tensor<T>& operator[](std::size_t i) { return tensors_.at(i); }
    const Tensor<T>& operator[](std::size_t i) const { return tensors_.at(i); }
    /// Index of `name`; throws std::out_of_range when absent.
    std::size_t index(const std::string& name) const;

    /// Records every tensor on `tape` as a differentiable leaf.
    std::vector<Var<T>> bind(Tape<T>& tape) const;

    void save(const std::filesystem::path& path) const;
    static Params load(const std::filesystem::path& path);

    friend bool operator==(const Params&, const Params&) = default;

private:
    std::vector<std::string> names_;
    std::vector<Tensor<T>> tensors_;
};

}  // namespace sparsect::nn
