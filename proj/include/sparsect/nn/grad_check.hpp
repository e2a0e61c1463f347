#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sparsect/nn/tape.hpp"

namespace sparsect::nn {

/// Builds a scalar from the given input vars on their tape.
using ScalarFn = std::function<Var<double>(std::span<const Var<double>>)>;

struct GradCheckOptions {
    double h = 1e-5;
    /// Coordinates probed per input; 0 probes every coordinate.
    std::size_t max_samples_per_input = 0;
    std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients of f against central differences.
///
/// Returns max |analytic - numeric| over the probed coordinates of all inputs,
/// divided by the largest gradient magnitude seen anywhere (floored at 1e-12).
double grad_check(const ScalarFn& f, const std::vector<Tensor<double>>& inputs, const GradCheckOptions& opts = {});

}  // namespace sparsect::nn
