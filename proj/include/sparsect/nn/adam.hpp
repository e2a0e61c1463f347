#pragma once

#include <vector>

#include "sparsect/nn/params.hpp"

namespace sparsect::nn {

struct AdamSettings {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::size_t t = 0;  ///< number of completed steps

    /// Zero moments shaped like `params`.
    static AdamState like(const Params<T>& params);
};

/// One bias-corrected Adam update. Advances state.t, then applies step t = state.t.
template <class T>
void adam_step(Params<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const AdamSettings& settings);

}  // namespace sparsect::nn
