#include "sparsect/nn/adam.hpp"

#include <cmath>

namespace sparsect::nn {

template <class T>
AdamState<T> AdamState<T>::like(const Params<T>& params) {
    AdamState s;
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m.emplace_back(params[i].shape());
        s.v.emplace_back(params[i].shape());
    }
    return s;
}

template <class T>
void adam_step(Params<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const AdamSettings& s) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw GraphError("adam_step: parameter, gradient and state counts differ");
    const std::size_t t = ++state.t;
    const double c1 = 1.0 - std::pow(s.beta1, double(t));
    const double c2 = 1.0 - std::pow(s.beta2, double(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& p = params[k];
        const Tensor<T>& g = grads[k];
        if (g.shape() != p.shape() || state.m[k].shape() != p.shape())
            throw GraphError("adam_step: shape mismatch for " + params.name(k));
        T* __restrict pv = p.data();
        T* __restrict mv = state.m[k].data();
        T* __restrict vv = state.v[k].data();
        const T* __restrict gv = g.data();
        const double b1 = s.beta1, b2 = s.beta2, lr = s.lr, eps = s.eps;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = gv[i];
            const double m = b1 * mv[i] + (1.0 - b1) * gi;
            const double v = b2 * vv[i] + (1.0 - b2) * gi * gi;
            mv[i] = static_cast<T>(m);
            vv[i] = static_cast<T>(v);
            const double mhat = m / c1;
            const double vhat = v / c2;
            pv[i] = static_cast<T>(pv[i] - lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(Params<float>&, const std::vector<Tensor<float>>&, AdamState<float>&,
                               const AdamSettings&);
template void adam_step<double>(Params<double>&, const std::vector<Tensor<double>>&, AdamState<double>&,
                                const AdamSettings&);

}  // namespace sparsect::nn
