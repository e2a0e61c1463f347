#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "sparsect/nn/tape.hpp"

namespace sparsect::nn {

enum class UpsampleMode { kNearest, kBilinear };

// Differentiable primitives. Image-like inputs are (1, C, H, W) tensors.

/// 2D convolution with an odd square kernel (Cout, Cin, k, k) and reflection
/// padding of k/2, so stride 1 preserves the spatial size and stride 2 halves it.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const std::optional<Var<T>>& bias, std::size_t stride = 1);

/// Normalizes each channel over its spatial extent to zero mean and unit
/// (biased) variance, then applies a per-channel scale and shift.
template <class T>
Var<T> channel_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-6);

template <class T>
Var<T> leaky_relu(const Var<T>& x, double slope);
template <class T>
Var<T> sigmoid(const Var<T>& x);

/// Doubles H and W. Bilinear uses half-pixel centers with edge clamping.
template <class T>
Var<T> upsample2x(const Var<T>& x, UpsampleMode mode);

/// Concatenates along the channel axis.
template <class T>
Var<T> concat(const Var<T>& a, const Var<T>& b);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> scale(const Var<T>& x, double factor);
template <class T>
Var<T> square(const Var<T>& x);
/// Mean of all elements, as a scalar.
template <class T>
Var<T> mean(const Var<T>& x);

/// Inverted dropout: zeroes each element with probability p and rescales
/// survivors by 1/(1-p). p == 0 is the identity.
template <class T>
Var<T> dropout(const Var<T>& x, double p, std::mt19937_64& rng);

template <class T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <class T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <class T>
Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }

/// Throws GraphError unless x is (1, C, H, W).
void require_image_tensor(const Shape& s, const char* op);

}  // namespace sparsect::nn
