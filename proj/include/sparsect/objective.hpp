#pragma once

#include <cstddef>

#include "sparsect/array2d.hpp"
#include "sparsect/geometry.hpp"
#include "sparsect/nn/tape.hpp"

namespace sparsect {

/// Weights of the measurement, SSIM and TV terms of the hybrid loss.
struct LossWeights {
    double w_meas = 1.0;
    double w_ssim = 0.0;
    double w_tv = 0.0;

    /// Throws ConfigError unless all weights are finite, nonnegative and sum
    /// to 1 within 1e-9.
    void validate() const;
    /// Divides by the sum. Throws if any weight is negative or the sum is zero.
    LossWeights normalized() const;
    /// normalized() when `normalize` is set, otherwise validate() and return *this.
    LossWeights resolve(bool normalize) const;

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Rectangle on an image: top-left corner plus extent.
struct Roi {
    std::size_t row0 = 0;
    std::size_t col0 = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

struct SsimParams {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

/// Mean local SSIM over all fully contained Gaussian windows.
/// Throws ConfigError on shape mismatch or an image smaller than the window.
double ssim(const Image2D& x, const Image2D& ref, const SsimParams& params = {});

/// 10 log10(peak^2 / MSE). Identical images give +infinity.
double psnr(const Image2D& x, const Image2D& ref, double peak = 1.0);

/// db_factor * log10(|mean_f - mean_b| / std_b), population std. Zero
/// contrast gives -infinity. Throws DegenerateRoiError when std_b is 0 and
/// ConfigError when a region is empty or leaves the image.
double cnr(const Image2D& x, const Roi& feature, const Roi& background, double db_factor = 20.0);

/// Isotropic total variation: sum over pixels of the forward-difference
/// gradient magnitude, with differences past the last row/column taken as 0.
double tv_norm(const Array2D& x);

// Differentiable terms. Image arguments are (1,1,n,n) tensors.

/// mean((A x - y)^2) over all sinogram entries.
template <class T>
nn::Var<T> measurement_loss(const nn::Var<T>& x, const Sinogram& y, const Geometry& geom);

/// 1 - ssim(x, x0) with x0 held fixed.
template <class T>
nn::Var<T> ssim_loss(const nn::Var<T>& x, const Image2D& x0, const SsimParams& params = {});

/// Smoothed isotropic TV, mean over pixels of sqrt(dx^2 + dy^2 + eps).
/// Averages the forward-difference form over the image and its 180 degree
/// rotation so the boundary convention is symmetric.
template <class T>
nn::Var<T> tv_loss(const nn::Var<T>& x, double eps = 1e-8);

template <class T>
struct LossTerms {
    nn::Var<T> total;
    nn::Var<T> meas;
    nn::Var<T> ssim;
    nn::Var<T> tv;
};

/// w_meas * meas + w_ssim * ssim + w_tv * tv. Components with zero weight are
/// still evaluated but do not take part in differentiation.
template <class T>
LossTerms<T> total_loss(const nn::Var<T>& x, const Sinogram& y, const Geometry& geom, const Image2D& x0,
                        const LossWeights& w, bool normalize = false);

}  // namespace sparsect
