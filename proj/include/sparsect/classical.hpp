#pragma once

#include <cstddef>
#include <optional>

#include "sparsect/array2d.hpp"
#include "sparsect/geometry.hpp"

namespace sparsect {

enum class FbpFilter { kRamp, kHann };

struct FbpConfig {
    FbpFilter filter = FbpFilter::kRamp;
    /// Clip the result to [0,1]. Turn off to get the linear operator.
    bool clip = true;
};

/// Filtered back-projection. Each detector row is zero-padded to the next
/// power of two >= 2 * num_detectors, filtered by |f| (optionally
/// Hann-windowed) in the frequency domain, back-projected with the adjoint of
/// the forward projector and scaled by pi / (2 * num_angles).
Image2D fbp(const Sinogram& sino, const Geometry& geom, const FbpConfig& cfg = {});

enum class SartMode {
    /// One update per angle in acquisition order, normalized by that angle's
    /// row and column sums.
    kSequential,
    /// One update per sweep using all angles at once, normalized by the full
    /// row and column sums.
    kSimultaneous,
};

struct SartConfig {
    std::size_t iterations = 40;
    double relaxation = 0.15;
    std::optional<Image2D> initial;
    double epsilon = 1e-8;
    SartMode mode = SartMode::kSequential;

    void validate() const;
};

/// SART with the image clipped to [0,1] after every sweep.
Image2D sart(const Sinogram& sino, const Geometry& geom, const SartConfig& cfg = {});

/// Chambolle's dual projection algorithm for
///   min_u ||u - f||^2 / 2 + weight * TV(u).
/// weight 0 returns the input unchanged.
Image2D tv_denoise(const Image2D& image, double weight, std::size_t inner_iters = 20);

struct SartTvConfig {
    SartConfig sart;
    double tv_weight = 0.9;
    /// Per-sweep denoising strength; defaults to tv_weight * 0.02.
    std::optional<double> denoise_step;
    std::size_t denoise_inner_iters = 20;

    double effective_denoise_step() const { return denoise_step.value_or(tv_weight * 0.02); }
    void validate() const;
};

/// Alternates one SART sweep with one tv_denoise pass (then clip to [0,1] and
/// zero outside the support). With a zero denoise step this is exactly sart().
Image2D sart_tv(const Sinogram& sino, const Geometry& geom, const SartTvConfig& cfg = {});

}  // namespace sparsect
