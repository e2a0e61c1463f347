#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "sparsect/array2d.hpp"

namespace sparsect {

/// Ellipse in normalized image coordinates: x and y in [-1,1], y pointing up,
/// semi-axes in the same units (1 = half the image width).
struct EllipseSpec {
    double cx = 0.0;
    double cy = 0.0;
    double a = 0.5;
    double b = 0.5;
    double rotation = 0.0;  ///< radians, counter-clockwise
    double intensity = 1.0;

    /// Membership test for a point in normalized coordinates.
    bool contains(double x, double y) const;
};

/// Normalized coordinates of pixel (row, col) on an n x n grid.
double pixel_x(std::size_t col, std::size_t n);
double pixel_y(std::size_t row, std::size_t n);

/// Sums the intensity of every ellipse containing each pixel center.
Image2D rasterize(std::size_t n, const std::vector<EllipseSpec>& ellipses);

/// The ten ellipses of the modified (high-contrast) Shepp-Logan phantom.
std::vector<EllipseSpec> shepp_logan_ellipses();

/// Modified Shepp-Logan phantom, clipped to [0,1]. Requires n >= 16.
Image2D shepp_logan(std::size_t n);

struct CountRange {
    std::size_t lo = 5;
    std::size_t hi = 15;
};

/// Draws the ellipses used by random_ellipses: centers uniform in the unit
/// disc, semi-axes in [0.05, 0.4], rotation in [0, pi), intensity in [0.1, 0.6].
std::vector<EllipseSpec> random_ellipse_specs(std::uint64_t seed, CountRange count = {});

/// Additive composition of random_ellipse_specs(seed, count), clipped to
/// [0,1] and zeroed outside the inscribed circle. Requires n >= 16.
Image2D random_ellipses(std::size_t n, std::uint64_t seed, CountRange count = {});

enum class NonSquarePolicy { kReject, kResample };

struct HuOptions {
    double window_lo = -300.0;
    double window_hi = 300.0;
    /// Added to stored 16-bit PNG samples to obtain HU.
    double png_offset = -32768.0;
    NonSquarePolicy non_square = NonSquarePolicy::kReject;
};

/// Loads a CT slice and maps HU through the window to [0,1].
///
/// `.png` files are 16-bit grayscale with HU = sample + png_offset. Anything
/// else is raw little-endian int16 HU with a sidecar `<path>.dims` holding
/// "rows cols". Non-square slices are rejected or bilinearly resampled to
/// max(rows, cols) per side.
Image2D load_hu_slice(const std::filesystem::path& path, const HuOptions& opts = {});

/// Block average when the size divides evenly, bilinear otherwise.
Image2D resize_image(const Image2D& image, std::size_t size);

/// HU to [0,1] window map, clipped.
double window_hu(double hu, double lo = -300.0, double hi = 300.0);

enum class SignalPower { kMean, kPeak };

struct NoiseSpec {
    double snr_db = 39.0;
    std::uint64_t seed = 0;
    SignalPower power = SignalPower::kMean;
};

/// Adds i.i.d. Gaussian noise with sigma = sqrt(P * 10^(-snr_db/10)), where P
/// is mean(y^2) (or max(y^2) for kPeak). snr_db = +inf leaves the sinogram
/// unchanged. Throws DegenerateSignalError for an all-zero sinogram.
Sinogram add_awgn(const Sinogram& sino, const NoiseSpec& spec);

constexpr double kNoNoise = std::numeric_limits<double>::infinity();

}  // namespace sparsect
