#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sparsect/array2d.hpp"

namespace sparsect {

/// Parallel-beam acquisition on a square grid with unit pixel pitch.
///
/// Pixel (row, col) has its center at x = col - (n-1)/2, y = (n-1)/2 - row.
/// Detector k sits at s = (k - (n-1)/2) * detector_pitch, and the ray of
/// angle theta through detector k is the line x cos(theta) + y sin(theta) = s.
/// Only pixels inside the inscribed circle (x^2 + y^2 <= (n/2)^2) take part in
/// projection; everything outside is treated as zero.
class Geometry {
public:
    Geometry() = default;

    /// num_angles angles at k*pi/num_angles, k = 0..num_angles-1.
    static Geometry parallel(std::size_t image_size, std::size_t num_angles);
    /// Arbitrary angles; must be strictly increasing and inside [0, pi).
    static Geometry with_angles(std::size_t image_size, std::vector<double> angles);

    std::size_t image_size() const { return image_size_; }
    std::size_t num_angles() const { return angles_.size(); }
    std::size_t num_detectors() const { return image_size_; }
    double detector_pitch() const { return 1.0; }
    const std::vector<double>& angles() const { return angles_; }

    bool in_support(std::size_t row, std::size_t col) const {
        return support_[row * image_size_ + col] != 0;
    }
    const std::vector<std::uint8_t>& support() const { return support_; }

    /// Mask image: 1 inside the inscribed circle, 0 outside.
    Image2D support_image() const;

    void check_image(const Array2D& image) const;
    void check_sinogram(const Array2D& sino) const;

    friend bool operator==(const Geometry& a, const Geometry& b) {
        return a.image_size_ == b.image_size_ && a.angles_ == b.angles_;
    }

private:
    Geometry(std::size_t image_size, std::vector<double> angles);

    std::size_t image_size_ = 0;
    std::vector<double> angles_;
    std::vector<std::uint8_t> support_;
};

}  // namespace sparsect
