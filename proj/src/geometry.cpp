#include "sparsect/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sparsect {

Geometry::Geometry(std::size_t image_size, std::vector<double> angles)
    : image_size_(image_size), angles_(std::move(angles)) {
    if (image_size_ < 2) throw ConfigError("Geometry: image_size must be at least 2");
    if (angles_.empty()) throw ConfigError("Geometry: at least one angle is required");
    for (std::size_t i = 0; i < angles_.size(); ++i) {
        const double a = angles_[i];
        if (!(a >= 0.0 && a < std::numbers::pi))
            throw ConfigError("Geometry: angle " + std::to_string(a) + " outside [0, pi)");
        if (i > 0 && !(a > angles_[i - 1]))
            throw ConfigError("Geometry: angles must be strictly increasing");
    }
    const double c = (static_cast<double>(image_size_) - 1.0) / 2.0;
    const double r = static_cast<double>(image_size_) / 2.0;
    support_.resize(image_size_ * image_size_);
    for (std::size_t i = 0; i < image_size_; ++i) {
        const double y = c - static_cast<double>(i);
        for (std::size_t j = 0; j < image_size_; ++j) {
            const double x = static_cast<double>(j) - c;
            support_[i * image_size_ + j] = (x * x + y * y <= r * r) ? 1 : 0;
        }
    }
}

Geometry Geometry::parallel(std::size_t image_size, std::size_t num_angles) {
    if (num_angles == 0) throw ConfigError("Geometry: num_angles must be positive");
    std::vector<double> angles(num_angles);
    for (std::size_t k = 0; k < num_angles; ++k)
        angles[k] = static_cast<double>(k) * std::numbers::pi / static_cast<double>(num_angles);
    return Geometry(image_size, std::move(angles));
}

Geometry Geometry::with_angles(std::size_t image_size, std::vector<double> angles) {
    return Geometry(image_size, std::move(angles));
}

Image2D Geometry::support_image() const {
    Image2D m(image_size_);
    for (std::size_t i = 0; i < support_.size(); ++i) m[i] = support_[i];
    return m;
}

void Geometry::check_image(const Array2D& image) const {
    if (image.rows() != image_size_ || image.cols() != image_size_)
        throw ConfigError("image is " + std::to_string(image.rows()) + "x" + std::to_string(image.cols()) +
                          ", geometry expects " + std::to_string(image_size_) + "x" +
                          std::to_string(image_size_));
}

void Geometry::check_sinogram(const Array2D& sino) const {
    if (sino.rows() != num_angles() || sino.cols() != num_detectors())
        throw ConfigError("sinogram is " + std::to_string(sino.rows()) + "x" + std::to_string(sino.cols()) +
                          ", geometry expects " + std::to_string(num_angles()) + "x" +
                          std::to_string(num_detectors()));
}

}  // namespace sparsect
