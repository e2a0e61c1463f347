#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsect/errors.hpp"

namespace sparsect {

/// Dense row-major 2D array of doubles.
class Array2D {
public:
    Array2D() = default;
    Array2D(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Array2D(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_)
            throw ConfigError("Array2D: value count does not match shape");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool same_shape(const Array2D& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const;

    friend bool operator==(const Array2D&, const Array2D&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Square reconstruction-domain image, intensities nominally in [0,1].
class Image2D : public Array2D {
public:
    Image2D() = default;
    explicit Image2D(std::size_t size, double fill = 0.0) : Array2D(size, size, fill) {}
    Image2D(std::size_t size, std::vector<double> values) : Array2D(size, size, std::move(values)) {}
    /// Accepts any square array; throws ConfigError otherwise.
    explicit Image2D(Array2D a);

    std::size_t image_size() const { return rows(); }
};

/// Projection measurements, one row per angle and one column per detector.
class Sinogram : public Array2D {
public:
    Sinogram() = default;
    Sinogram(std::size_t num_angles, std::size_t num_detectors, double fill = 0.0)
        : Array2D(num_angles, num_detectors, fill) {}
    Sinogram(std::size_t num_angles, std::size_t num_detectors, std::vector<double> values)
        : Array2D(num_angles, num_detectors, std::move(values)) {}
    explicit Sinogram(Array2D a) : Array2D(std::move(a)) {}

    std::size_t num_angles() const { return rows(); }
    std::size_t num_detectors() const { return cols(); }
};

double dot(const Array2D& a, const Array2D& b);
double norm2(const Array2D& a);

}  // namespace sparsect
