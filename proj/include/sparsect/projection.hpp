#pragma once

#include <span>

#include "sparsect/array2d.hpp"
#include "sparsect/geometry.hpp"

namespace sparsect {

// Discrete parallel-beam Radon transform using Joseph's method: each ray steps
// one pixel at a time along its dominant axis and linearly interpolates
// between the two neighbouring pixels across it. back_project applies the
// exact transpose of the same weights.

Sinogram forward_project(const Image2D& image, const Geometry& geom);
Image2D back_project(const Sinogram& sino, const Geometry& geom);

struct OperatorSums {
    Sinogram row_sums;  ///< A * 1
    Image2D col_sums;   ///< A^T * 1
};
OperatorSums operator_sums(const Geometry& geom);

/// Raw kernels over row-major buffers. `image` has image_size^2 entries and
/// `sino` num_angles * num_detectors entries; outputs are overwritten.
template <class T>
void forward_project(std::span<const T> image, const Geometry& geom, std::span<T> sino);
template <class T>
void back_project(std::span<const T> sino, const Geometry& geom, std::span<T> image);

/// Single-angle variants used by SART. `row` holds num_detectors entries.
/// back_project_angle accumulates into `image` instead of overwriting.
template <class T>
void forward_project_angle(std::span<const T> image, const Geometry& geom, std::size_t angle,
                           std::span<T> row);
template <class T>
void back_project_angle(std::span<const T> row, const Geometry& geom, std::size_t angle,
                        std::span<T> image);

}  // namespace sparsect
