#include "sparsect/projection.hpp"

#include <algorithm>
#include <cmath>

namespace sparsect {
namespace {

// Calls visit(pixel_index, weight) for every pixel touched by the ray through
// detector `det` at angle index `a`.
template <class Visit>
inline void trace_ray(const Geometry& geom, std::size_t a, std::size_t det, Visit&& visit) {
    const auto n = static_cast<long>(geom.image_size());
    const double c = (static_cast<double>(n) - 1.0) / 2.0;
    const double theta = geom.angles()[a];
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double s = (static_cast<double>(det) - c) * geom.detector_pitch();
    const auto& support = geom.support();

    if (std::abs(sn) >= std::abs(cs)) {
        // Mostly horizontal ray: one sample per column.
        const double w = 1.0 / std::abs(sn);
        for (long j = 0; j < n; ++j) {
            const double x = static_cast<double>(j) - c;
            const double fi = c - (s - x * cs) / sn;
            const double fl = std::floor(fi);
            const auto i0 = static_cast<long>(fl);
            const double t = fi - fl;
            if (i0 >= 0 && i0 < n) {
                const auto p = static_cast<std::size_t>(i0 * n + j);
                if (support[p]) visit(p, w * (1.0 - t));
            }
            if (i0 + 1 >= 0 && i0 + 1 < n) {
                const auto p = static_cast<std::size_t>((i0 + 1) * n + j);
                if (support[p]) visit(p, w * t);
            }
        }
    } else {
        // Mostly vertical ray: one sample per row.
        const double w = 1.0 / std::abs(cs);
        for (long i = 0; i < n; ++i) {
            const double y = c - static_cast<double>(i);
            const double fj = c + (s - y * sn) / cs;
            const double fl = std::floor(fj);
            const auto j0 = static_cast<long>(fl);
            const double t = fj - fl;
            if (j0 >= 0 && j0 < n) {
                const auto p = static_cast<std::size_t>(i * n + j0);
                if (support[p]) visit(p, w * (1.0 - t));
            }
            if (j0 + 1 >= 0 && j0 + 1 < n) {
                const auto p = static_cast<std::size_t>(i * n + j0 + 1);
                if (support[p]) visit(p, w * t);
            }
        }
    }
}

void check_sizes(std::size_t image, std::size_t sino, const Geometry& geom) {
    if (image != geom.image_size() * geom.image_size())
        throw ConfigError("projection: image buffer does not match geometry");
    if (sino != geom.num_angles() * geom.num_detectors())
        throw ConfigError("projection: sinogram buffer does not match geometry");
}

}  // namespace

template <class T>
void forward_project_angle(std::span<const T> image, const Geometry& geom, std::size_t angle,
                           std::span<T> row) {
    if (image.size() != geom.image_size() * geom.image_size() || row.size() != geom.num_detectors())
        throw ConfigError("forward_project_angle: buffer size mismatch");
    for (std::size_t k = 0; k < geom.num_detectors(); ++k) {
        double acc = 0.0;
        trace_ray(geom, angle, k, [&](std::size_t p, double w) { acc += w * static_cast<double>(image[p]); });
        row[k] = static_cast<T>(acc);
    }
}

template <class T>
void back_project_angle(std::span<const T> row, const Geometry& geom, std::size_t angle,
                        std::span<T> image) {
    if (image.size() != geom.image_size() * geom.image_size() || row.size() != geom.num_detectors())
        throw ConfigError("back_project_angle: buffer size mismatch");
    for (std::size_t k = 0; k < geom.num_detectors(); ++k) {
        const double r = static_cast<double>(row[k]);
        if (r == 0.0) continue;
        trace_ray(geom, angle, k, [&](std::size_t p, double w) { image[p] += static_cast<T>(w * r); });
    }
}

template <class T>
void forward_project(std::span<const T> image, const Geometry& geom, std::span<T> sino) {
    check_sizes(image.size(), sino.size(), geom);
    const std::size_t nd = geom.num_detectors();
    for (std::size_t a = 0; a < geom.num_angles(); ++a)
        forward_project_angle<T>(image, geom, a, sino.subspan(a * nd, nd));
}

template <class T>
void back_project(std::span<const T> sino, const Geometry& geom, std::span<T> image) {
    check_sizes(image.size(), sino.size(), geom);
    std::fill(image.begin(), image.end(), T(0));
    const std::size_t nd = geom.num_detectors();
    for (std::size_t a = 0; a < geom.num_angles(); ++a)
        back_project_angle<T>(sino.subspan(a * nd, nd), geom, a, image);
}

template void forward_project<float>(std::span<const float>, const Geometry&, std::span<float>);
template void forward_project<double>(std::span<const double>, const Geometry&, std::span<double>);
template void back_project<float>(std::span<const float>, const Geometry&, std::span<float>);
template void back_project<double>(std::span<const double>, const Geometry&, std::span<double>);
template void forward_project_angle<float>(std::span<const float>, const Geometry&, std::size_t,
                                           std::span<float>);
template void forward_project_angle<double>(std::span<const double>, const Geometry&, std::size_t,
                                            std::span<double>);
template void back_project_angle<float>(std::span<const float>, const Geometry&, std::size_t,
                                        std::span<float>);
template void back_project_angle<double>(std::span<const double>, const Geometry&, std::size_t,
                                         std::span<double>);

Sinogram forward_project(const Image2D& image, const Geometry& geom) {
    geom.check_image(image);
    Sinogram sino(geom.num_angles(), geom.num_detectors());
    forward_project<double>(image.values(), geom, sino.values());
    return sino;
}

Image2D back_project(const Sinogram& sino, const Geometry& geom) {
    geom.check_sinogram(sino);
    Image2D image(geom.image_size());
    back_project<double>(sino.values(), geom, image.values());
    return image;
}

OperatorSums operator_sums(const Geometry& geom) {
    const Image2D ones_image(geom.image_size(), 1.0);
    const Sinogram ones_sino(geom.num_angles(), geom.num_detectors(), 1.0);
    return {forward_project(ones_image, geom), back_project(ones_sino, geom)};
}

}  // namespace sparsect
