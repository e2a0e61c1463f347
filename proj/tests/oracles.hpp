#pragma once

// Test-only reference implementations. Nothing here calls into the library's
// numerical kernels; they are written from the textbook definitions.

#include <cmath>
#include <cstddef>
#include <vector>

#include "sparsect/geometry.hpp"

namespace oracle {

/// Dense Joseph system matrix built from the hat-function form of linear
/// interpolation: weight = step_length * max(0, 1 - |sample - pixel|).
inline std::vector<std::vector<double>> joseph_matrix(const sparsect::Geometry& g) {
    const std::size_t n = g.image_size();
    const double c = (double(n) - 1.0) / 2.0;
    std::vector<std::vector<double>> m(g.num_angles() * n, std::vector<double>(n * n, 0.0));
    for (std::size_t a = 0; a < g.num_angles(); ++a) {
        const double th = g.angles()[a];
        const double cs = std::cos(th), sn = std::sin(th);
        for (std::size_t k = 0; k < n; ++k) {
            const double s = double(k) - c;
            auto& row = m[a * n + k];
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (!g.in_support(i, j)) continue;
                    double w = 0.0;
                    if (std::abs(sn) >= std::abs(cs)) {
                        const double x = double(j) - c;
                        const double fi = c - (s - x * cs) / sn;
                        w = std::max(0.0, 1.0 - std::abs(fi - double(i))) / std::abs(sn);
                    } else {
                        const double y = c - double(i);
                        const double fj = c + (s - y * sn) / cs;
                        w = std::max(0.0, 1.0 - std::abs(fj - double(j))) / std::abs(cs);
                    }
                    row[i * n + j] = w;
                }
            }
        }
    }
    return m;
}

/// SSIM evaluated window by window with an explicit 2D Gaussian weight
/// table, straight from the definition (no separable filtering).
inline double ssim_direct(const std::vector<double>& x, const std::vector<double>& y, std::size_t h, std::size_t w,
                          std::size_t win = 11, double sigma = 1.5, double k1 = 0.01, double k2 = 0.03,
                          double range = 1.0) {
    std::vector<double> wt(win * win);
    const double c = (double(win) - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
            const double r2 = (double(i) - c) * (double(i) - c) + (double(j) - c) * (double(j) - c);
            wt[i * win + j] = std::exp(-r2 / (2.0 * sigma * sigma));
            total += wt[i * win + j];
        }
    for (auto& v : wt) v /= total;
    const double c1 = std::pow(k1 * range, 2), c2 = std::pow(k2 * range, 2);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r + win <= h; ++r)
        for (std::size_t q = 0; q + win <= w; ++q) {
            double mx = 0, my = 0;
            for (std::size_t i = 0; i < win; ++i)
                for (std::size_t j = 0; j < win; ++j) {
                    mx += wt[i * win + j] * x[(r + i) * w + q + j];
                    my += wt[i * win + j] * y[(r + i) * w + q + j];
                }
            double vx = 0, vy = 0, cxy = 0;
            for (std::size_t i = 0; i < win; ++i)
                for (std::size_t j = 0; j < win; ++j) {
                    const double dx = x[(r + i) * w + q + j] - mx, dy = y[(r + i) * w + q + j] - my;
                    vx += wt[i * win + j] * dx * dx;
                    vy += wt[i * win + j] * dy * dy;
                    cxy += wt[i * win + j] * dx * dy;
                }
            sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return sum / double(count);
}

}  // namespace oracle
