#include "sparsect/array2d.hpp"

#include <cmath>
#include <numeric>

namespace sparsect {

bool Array2D::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Image2D::Image2D(Array2D a) : Array2D(std::move(a)) {
    if (rows() != cols()) throw ConfigError("Image2D: image must be square");
}

double dot(const Array2D& a, const Array2D& b) {
    if (!a.same_shape(b)) throw ConfigError("dot: shape mismatch");
    return std::inner_product(a.values().begin(), a.values().end(), b.values().begin(), 0.0);
}

double norm2(const Array2D& a) { return std::sqrt(dot(a, a)); }

}  // namespace sparsect
