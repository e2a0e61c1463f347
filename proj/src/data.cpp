#include "sparsect/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "sparsect/io.hpp"

namespace sparsect {
namespace {

void check_phantom_size(std::size_t n) {
    if (n < 16) throw ConfigError("phantom size must be at least 16, got " + std::to_string(n));
}

void clip_and_mask(Image2D& im) {
    const std::size_t n = im.image_size();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double x = pixel_x(c, n), y = pixel_y(r, n);
            double& v = im(r, c);
            v = (x * x + y * y <= 1.0) ? std::clamp(v, 0.0, 1.0) : 0.0;
        }
}

Array2D resample_bilinear(const Array2D& a, std::size_t rows, std::size_t cols) {
    Array2D out(rows, cols);
    auto coord = [](std::size_t i, std::size_t from, std::size_t to) {
        // Align pixel centers of the two grids.
        const double s = (double(i) + 0.5) * double(from) / double(to) - 0.5;
        return std::clamp(s, 0.0, double(from - 1));
    };
    for (std::size_t r = 0; r < rows; ++r) {
        const double sr = coord(r, a.rows(), rows);
        const std::size_t r0 = std::size_t(sr), r1 = std::min(r0 + 1, a.rows() - 1);
        const double fr = sr - double(r0);
        for (std::size_t c = 0; c < cols; ++c) {
            const double sc = coord(c, a.cols(), cols);
            const std::size_t c0 = std::size_t(sc), c1 = std::min(c0 + 1, a.cols() - 1);
            const double fc = sc - double(c0);
            out(r, c) = (1 - fr) * ((1 - fc) * a(r0, c0) + fc * a(r0, c1)) + fr * ((1 - fc) * a(r1, c0) + fc * a(r1, c1));
        }
    }
    return out;
}

Array2D resample_square(const Array2D& a) {
    const std::size_t n = std::max(a.rows(), a.cols());
    return resample_bilinear(a, n, n);
}

Array2D read_raw_hu(const std::filesystem::path& path) {
    auto dims_path = path;
    dims_path += ".dims";
    std::ifstream dims(dims_path);
    std::size_t rows = 0, cols = 0;
    if (!(dims >> rows >> cols) || rows == 0 || cols == 0)
        throw std::runtime_error("cannot read slice dimensions from " + dims_path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> bytes(rows * cols * 2);
    if (!in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size())))
        throw std::runtime_error(path.string() + " is shorter than " + std::to_string(rows) + "x" + std::to_string(cols) +
                                 " int16 samples");
    Array2D hu(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i) {
        const auto u = std::uint16_t(bytes[2 * i] | (std::uint16_t(bytes[2 * i + 1]) << 8));
        hu[i] = double(std::int16_t(u));
    }
    return hu;
}

}  // namespace

bool EllipseSpec::contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double u = (dx * c + dy * s) / a;
    const double v = (-dx * s + dy * c) / b;
    return u * u + v * v <= 1.0;
}

double pixel_x(std::size_t col, std::size_t n) { return (double(col) + 0.5) / double(n) * 2.0 - 1.0; }
double pixel_y(std::size_t row, std::size_t n) { return 1.0 - (double(row) + 0.5) / double(n) * 2.0; }

Image2D rasterize(std::size_t n, const std::vector<EllipseSpec>& ellipses) {
    Image2D im(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double x = pixel_x(c, n), y = pixel_y(r, n);
            double v = 0.0;
            for (const auto& e : ellipses)
                if (e.contains(x, y)) v += e.intensity;
            im(r, c) = v;
        }
    return im;
}

std::vector<EllipseSpec> shepp_logan_ellipses() {
    constexpr double deg = std::numbers::pi / 180.0;
    // cx, cy, a, b, rotation, intensity
    return {
        {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
        {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
        {0.22, 0.0, 0.11, 0.31, -18.0 * deg, -0.2},
        {-0.22, 0.0, 0.16, 0.41, 18.0 * deg, -0.2},
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
        {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
        {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
        {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
        {0.0, -0.606, 0.023, 0.023, 0.0, 0.1},
        {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
    };
}

Image2D shepp_logan(std::size_t n) {
    check_phantom_size(n);
    Image2D im = rasterize(n, shepp_logan_ellipses());
    for (auto& v : im.values()) v = std::clamp(v, 0.0, 1.0);
    return im;
}

std::vector<EllipseSpec> random_ellipse_specs(std::uint64_t seed, CountRange count) {
    if (count.lo < 1 || count.hi < count.lo) throw ConfigError("random_ellipses: invalid count range");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> n_dist(count.lo, count.hi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t k = n_dist(rng);
    std::vector<EllipseSpec> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        EllipseSpec e;
        const double rad = std::sqrt(unit(rng)), phi = 2.0 * std::numbers::pi * unit(rng);
        e.cx = rad * std::cos(phi);
        e.cy = rad * std::sin(phi);
        e.a = 0.05 + 0.35 * unit(rng);
        e.b = 0.05 + 0.35 * unit(rng);
        e.rotation = std::numbers::pi * unit(rng);
        e.intensity = 0.1 + 0.5 * unit(rng);
        out.push_back(e);
    }
    return out;
}

Image2D random_ellipses(std::size_t n, std::uint64_t seed, CountRange count) {
    check_phantom_size(n);
    Image2D im = rasterize(n, random_ellipse_specs(seed, count));
    clip_and_mask(im);
    return im;
}

Image2D resize_image(const Image2D& image, std::size_t size) {
    const std::size_t n = image.image_size();
    if (size == 0 || n == 0) throw ConfigError("resize_image: sizes must be positive");
    if (size == n) return image;
    if (n % size == 0) {
        const std::size_t f = n / size;
        Image2D out(size);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) out(r / f, c / f) += image(r, c);
        for (auto& v : out.values()) v /= double(f * f);
        return out;
    }
    return Image2D(resample_bilinear(image, size, size));
}

double window_hu(double hu, double lo, double hi) { return std::clamp((hu - lo) / (hi - lo), 0.0, 1.0); }

Image2D load_hu_slice(const std::filesystem::path& path, const HuOptions& opts) {
    if (!(opts.window_hi > opts.window_lo)) throw ConfigError("load_hu_slice: window must have hi > lo");
    Array2D hu;
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".png") {
        const auto png = io::read_png_gray(path);
        hu = Array2D(png.rows, png.cols);
        for (std::size_t i = 0; i < hu.size(); ++i) hu[i] = double(png.values[i]) + opts.png_offset;
    } else {
        hu = read_raw_hu(path);
    }
    if (hu.rows() != hu.cols()) {
        if (opts.non_square == NonSquarePolicy::kReject)
            throw ConfigError("load_hu_slice: " + path.string() + " is " + std::to_string(hu.rows()) + "x" +
                              std::to_string(hu.cols()) + ", expected a square slice");
        hu = resample_square(hu);
    }
    Image2D out(hu.rows());
    for (std::size_t i = 0; i < hu.size(); ++i) out[i] = window_hu(hu[i], opts.window_lo, opts.window_hi);
    return out;
}

Sinogram add_awgn(const Sinogram& sino, const NoiseSpec& spec) {
    if (std::isnan(spec.snr_db)) throw ConfigError("add_awgn: snr_db is NaN");
    if (spec.snr_db == kNoNoise) return sino;
    double power = 0.0;
    for (double v : sino.values())
        power = spec.power == SignalPower::kMean ? power + v * v : std::max(power, v * v);
    if (spec.power == SignalPower::kMean) power /= double(sino.size());
    if (power == 0.0) throw DegenerateSignalError("add_awgn: sinogram has zero signal power");
    const double sigma = std::sqrt(power * std::pow(10.0, -spec.snr_db / 10.0));
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, sigma);
    Sinogram out = sino;
    for (auto& v : out.values()) v += noise(rng);
    return out;
}

}  // namespace sparsect
