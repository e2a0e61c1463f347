#include "sparsect/classical.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <vector>

#include "sparsect/projection.hpp"

namespace sparsect {
namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v) p <<= 1;
    return p;
}

class RowFilter {
public:
    RowFilter(std::size_t n, FbpFilter filter) : n_(n), size_(next_pow2(2 * n)) {
        real_ = fftw_alloc_real(size_);
        spec_ = fftw_alloc_complex(size_ / 2 + 1);
        {
            std::lock_guard lock(fftw_plan_mutex());
            fwd_ = fftw_plan_dft_r2c_1d(int(size_), real_, spec_, FFTW_ESTIMATE);
            inv_ = fftw_plan_dft_c2r_1d(int(size_), spec_, real_, FFTW_ESTIMATE);
        }
        // Ramp response from its band-limited spatial kernel: h[0] = 1/4,
        // h[k] = -1/(pi k)^2 for odd k, 0 for even k, wrapped circularly.
        std::fill(real_, real_ + size_, 0.0);
        real_[0] = 0.25;
        for (std::size_t k = 1; k < size_; k += 2) {
            const double d = double(std::min(k, size_ - k));
            real_[k] = -1.0 / (std::numbers::pi * std::numbers::pi * d * d);
        }
        fftw_execute(fwd_);
        response_.resize(size_ / 2 + 1);
        for (std::size_t k = 0; k < response_.size(); ++k) {
            response_[k] = 2.0 * spec_[k][0];
            if (filter == FbpFilter::kHann)
                response_[k] *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * double(k) / double(size_)));
        }
    }
    ~RowFilter() {
        std::lock_guard lock(fftw_plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(real_);
        fftw_free(spec_);
    }
    RowFilter(const RowFilter&) = delete;
    RowFilter& operator=(const RowFilter&) = delete;

    void apply(const double* in, double* out) {
        std::copy(in, in + n_, real_);
        std::fill(real_ + n_, real_ + size_, 0.0);
        fftw_execute(fwd_);
        for (std::size_t k = 0; k < response_.size(); ++k) {
            spec_[k][0] *= response_[k];
            spec_[k][1] *= response_[k];
        }
        fftw_execute(inv_);
        const double inv = 1.0 / double(size_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = real_[i] * inv;
    }

private:
    std::size_t n_, size_;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan fwd_ = nullptr, inv_ = nullptr;
    std::vector<double> response_;
};

void clip01(Image2D& x) {
    for (auto& v : x.values()) v = std::clamp(v, 0.0, 1.0);
}

void mask_support(Image2D& x, const Geometry& geom) {
    const auto& s = geom.support();
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!s[i]) x[i] = 0.0;
}

// Shared SART state so sart_tv can interleave sweeps with denoising.
class SartSolver {
public:
    SartSolver(const Sinogram& sino, const Geometry& geom, const SartConfig& cfg)
        : y_(sino), geom_(geom), cfg_(cfg), sums_(operator_sums(geom)) {
        cfg.validate();
        geom.check_sinogram(sino);
        const std::size_t n = geom.image_size(), nd = geom.num_detectors();
        if (cfg.mode == SartMode::kSequential) {
            angle_cols_.assign(geom.num_angles() * n * n, 0.0f);
            std::vector<double> ones(nd, 1.0), buf(n * n);
            for (std::size_t a = 0; a < geom.num_angles(); ++a) {
                std::fill(buf.begin(), buf.end(), 0.0);
                back_project_angle<double>(ones, geom, a, buf);
                for (std::size_t i = 0; i < n * n; ++i) angle_cols_[a * n * n + i] = static_cast<float>(buf[i]);
            }
        }
    }

    void sweep(Image2D& x) const {
        const std::size_t n = geom_.image_size(), nd = geom_.num_detectors(), na = geom_.num_angles();
        const double lam = cfg_.relaxation, eps = cfg_.epsilon;
        if (cfg_.mode == SartMode::kSequential) {
            std::vector<double> row(nd), upd(n * n);
            for (std::size_t a = 0; a < na; ++a) {
                forward_project_angle<double>(x.values(), geom_, a, row);
                for (std::size_t d = 0; d < nd; ++d) row[d] = (y_(a, d) - row[d]) / (sums_.row_sums(a, d) + eps);
                std::fill(upd.begin(), upd.end(), 0.0);
                back_project_angle<double>(row, geom_, a, upd);
                const float* cs = angle_cols_.data() + a * n * n;
                for (std::size_t i = 0; i < n * n; ++i) x[i] += lam * upd[i] / (double(cs[i]) + eps);
            }
        } else {
            Sinogram r = forward_project(x, geom_);
            for (std::size_t i = 0; i < r.size(); ++i) r[i] = (y_[i] - r[i]) / (sums_.row_sums[i] + eps);
            const Image2D upd = back_project(r, geom_);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += lam * upd[i] / (sums_.col_sums[i] + eps);
        }
        clip01(x);
    }

    Image2D initial() const {
        const std::size_t n = geom_.image_size();
        Image2D x(n);
        if (cfg_.initial) {
            geom_.check_image(*cfg_.initial);
            x = *cfg_.initial;
            mask_support(x, geom_);
        }
        return x;
    }

private:
    const Sinogram& y_;
    const Geometry& geom_;
    const SartConfig& cfg_;
    OperatorSums sums_;
    std::vector<float> angle_cols_;
};

}  // namespace

Image2D fbp(const Sinogram& sino, const Geometry& geom, const FbpConfig& cfg) {
    geom.check_sinogram(sino);
    const std::size_t nd = geom.num_detectors(), na = geom.num_angles();
    if (nd < 2) throw ConfigError("fbp: need at least 2 detectors");
    Sinogram filtered(na, nd);
    RowFilter filter(nd, cfg.filter);
    for (std::size_t a = 0; a < na; ++a) filter.apply(sino.values().data() + a * nd, &filtered(a, 0));
    Image2D out = back_project(filtered, geom);
    const double scale = std::numbers::pi / (2.0 * double(na));
    for (auto& v : out.values()) v *= scale;
    if (cfg.clip) clip01(out);
    return out;
}

void SartConfig::validate() const {
    if (iterations < 1) throw ConfigError("sart: iterations must be at least 1");
    if (!(relaxation > 0.0 && relaxation <= 2.0)) throw ConfigError("sart: relaxation must be in (0, 2]");
    if (!(epsilon > 0.0)) throw ConfigError("sart: epsilon must be positive");
}

Image2D sart(const Sinogram& sino, const Geometry& geom, const SartConfig& cfg) {
    SartSolver solver(sino, geom, cfg);
    Image2D x = solver.initial();
    for (std::size_t k = 0; k < cfg.iterations; ++k) solver.sweep(x);
    return x;
}

Image2D tv_denoise(const Image2D& image, double weight, std::size_t inner_iters) {
    if (!(weight >= 0.0)) throw ConfigError("tv_denoise: weight must be nonnegative");
    if (weight == 0.0 || inner_iters == 0) return image;
    const std::size_t h = image.rows(), w = image.cols();
    constexpr double tau = 0.25;
    // Dual field p = (px, py); the primal estimate is u = f + weight * div p.
    std::vector<double> px(h * w, 0.0), py(h * w, 0.0);
    Image2D u = image;
    auto primal = [&] {
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c) {
                const std::size_t i = r * w + c;
                double div = px[i] + py[i];
                if (c > 0) div -= px[i - 1];
                if (r > 0) div -= py[i - w];
                u[i] = image[i] + weight * div;
            }
    };
    for (std::size_t it = 0; it < inner_iters; ++it) {
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c) {
                const std::size_t i = r * w + c;
                const double gx = (c + 1 < w ? u[i + 1] - u[i] : 0.0) / weight;
                const double gy = (r + 1 < h ? u[i + w] - u[i] : 0.0) / weight;
                const double den = 1.0 + tau * std::sqrt(gx * gx + gy * gy);
                px[i] = (px[i] + tau * gx) / den;
                py[i] = (py[i] + tau * gy) / den;
            }
        primal();
    }
    return u;
}

void SartTvConfig::validate() const {
    sart.validate();
    if (!(tv_weight >= 0.0)) throw ConfigError("sart_tv: tv_weight must be nonnegative");
    if (!(effective_denoise_step() >= 0.0)) throw ConfigError("sart_tv: denoise_step must be nonnegative");
}

Image2D sart_tv(const Sinogram& sino, const Geometry& geom, const SartTvConfig& cfg) {
    cfg.validate();
    SartSolver solver(sino, geom, cfg.sart);
    Image2D x = solver.initial();
    const double step = cfg.effective_denoise_step();
    for (std::size_t k = 0; k < cfg.sart.iterations; ++k) {
        solver.sweep(x);
        if (step > 0.0) {
            x = tv_denoise(x, step, cfg.denoise_inner_iters);
            clip01(x);
            mask_support(x, geom);
        }
    }
    return x;
}

}  // namespace sparsect
