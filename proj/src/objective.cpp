#include "sparsect/objective.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sparsect/nn/ops.hpp"
#include "sparsect/projection_node.hpp"

namespace sparsect {
namespace {

std::vector<double> gaussian_taps(std::size_t win, double sigma) {
    std::vector<double> g(win);
    const double c = (double(win) - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < win; ++i) {
        g[i] = std::exp(-(double(i) - c) * (double(i) - c) / (2.0 * sigma * sigma));
        total += g[i];
    }
    for (auto& v : g) v /= total;
    return g;
}

// Separable correlation keeping only fully contained windows:
// (h, w) -> (h-k+1, w-k+1).
void filter_valid(const double* in, std::size_t h, std::size_t w, const std::vector<double>& g, double* out) {
    const std::size_t k = g.size(), oh = h - k + 1, ow = w - k + 1;
    std::vector<double> tmp(h * ow);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += g[j] * in[r * w + c + j];
            tmp[r * ow + c] = acc;
        }
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i) acc += g[i] * tmp[(r + i) * ow + c];
            out[r * ow + c] = acc;
        }
}

// Transpose of filter_valid; accumulates into `in_grad` (h*w).
void filter_valid_adjoint(const double* out_grad, std::size_t h, std::size_t w, const std::vector<double>& g,
                          double* in_grad) {
    const std::size_t k = g.size(), oh = h - k + 1, ow = w - k + 1;
    std::vector<double> tmp(h * ow, 0.0);
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c)
            for (std::size_t i = 0; i < k; ++i) tmp[(r + i) * ow + c] += g[i] * out_grad[r * ow + c];
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < ow; ++c)
            for (std::size_t j = 0; j < k; ++j) in_grad[r * w + c + j] += g[j] * tmp[r * ow + c];
}

void check_ssim_args(std::size_t h, std::size_t w, const SsimParams& p) {
    if (p.window == 0 || p.window % 2 == 0) throw ConfigError("ssim: window must be a positive odd size");
    if (!(p.data_range > 0.0)) throw ConfigError("ssim: data_range must be positive");
    if (!(p.sigma > 0.0)) throw ConfigError("ssim: sigma must be positive");
    if (h < p.window || w < p.window)
        throw ConfigError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                          std::to_string(p.window) + "x" + std::to_string(p.window) + " window");
}

// Mean SSIM of x against y. When `grad` is given it receives d(mean)/dx.
double ssim_eval(const double* x, const double* y, std::size_t h, std::size_t w, const SsimParams& p,
                 std::vector<double>* grad) {
    check_ssim_args(h, w, p);
    const auto g = gaussian_taps(p.window, p.sigma);
    const std::size_t n = h * w, oh = h - p.window + 1, ow = w - p.window + 1, np = oh * ow;
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    std::vector<double> mx(np), my(np), mxx(np), myy(np), mxy(np);
    filter_valid(x, h, w, g, mx.data());
    filter_valid(y, h, w, g, my.data());
    filter_valid(xx.data(), h, w, g, mxx.data());
    filter_valid(yy.data(), h, w, g, myy.data());
    filter_valid(xy.data(), h, w, g, mxy.data());

    const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
    const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
    std::vector<double> d1, d2, d12;
    if (grad) {
        d1.resize(np);
        d2.resize(np);
        d12.resize(np);
    }
    double total = 0.0;
    for (std::size_t q = 0; q < np; ++q) {
        const double sxx = mxx[q] - mx[q] * mx[q];
        const double syy = myy[q] - my[q] * my[q];
        const double sxy = mxy[q] - mx[q] * my[q];
        const double a1 = 2.0 * (mx[q] * my[q]) + c1;
        const double a2 = 2.0 * sxy + c2;
        const double b1 = mx[q] * mx[q] + my[q] * my[q] + c1;
        const double b2 = sxx + syy + c2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (grad) {
            // Partials with respect to the local moments G*x, G*x^2 and G*(xy).
            const double ds_dmx = 2.0 * my[q] * a2 / (b1 * b2) - 2.0 * mx[q] * s / b1;
            const double ds_dsxx = -s / b2;
            const double ds_dsxy = 2.0 * a1 / (b1 * b2);
            d1[q] = (ds_dmx - 2.0 * mx[q] * ds_dsxx - my[q] * ds_dsxy) / double(np);
            d2[q] = ds_dsxx / double(np);
            d12[q] = ds_dsxy / double(np);
        }
    }
    if (grad) {
        std::vector<double> g1(n, 0.0), g2(n, 0.0), g12(n, 0.0);
        filter_valid_adjoint(d1.data(), h, w, g, g1.data());
        filter_valid_adjoint(d2.data(), h, w, g, g2.data());
        filter_valid_adjoint(d12.data(), h, w, g, g12.data());
        grad->assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) (*grad)[i] = g1[i] + 2.0 * x[i] * g2[i] + y[i] * g12[i];
    }
    return total / double(np);
}

// Mean over pixels of sqrt(dx^2 + dy^2 + eps) with forward differences and
// zero difference past the last row/column. Adds coef * d/du into `grad`.
double tv_forward(const double* u, std::size_t h, std::size_t w, double eps, double coef, double* grad) {
    const double inv_n = 1.0 / double(h * w);
    double total = 0.0;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t i = r * w + c;
            const double dx = c + 1 < w ? u[i + 1] - u[i] : 0.0;
            const double dy = r + 1 < h ? u[i + w] - u[i] : 0.0;
            const double t = std::sqrt(dx * dx + dy * dy + eps);
            total += t;
            if (grad) {
                const double k = coef * inv_n / t;
                if (c + 1 < w) {
                    grad[i + 1] += k * dx;
                    grad[i] -= k * dx;
                }
                if (r + 1 < h) {
                    grad[i + w] += k * dy;
                    grad[i] -= k * dy;
                }
            }
        }
    return total * inv_n;
}

// Symmetrized TV: average of the forward form on u and on u rotated by 180
// degrees (which reverses the flat index).
double tv_symmetric(const std::vector<double>& u, std::size_t h, std::size_t w, double eps, std::vector<double>* grad) {
    const std::size_t n = u.size();
    std::vector<double> rot(u.rbegin(), u.rend());
    std::vector<double> g_direct, g_rot;
    if (grad) {
        g_direct.assign(n, 0.0);
        g_rot.assign(n, 0.0);
    }
    const double a = tv_forward(u.data(), h, w, eps, 0.5, grad ? g_direct.data() : nullptr);
    const double b = tv_forward(rot.data(), h, w, eps, 0.5, grad ? g_rot.data() : nullptr);
    if (grad) {
        grad->assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) (*grad)[i] = g_direct[i] + g_rot[n - 1 - i];
    }
    return 0.5 * (a + b);
}

template <class T>
void check_image_var(const nn::Var<T>& x, const char* what) {
    const auto& s = x.shape();
    if (s.size() != 4 || s[0] != 1 || s[1] != 1)
        throw nn::GraphError(std::string(what) + ": expected a (1,1,H,W) image, got " + nn::shape_str(s));
}

template <class T>
std::vector<double> as_double(const nn::Tensor<T>& t) {
    return std::vector<double>(t.values().begin(), t.values().end());
}

void check_roi(const Image2D& x, const Roi& r, const char* which) {
    if (r.rows == 0 || r.cols == 0 || r.row0 + r.rows > x.rows() || r.col0 + r.cols > x.cols())
        throw ConfigError(std::string("cnr: ") + which + " region is empty or leaves the image");
}

}  // namespace

void LossWeights::validate() const {
    for (double v : {w_meas, w_ssim, w_tv})
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and nonnegative");
    const double sum = w_meas + w_ssim + w_tv;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("loss weights must sum to 1 (got " + std::to_string(sum) + "); enable normalization to rescale");
}

LossWeights LossWeights::normalized() const {
    for (double v : {w_meas, w_ssim, w_tv})
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and nonnegative");
    const double sum = w_meas + w_ssim + w_tv;
    if (!(sum > 0.0)) throw ConfigError("loss weights sum to zero");
    return {w_meas / sum, w_ssim / sum, w_tv / sum};
}

LossWeights LossWeights::resolve(bool normalize) const {
    if (normalize) return normalized();
    validate();
    return *this;
}

double ssim(const Image2D& x, const Image2D& ref, const SsimParams& params) {
    if (!x.same_shape(ref)) throw ConfigError("ssim: image shapes differ");
    return ssim_eval(x.values().data(), ref.values().data(), x.rows(), x.cols(), params, nullptr);
}

double psnr(const Image2D& x, const Image2D& ref, double peak) {
    if (!x.same_shape(ref)) throw ConfigError("psnr: image shapes differ");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - ref[i]) * (x[i] - ref[i]);
    mse /= double(x.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double cnr(const Image2D& x, const Roi& feature, const Roi& background, double db_factor) {
    check_roi(x, feature, "feature");
    check_roi(x, background, "background");
    auto stats = [&x](const Roi& r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < r.rows; ++i)
            for (std::size_t j = 0; j < r.cols; ++j) sum += x(r.row0 + i, r.col0 + j);
        const double mean = sum / double(r.rows * r.cols);
        double var = 0.0;
        for (std::size_t i = 0; i < r.rows; ++i)
            for (std::size_t j = 0; j < r.cols; ++j) var += std::pow(x(r.row0 + i, r.col0 + j) - mean, 2);
        return std::pair{mean, std::sqrt(var / double(r.rows * r.cols))};
    };
    const auto [mf, sf] = stats(feature);
    const auto [mb, sb] = stats(background);
    (void)sf;
    // A flat region can still give a rounding-level std, so test flatness directly.
    const double first = x(background.row0, background.col0);
    bool flat = true;
    for (std::size_t i = 0; i < background.rows && flat; ++i)
        for (std::size_t j = 0; j < background.cols; ++j)
            if (x(background.row0 + i, background.col0 + j) != first) {
                flat = false;
                break;
            }
    if (flat || sb == 0.0) throw DegenerateRoiError("cnr: background region has zero standard deviation");
    return db_factor * std::log10(std::abs(mf - mb) / sb);
}

double tv_norm(const Array2D& x) {
    const std::size_t h = x.rows(), w = x.cols();
    double total = 0.0;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const double dx = c + 1 < w ? x(r, c + 1) - x(r, c) : 0.0;
            const double dy = r + 1 < h ? x(r + 1, c) - x(r, c) : 0.0;
            total += std::sqrt(dx * dx + dy * dy);
        }
    return total;
}

template <class T>
nn::Var<T> measurement_loss(const nn::Var<T>& x, const Sinogram& y, const Geometry& geom) {
    geom.check_sinogram(y);
    auto ax = projection_node(x, geom);
    auto target = x.tape().constant(to_tensor<T>(y));
    return nn::mean(nn::square(nn::sub(ax, target)));
}

template <class T>
nn::Var<T> ssim_loss(const nn::Var<T>& x, const Image2D& x0, const SsimParams& params) {
    check_image_var(x, "ssim_loss");
    const std::size_t h = x.shape()[2], w = x.shape()[3];
    if (x0.rows() != h || x0.cols() != w) throw ConfigError("ssim_loss: reference shape differs from image");
    const auto xv = as_double(x.value());
    const bool need = x.tape().requires_grad(x);
    auto grad = std::make_shared<std::vector<double>>();
    const double s = ssim_eval(xv.data(), x0.values().data(), h, w, params, need ? grad.get() : nullptr);
    return x.tape().record(nn::Tensor<T>::scalar(static_cast<T>(1.0 - s)), {x},
                           [x, grad](nn::Tape<T>& tape, const nn::Tensor<T>& g, const nn::Tensor<T>&) {
                               if (auto* gx = tape.grad_sink(x)) {
                                   const double up = -static_cast<double>(g[0]);
                                   for (std::size_t i = 0; i < grad->size(); ++i)
                                       (*gx)[i] += static_cast<T>(up * (*grad)[i]);
                               }
                           });
}

template <class T>
nn::Var<T> tv_loss(const nn::Var<T>& x, double eps) {
    check_image_var(x, "tv_loss");
    const std::size_t h = x.shape()[2], w = x.shape()[3];
    if (h < 2 || w < 2) throw ConfigError("tv_loss: image must be at least 2x2");
    const auto xv = as_double(x.value());
    const bool need = x.tape().requires_grad(x);
    auto grad = std::make_shared<std::vector<double>>();
    const double v = tv_symmetric(xv, h, w, eps, need ? grad.get() : nullptr);
    return x.tape().record(nn::Tensor<T>::scalar(static_cast<T>(v)), {x},
                           [x, grad](nn::Tape<T>& tape, const nn::Tensor<T>& g, const nn::Tensor<T>&) {
                               if (auto* gx = tape.grad_sink(x)) {
                                   const double up = static_cast<double>(g[0]);
                                   for (std::size_t i = 0; i < grad->size(); ++i)
                                       (*gx)[i] += static_cast<T>(up * (*grad)[i]);
                               }
                           });
}

template <class T>
LossTerms<T> total_loss(const nn::Var<T>& x, const Sinogram& y, const Geometry& geom, const Image2D& x0,
                        const LossWeights& weights, bool normalize) {
    const LossWeights w = weights.resolve(normalize);
    auto& tape = x.tape();
    // Terms with zero weight see a detached copy so backward skips them.
    auto input = [&](double weight) { return weight > 0.0 ? x : tape.constant(x.value()); };
    LossTerms<T> t;
    t.meas = measurement_loss(input(w.w_meas), y, geom);
    t.ssim = ssim_loss(input(w.w_ssim), x0);
    t.tv = tv_loss(input(w.w_tv));
    t.total = nn::add(nn::add(nn::scale(t.meas, w.w_meas), nn::scale(t.ssim, w.w_ssim)), nn::scale(t.tv, w.w_tv));
    return t;
}

#define SPARSECT_INSTANTIATE(T)                                                                               \
    template nn::Var<T> measurement_loss<T>(const nn::Var<T>&, const Sinogram&, const Geometry&);             \
    template nn::Var<T> ssim_loss<T>(const nn::Var<T>&, const Image2D&, const SsimParams&);                   \
    template nn::Var<T> tv_loss<T>(const nn::Var<T>&, double);                                                \
    template LossTerms<T> total_loss<T>(const nn::Var<T>&, const Sinogram&, const Geometry&, const Image2D&, \
                                        const LossWeights&, bool);
SPARSECT_INSTANTIATE(float)
SPARSECT_INSTANTIATE(double)
#undef SPARSECT_INSTANTIATE

}  // namespace sparsect
