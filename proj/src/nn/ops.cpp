#include "sparsect/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace sparsect::nn {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

void require_image_tensor(const Shape& s, const char* op) {
    if (s.size() != 4 || s[0] != 1)
        throw GraphError(std::string(op) + ": expected a (1,C,H,W) tensor, got " + shape_str(s));
}

namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) throw GraphError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

std::size_t reflect(long i, long n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
    return static_cast<std::size_t>(i);
}

// Source rows/cols of every kernel tap for every output position, with
// reflection applied: table[tap * out + o].
std::vector<std::size_t> tap_table(std::size_t k, std::size_t out, std::size_t in, std::size_t stride) {
    const long pad = static_cast<long>(k / 2);
    std::vector<std::size_t> t(k * out);
    for (std::size_t tap = 0; tap < k; ++tap)
        for (std::size_t o = 0; o < out; ++o)
            t[tap * out + o] = reflect(static_cast<long>(o * stride + tap) - pad, static_cast<long>(in));
    return t;
}

struct ConvPlan {
    std::size_t cin, h, w, cout, k, stride, ho, wo;
    std::vector<std::size_t> rows, cols;
    bool direct() const { return k == 1 && stride == 1; }
};

// im2col restricted to output rows [oy0, oy1); out is (cin*k*k) x ((oy1-oy0)*wo).
template <class T>
void im2col(const T* x, const ConvPlan& p, std::size_t oy0, std::size_t oy1, T* out) {
    const std::size_t n = (oy1 - oy0) * p.wo;
    for (std::size_t c = 0; c < p.cin; ++c) {
        const T* xc = x + c * p.h * p.w;
        for (std::size_t ky = 0; ky < p.k; ++ky)
            for (std::size_t kx = 0; kx < p.k; ++kx) {
                T* dst = out + ((c * p.k + ky) * p.k + kx) * n;
                const std::size_t* rr = &p.rows[ky * p.ho];
                const std::size_t* cc = &p.cols[kx * p.wo];
                for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    const T* src = xc + rr[oy] * p.w;
                    T* d = dst + (oy - oy0) * p.wo;
                    for (std::size_t ox = 0; ox < p.wo; ++ox) d[ox] = src[cc[ox]];
                }
            }
    }
}

template <class T>
void col2im_add(const T* cols, const ConvPlan& p, std::size_t oy0, std::size_t oy1, T* dx) {
    const std::size_t n = (oy1 - oy0) * p.wo;
    for (std::size_t c = 0; c < p.cin; ++c) {
        T* xc = dx + c * p.h * p.w;
        for (std::size_t ky = 0; ky < p.k; ++ky)
            for (std::size_t kx = 0; kx < p.k; ++kx) {
                const T* src = cols + ((c * p.k + ky) * p.k + kx) * n;
                const std::size_t* rr = &p.rows[ky * p.ho];
                const std::size_t* cc = &p.cols[kx * p.wo];
                for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    T* dst = xc + rr[oy] * p.w;
                    const T* s = src + (oy - oy0) * p.wo;
                    for (std::size_t ox = 0; ox < p.wo; ++ox) dst[cc[ox]] += s[ox];
                }
            }
    }
}

// Output rows per lowered tile; keeps the column buffer cache-sized instead
// of materializing the whole (cin*k*k) x (ho*wo) matrix.
std::size_t tile_rows(const ConvPlan& p) {
    constexpr std::size_t kTileFloats = std::size_t{1} << 18;
    const std::size_t per_row = p.cin * p.k * p.k * p.wo;
    return std::clamp<std::size_t>(kTileFloats / std::max<std::size_t>(per_row, 1), 1, p.ho);
}

// Reused per-thread scratch; tiles are recomputed in the backward pass.
template <class T>
T* scratch(std::size_t slot, std::size_t count) {
    thread_local AlignedVector<T> buffers[2];
    auto& b = buffers[slot];
    if (b.size() < count) b.resize(count);
    return b.data();
}

template <class T>
Var<T> elementwise_unary(const Var<T>& x, auto&& f, auto&& df) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    return x.tape().record(std::move(out), {x}, [x, df](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        if (auto* gx = tape.grad_sink(x)) {
            const Tensor<T>& xv = x.value();
            for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += g[i] * df(xv[i]);
        }
    });
}

}  // namespace

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const std::optional<Var<T>>& bias, std::size_t stride) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    require_image_tensor(xs, "conv2d");
    if (ws.size() != 4 || ws[2] != ws[3] || ws[2] % 2 == 0)
        throw GraphError("conv2d: weight must be (Cout,Cin,k,k) with odd k, got " + shape_str(ws));
    if (ws[1] != xs[1])
        throw GraphError("conv2d: weight expects " + std::to_string(ws[1]) + " input channels, got " + std::to_string(xs[1]));
    if (stride != 1 && stride != 2) throw GraphError("conv2d: stride must be 1 or 2");
    if (bias && (bias->shape() != Shape{ws[0]})) throw GraphError("conv2d: bias must have shape (Cout)");

    auto plan = std::make_shared<ConvPlan>();
    plan->cin = xs[1];
    plan->h = xs[2];
    plan->w = xs[3];
    plan->cout = ws[0];
    plan->k = ws[2];
    plan->stride = stride;
    const std::size_t pad = plan->k / 2;
    if (pad >= plan->h || pad >= plan->w) throw GraphError("conv2d: input too small for reflection padding");
    plan->ho = (plan->h + 2 * pad - plan->k) / stride + 1;
    plan->wo = (plan->w + 2 * pad - plan->k) / stride + 1;
    plan->rows = tap_table(plan->k, plan->ho, plan->h, stride);
    plan->cols = tap_table(plan->k, plan->wo, plan->w, stride);

    const std::size_t kk = plan->cin * plan->k * plan->k;
    const std::size_t n = plan->ho * plan->wo;
    Tensor<T> out(Shape{1, plan->cout, plan->ho, plan->wo});
    MatMap<T> y(out.data(), plan->cout, n);
    ConstMatMap<T> wmat(weight.value().data(), plan->cout, kk);
    if (plan->direct()) {
        y.noalias() = wmat * ConstMatMap<T>(x.value().data(), kk, n);
    } else {
        const std::size_t rows = tile_rows(*plan);
        T* cols = scratch<T>(0, kk * rows * plan->wo);
        for (std::size_t oy0 = 0; oy0 < plan->ho; oy0 += rows) {
            const std::size_t oy1 = std::min(oy0 + rows, plan->ho), m = (oy1 - oy0) * plan->wo;
            im2col(x.value().data(), *plan, oy0, oy1, cols);
            y.middleCols(oy0 * plan->wo, m).noalias() = wmat * ConstMatMap<T>(cols, kk, m);
        }
    }
    if (bias) {
        const Tensor<T>& b = bias->value();
        for (std::size_t c = 0; c < plan->cout; ++c) y.row(c).array() += b[c];
    }

    std::vector<Var<T>> inputs{x, weight};
    if (bias) inputs.push_back(*bias);
    return x.tape().record(std::move(out), inputs, [x, weight, bias, plan](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        const std::size_t kk = plan->cin * plan->k * plan->k;
        const std::size_t n = plan->ho * plan->wo;
        ConstMatMap<T> gy(g.data(), plan->cout, n);
        ConstMatMap<T> wmat(weight.value().data(), plan->cout, kk);
        auto* gw = tape.grad_sink(weight);
        auto* gx = tape.grad_sink(x);
        if (bias) {
            if (auto* gb = tape.grad_sink(*bias)) {
                for (std::size_t c = 0; c < plan->cout; ++c) {
                    const T* row = g.data() + c * n;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n; ++i) acc += row[i];
                    (*gb)[c] += static_cast<T>(acc);
                }
            }
        }
        if (plan->direct()) {
            if (gw) MatMap<T>(gw->data(), plan->cout, kk).noalias() += gy * ConstMatMap<T>(x.value().data(), kk, n).transpose();
            if (gx) MatMap<T>(gx->data(), kk, n).noalias() += wmat.transpose() * gy;
            return;
        }
        if (!gw && !gx) return;
        const std::size_t rows = tile_rows(*plan);
        T* cols = scratch<T>(0, kk * rows * plan->wo);
        T* gcols = scratch<T>(1, kk * rows * plan->wo);
        for (std::size_t oy0 = 0; oy0 < plan->ho; oy0 += rows) {
            const std::size_t oy1 = std::min(oy0 + rows, plan->ho), m = (oy1 - oy0) * plan->wo;
            const auto gtile = gy.middleCols(oy0 * plan->wo, m);
            if (gw) {
                im2col(x.value().data(), *plan, oy0, oy1, cols);
                MatMap<T>(gw->data(), plan->cout, kk).noalias() += gtile * ConstMatMap<T>(cols, kk, m).transpose();
            }
            if (gx) {
                MatMap<T>(gcols, kk, m).noalias() = wmat.transpose() * gtile;
                col2im_add(gcols, *plan, oy0, oy1, gx->data());
            }
        }
    });
}

template <class T>
Var<T> channel_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
    const Shape& xs = x.shape();
    require_image_tensor(xs, "channel_norm");
    const std::size_t c = xs[1], hw = xs[2] * xs[3];
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
        throw GraphError("channel_norm: scale and shift must have shape (C)");

    auto xhat = std::make_shared<AlignedVector<T>>(c * hw);
    auto inv_std = std::make_shared<std::vector<double>>(c);
    Tensor<T> out(xs);
    const T* xv = x.value().data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        const T* src = xv + ch * hw;
        double mu = 0.0;
        for (std::size_t i = 0; i < hw; ++i) mu += src[i];
        mu /= double(hw);
        double var = 0.0;
        for (std::size_t i = 0; i < hw; ++i) var += (src[i] - mu) * (src[i] - mu);
        var /= double(hw);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[ch] = is;
        const double gm = gamma.value()[ch], bt = beta.value()[ch];
        for (std::size_t i = 0; i < hw; ++i) {
            const double xh = (src[i] - mu) * is;
            (*xhat)[ch * hw + i] = static_cast<T>(xh);
            out[ch * hw + i] = static_cast<T>(gm * xh + bt);
        }
    }
    return x.tape().record(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, c, hw](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        auto* gx = tape.grad_sink(x);
        auto* gg = tape.grad_sink(gamma);
        auto* gb = tape.grad_sink(beta);
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* gy = g.data() + ch * hw;
            const T* xh = xhat->data() + ch * hw;
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t i = 0; i < hw; ++i) {
                sum_g += gy[i];
                sum_gx += double(gy[i]) * xh[i];
            }
            if (gg) (*gg)[ch] += static_cast<T>(sum_gx);
            if (gb) (*gb)[ch] += static_cast<T>(sum_g);
            if (gx) {
                const double gm = gamma.value()[ch];
                const double k = gm * (*inv_std)[ch] / double(hw);
                T* dst = gx->data() + ch * hw;
                for (std::size_t i = 0; i < hw; ++i)
                    dst[i] += static_cast<T>(k * (double(hw) * gy[i] - sum_g - xh[i] * sum_gx));
            }
        }
    });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, double slope) {
    const T s = static_cast<T>(slope);
    return elementwise_unary(x, [s](T v) { return v > T(0) ? v : s * v; }, [s](T v) { return v > T(0) ? T(1) : s; });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-xv[i]));
    return x.tape().record(std::move(out), {x}, [x](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>& s) {
        if (auto* gx = tape.grad_sink(x))
            for (std::size_t i = 0; i < s.size(); ++i) (*gx)[i] += g[i] * s[i] * (T(1) - s[i]);
    });
}

namespace {

struct LerpTap {
    std::size_t i0, i1;
    double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<LerpTap> upsample_taps(std::size_t in, UpsampleMode mode) {
    std::vector<LerpTap> taps(2 * in);
    for (std::size_t o = 0; o < 2 * in; ++o) {
        if (mode == UpsampleMode::kNearest) {
            taps[o] = {o / 2, o / 2, 0.0};
            continue;
        }
        const double src = std::max(0.0, (double(o) + 0.5) / 2.0 - 0.5);
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, src - double(i0)};
    }
    return taps;
}

}  // namespace

template <class T>
Var<T> upsample2x(const Var<T>& x, UpsampleMode mode) {
    const Shape& xs = x.shape();
    require_image_tensor(xs, "upsample2x");
    const std::size_t c = xs[1], h = xs[2], w = xs[3];
    auto ty = std::make_shared<std::vector<LerpTap>>(upsample_taps(h, mode));
    auto tx = std::make_shared<std::vector<LerpTap>>(upsample_taps(w, mode));
    Tensor<T> out(Shape{1, c, 2 * h, 2 * w});
    const T* xv = x.value().data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        const T* src = xv + ch * h * w;
        T* dst = out.data() + ch * 4 * h * w;
        for (std::size_t oy = 0; oy < 2 * h; ++oy) {
            const auto& a = (*ty)[oy];
            const T* r0 = src + a.i0 * w;
            const T* r1 = src + a.i1 * w;
            for (std::size_t ox = 0; ox < 2 * w; ++ox) {
                const auto& b = (*tx)[ox];
                const double top = (1 - b.w1) * r0[b.i0] + b.w1 * r0[b.i1];
                const double bot = (1 - b.w1) * r1[b.i0] + b.w1 * r1[b.i1];
                dst[oy * 2 * w + ox] = static_cast<T>((1 - a.w1) * top + a.w1 * bot);
            }
        }
    }
    return x.tape().record(std::move(out), {x}, [x, ty, tx, c, h, w](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        auto* gx = tape.grad_sink(x);
        if (!gx) return;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* src = g.data() + ch * 4 * h * w;
            T* dst = gx->data() + ch * h * w;
            for (std::size_t oy = 0; oy < 2 * h; ++oy) {
                const auto& a = (*ty)[oy];
                T* r0 = dst + a.i0 * w;
                T* r1 = dst + a.i1 * w;
                for (std::size_t ox = 0; ox < 2 * w; ++ox) {
                    const auto& b = (*tx)[ox];
                    const double v = src[oy * 2 * w + ox];
                    r0[b.i0] += static_cast<T>((1 - a.w1) * (1 - b.w1) * v);
                    r0[b.i1] += static_cast<T>((1 - a.w1) * b.w1 * v);
                    r1[b.i0] += static_cast<T>(a.w1 * (1 - b.w1) * v);
                    r1[b.i1] += static_cast<T>(a.w1 * b.w1 * v);
                }
            }
        }
    });
}

template <class T>
Var<T> concat(const Var<T>& a, const Var<T>& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    require_image_tensor(as, "concat");
    require_image_tensor(bs, "concat");
    if (as[2] != bs[2] || as[3] != bs[3])
        throw GraphError("concat: spatial mismatch " + shape_str(as) + " vs " + shape_str(bs));
    Tensor<T> out(Shape{1, as[1] + bs[1], as[2], as[3]});
    std::copy(a.value().values().begin(), a.value().values().end(), out.data());
    std::copy(b.value().values().begin(), b.value().values().end(), out.data() + a.value().size());
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        const std::size_t na = a.value().size();
        if (auto* ga = tape.grad_sink(a))
            for (std::size_t i = 0; i < na; ++i) (*ga)[i] += g[i];
        if (auto* gb = tape.grad_sink(b))
            for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += g[na + i];
    });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        if (auto* ga = tape.grad_sink(a))
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (auto* gb = tape.grad_sink(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    require_same_shape(a.shape(), b.shape(), "sub");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        if (auto* ga = tape.grad_sink(a))
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (auto* gb = tape.grad_sink(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        if (auto* ga = tape.grad_sink(a))
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.value()[i];
        if (auto* gb = tape.grad_sink(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.value()[i];
    });
}

template <class T>
Var<T> scale(const Var<T>& x, double factor) {
    const T f = static_cast<T>(factor);
    return elementwise_unary(x, [f](T v) { return f * v; }, [f](T) { return f; });
}

template <class T>
Var<T> square(const Var<T>& x) {
    return elementwise_unary(x, [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <class T>
Var<T> mean(const Var<T>& x) {
    const Tensor<T>& xv = x.value();
    if (xv.size() == 0) throw GraphError("mean of an empty tensor");
    double acc = 0.0;
    for (T v : xv.values()) acc += v;
    const double n = double(xv.size());
    return x.tape().record(Tensor<T>::scalar(static_cast<T>(acc / n)), {x}, [x, n](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        if (auto* gx = tape.grad_sink(x)) {
            const T d = static_cast<T>(g[0] / n);
            for (auto& v : gx->values()) v += d;
        }
    });
}

template <class T>
Var<T> dropout(const Var<T>& x, double p, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0) throw GraphError("dropout: probability must be in [0, 1)");
    if (p == 0.0) return x;
    auto mask = std::make_shared<AlignedVector<T>>(x.value().size());
    std::bernoulli_distribution keep(1.0 - p);
    const T s = static_cast<T>(1.0 / (1.0 - p));
    for (auto& m : *mask) m = keep(rng) ? s : T(0);
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * (*mask)[i];
    return x.tape().record(std::move(out), {x}, [x, mask](Tape<T>& tape, const Tensor<T>& g, const Tensor<T>&) {
        if (auto* gx = tape.grad_sink(x))
            for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * (*mask)[i];
    });
}

#define SPARSECT_INSTANTIATE_OPS(T)                                                                     \
    template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const std::optional<Var<T>>&, std::size_t); \
    template Var<T> channel_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, double);              \
    template Var<T> leaky_relu<T>(const Var<T>&, double);                                               \
    template Var<T> sigmoid<T>(const Var<T>&);                                                          \
    template Var<T> upsample2x<T>(const Var<T>&, UpsampleMode);                                         \
    template Var<T> concat<T>(const Var<T>&, const Var<T>&);                                            \
    template Var<T> add<T>(const Var<T>&, const Var<T>&);                                               \
    template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                               \
    template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                               \
    template Var<T> scale<T>(const Var<T>&, double);                                                    \
    template Var<T> square<T>(const Var<T>&);                                                           \
    template Var<T> mean<T>(const Var<T>&);                                                             \
    template Var<T> dropout<T>(const Var<T>&, double, std::mt19937_64&);

SPARSECT_INSTANTIATE_OPS(float)
SPARSECT_INSTANTIATE_OPS(double)

}  // namespace sparsect::nn
