#include "sparsect/nn/skipnet.hpp"

#include <cmath>
#include <string>

namespace sparsect::nn {

SkipNetConfig SkipNetConfig::v1() {
    SkipNetConfig c;
    c.scales = 5;
    c.channels_per_scale = {16, 32, 64, 128, 256};
    return c;
}

SkipNetConfig SkipNetConfig::v2() {
    SkipNetConfig c;
    c.scales = 4;
    c.channels_per_scale = {32, 64, 128, 256};
    return c;
}

SkipNetConfig SkipNetConfig::v3() {
    SkipNetConfig c;
    c.scales = 3;
    c.channels_per_scale = {64, 128, 256};
    return c;
}

SkipNetConfig SkipNetConfig::preset(std::string_view name) {
    if (name == "v1") return v1();
    if (name == "v2") return v2();
    if (name == "v3") return v3();
    throw ConfigError("unknown architecture '" + std::string(name) + "' (expected v1, v2 or v3)");
}

void SkipNetConfig::validate() const {
    if (scales == 0 || scales != channels_per_scale.size())
        throw ConfigError("SkipNetConfig: scales must equal the number of channel entries");
    for (std::size_t c : channels_per_scale)
        if (c == 0) throw ConfigError("SkipNetConfig: channel counts must be positive");
    if (skip_channels == 0 || input_channels == 0) throw ConfigError("SkipNetConfig: channel counts must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("SkipNetConfig: dropout must be in [0, 1)");
}

template <class T>
SkipNet<T>::SkipNet(SkipNetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    const auto& ch = cfg_.channels_per_scale;
    const std::size_t s = cfg_.skip_channels;
    std::size_t cin = cfg_.input_channels;
    for (std::size_t i = 0; i < cfg_.scales; ++i) {
        const std::string p = std::to_string(i);
        const std::size_t c = ch[i];
        const std::size_t deeper = (i + 1 == cfg_.scales) ? c : ch[i + 1];
        Level lv{};
        lv.down1 = add_conv("down" + p + ".conv1", cin, c, 3, rng);
        lv.down_norm1 = add_norm("down" + p + ".norm1", c);
        lv.down2 = add_conv("down" + p + ".conv2", c, c, 3, rng);
        lv.down_norm2 = add_norm("down" + p + ".norm2", c);
        lv.skip = add_conv("skip" + p + ".conv", cin, s, 1, rng);
        lv.skip_norm = add_norm("skip" + p + ".norm", s);
        lv.up_norm_in = add_norm("up" + p + ".norm_in", s + deeper);
        lv.up1 = add_conv("up" + p + ".conv1", s + deeper, c, 3, rng);
        lv.up_norm1 = add_norm("up" + p + ".norm1", c);
        lv.up2 = add_conv("up" + p + ".conv2", c, c, 1, rng);
        lv.up_norm2 = add_norm("up" + p + ".norm2", c);
        levels_.push_back(lv);
        cin = c;
    }
    head_ = add_conv("head", ch[0], 1, 1, rng);
}

template <class T>
typename SkipNet<T>::Conv SkipNet<T>::add_conv(const std::string& name, std::size_t cin, std::size_t cout,
                                               std::size_t k, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(double(cin * k * k));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor<T> w(Shape{cout, cin, k, k});
    for (auto& v : w.values()) v = static_cast<T>(u(rng));
    Tensor<T> b(Shape{cout});
    for (auto& v : b.values()) v = static_cast<T>(u(rng));
    Conv c{params_.size(), params_.size() + 1};
    params_.add(name + ".weight", std::move(w));
    params_.add(name + ".bias", std::move(b));
    return c;
}

template <class T>
typename SkipNet<T>::Norm SkipNet<T>::add_norm(const std::string& name, std::size_t c) {
    Norm n{params_.size(), params_.size() + 1};
    params_.add(name + ".gamma", Tensor<T>(Shape{c}, T(1)));
    params_.add(name + ".beta", Tensor<T>(Shape{c}, T(0)));
    return n;
}

template <class T>
void SkipNet<T>::check_input(const Shape& z) const {
    if (z.size() != 4 || z[0] != 1 || z[1] != cfg_.input_channels)
        throw ConfigError("SkipNet: input must be (1," + std::to_string(cfg_.input_channels) + ",H,W), got " +
                          shape_str(z));
    const std::size_t div = std::size_t{1} << cfg_.scales;
    if (z[2] % div != 0 || z[3] % div != 0)
        throw ConfigError("SkipNet: spatial size " + std::to_string(z[2]) + "x" + std::to_string(z[3]) +
                          " is not divisible by 2^" + std::to_string(cfg_.scales));
    // Reflection padding at the coarsest scale needs at least 2 pixels.
    if (z[2] / div < 2 || z[3] / div < 2)
        throw ConfigError("SkipNet: input too small for " + std::to_string(cfg_.scales) + " scales");
}

template <class T>
Var<T> SkipNet<T>::level(std::size_t i, const std::vector<Var<T>>& p, const Var<T>& h, std::mt19937_64* rng) const {
    const Level& lv = levels_[i];
    const double slope = cfg_.leaky_slope;
    auto act = [&](const Var<T>& v) {
        Var<T> a = leaky_relu(v, slope);
        return (cfg_.dropout > 0.0 && rng) ? dropout(a, cfg_.dropout, *rng) : a;
    };
    auto conv = [&](const Var<T>& v, const Conv& c, std::size_t stride) {
        return conv2d(v, p[c.weight], std::optional<Var<T>>(p[c.bias]), stride);
    };
    auto norm = [&](const Var<T>& v, const Norm& n) { return channel_norm(v, p[n.gamma], p[n.beta]); };

    Var<T> skip = leaky_relu(norm(conv(h, lv.skip, 1), lv.skip_norm), slope);
    Var<T> down = act(norm(conv(h, lv.down1, 2), lv.down_norm1));
    down = act(norm(conv(down, lv.down2, 1), lv.down_norm2));
    Var<T> inner = (i + 1 == cfg_.scales) ? down : level(i + 1, p, down, rng);
    Var<T> up = upsample2x(inner, cfg_.upsample);
    Var<T> out = norm(concat(skip, up), lv.up_norm_in);
    out = act(norm(conv(out, lv.up1, 1), lv.up_norm1));
    out = act(norm(conv(out, lv.up2, 1), lv.up_norm2));
    return out;
}

template <class T>
Var<T> SkipNet<T>::forward(const std::vector<Var<T>>& param_vars, const Var<T>& z, std::mt19937_64* rng) const {
    if (param_vars.size() != params_.size())
        throw GraphError("SkipNet::forward: expected " + std::to_string(params_.size()) + " parameter vars");
    check_input(z.shape());
    Var<T> feat = level(0, param_vars, z, rng);
    return sigmoid(conv2d(feat, param_vars[head_.weight], std::optional<Var<T>>(param_vars[head_.bias]), 1));
}

template <class T>
Tensor<T> SkipNet<T>::predict(const Tensor<T>& z) const {
    Tape<T> tape;
    std::vector<Var<T>> p;
    p.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) p.push_back(tape.constant(params_[i]));
    return forward(p, tape.constant(z)).value();
}

template class SkipNet<float>;
template class SkipNet<double>;

}  // namespace sparsect::nn
