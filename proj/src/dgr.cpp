#include "sparsect/dgr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "sparsect/io.hpp"
#include "sparsect/projection_node.hpp"

namespace sparsect {
namespace {

// Distinct, reproducible streams for network init, base input, per-iteration
// perturbation and dropout.
std::uint64_t stream_seed(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), stream};
    std::array<std::uint32_t, 2> parts{};
    seq.generate(parts.begin(), parts.end());
    return (std::uint64_t(parts[0]) << 32) | parts[1];
}

void fill_normal(nn::Tensor<float>& t, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> nd(0.0, stddev);
    for (auto& v : t.values()) v = static_cast<float>(nd(rng));
}

nn::Tensor<float> support_tensor(const Geometry& geom) {
    const std::size_t n = geom.image_size();
    nn::Tensor<float> m(nn::Shape{1, 1, n, n});
    const auto& s = geom.support();
    for (std::size_t i = 0; i < n * n; ++i) m[i] = s[i] ? 1.0f : 0.0f;
    return m;
}

Image2D clipped_image(const nn::Tensor<float>& t) {
    Image2D im = to_image(t);
    for (auto& v : im.values()) v = std::clamp(v, 0.0, 1.0);
    return im;
}

}  // namespace

void DGRConfig::validate() const {
    if (iterations < 1) throw ConfigError("dgr: iterations must be at least 1");
    if (!(input_noise_variance >= 0.0) || !std::isfinite(input_noise_variance))
        throw ConfigError("dgr: input_noise_variance must be finite and nonnegative");
    if (!(adam.lr > 0.0)) throw ConfigError("dgr: learning rate must be positive");
    if (early_stop && early_stop->window < 1) throw ConfigError("dgr: early-stop window must be at least 1");
    if (early_stop && !(early_stop->min_delta >= 0.0)) throw ConfigError("dgr: early-stop min_delta must be >= 0");
    weights.resolve(normalize_weights);
    net.validate();
}

std::optional<std::size_t> RunHistory::best_psnr_iteration() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].psnr) continue;
        if (!best || *records[i].psnr > *records[*best].psnr) best = i;
    }
    return best;
}

std::string RunHistory::to_csv() const {
    std::ostringstream out;
    out << "iteration,loss_total,loss_meas,loss_ssim,loss_tv,psnr,ssim\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        out << i << ',' << io::format_double(r.loss_total) << ',' << io::format_double(r.loss_meas) << ','
            << io::format_double(r.loss_ssim) << ',' << io::format_double(r.loss_tv) << ','
            << (r.psnr ? io::format_double(*r.psnr) : "") << ',' << (r.ssim ? io::format_double(*r.ssim) : "") << '\n';
    }
    return out.str();
}

void RunHistory::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << to_csv();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

DivergenceError::DivergenceError(std::size_t iteration, RunHistory history)
    : std::runtime_error("dgr: loss diverged at iteration " + std::to_string(iteration)),
      iteration_(iteration),
      history_(std::move(history)) {}

EarlyStopPolicy::EarlyStopPolicy(EarlyStop cfg) : cfg_(cfg) {
    if (cfg_.window < 1) throw ConfigError("early stop window must be at least 1");
}

bool EarlyStopPolicy::update(double loss) {
    if (stopped_) return true;
    ++seen_;
    recent_.push_back(loss);
    running_sum_ += loss;
    if (recent_.size() > cfg_.window) {
        running_sum_ -= recent_.front();
        recent_.erase(recent_.begin());
    }
    if (recent_.size() < cfg_.window) return false;
    // Recompute the sum now and then so rounding drift cannot accumulate.
    if (seen_ % 1024 == 0) {
        running_sum_ = 0.0;
        for (double v : recent_) running_sum_ += v;
    }
    const double avg = running_sum_ / double(cfg_.window);
    if (!have_best_ || avg < best_ - cfg_.min_delta) {
        best_ = have_best_ ? std::min(best_, avg) : avg;
        have_best_ = true;
        stale_ = 0;
    } else {
        best_ = std::min(best_, avg);
        ++stale_;
    }
    stopped_ = stale_ >= cfg_.window;
    return stopped_;
}

std::optional<std::size_t> early_stop_policy(const RunHistory& history, const EarlyStop& cfg) {
    EarlyStopPolicy policy(cfg);
    for (std::size_t i = 0; i < history.records.size(); ++i)
        if (policy.update(history.records[i].loss_total)) return i;
    return std::nullopt;
}

DGRResult dgr_reconstruct(const Sinogram& y, const Geometry& geom, const Image2D& x0, const DGRConfig& cfg,
                          const DGRProgress& progress) {
    cfg.validate();
    geom.check_sinogram(y);
    geom.check_image(x0);
    if (cfg.track_psnr_against) geom.check_image(*cfg.track_psnr_against);
    const LossWeights weights = cfg.weights.resolve(cfg.normalize_weights);

    nn::SkipNetConfig net_cfg = cfg.net;
    net_cfg.seed = stream_seed(cfg.seed, 1);
    nn::SkipNet<float> net(net_cfg);
    const std::size_t n = geom.image_size();
    net.check_input(nn::Shape{1, net_cfg.input_channels, n, n});

    std::mt19937_64 z_rng(stream_seed(cfg.seed, 2));
    std::mt19937_64 noise_rng(stream_seed(cfg.seed, 3));
    std::mt19937_64 dropout_rng(stream_seed(cfg.seed, 4));
    nn::Tensor<float> z(nn::Shape{1, net_cfg.input_channels, n, n});
    fill_normal(z, z_rng, 1.0);
    const nn::Tensor<float> mask = support_tensor(geom);
    const double noise_std = std::sqrt(cfg.input_noise_variance);

    auto state = nn::AdamState<float>::like(net.params());
    std::optional<EarlyStopPolicy> stopper;
    if (cfg.early_stop) stopper.emplace(*cfg.early_stop);

    DGRResult result;
    result.history.records.reserve(cfg.iterations);
    double best_psnr = -std::numeric_limits<double>::infinity();
    nn::Tensor<float> zin = z;
    std::vector<nn::Tensor<float>> grads(net.params().size());

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        nn::Tape<float> tape;
        const auto vars = net.params().bind(tape);
        if (noise_std > 0.0) {
            std::normal_distribution<double> nd(0.0, noise_std);
            for (std::size_t i = 0; i < z.size(); ++i) zin[i] = z[i] + static_cast<float>(nd(noise_rng));
        }
        auto out = net.forward(vars, tape.constant(zin), net_cfg.dropout > 0.0 ? &dropout_rng : nullptr);
        auto x = nn::mul(out, tape.constant(mask));
        const auto terms = total_loss(x, y, geom, x0, weights);

        IterationRecord rec;
        rec.loss_total = terms.total.value().item();
        rec.loss_meas = terms.meas.value().item();
        rec.loss_ssim = terms.ssim.value().item();
        rec.loss_tv = terms.tv.value().item();
        if (!std::isfinite(rec.loss_total)) throw DivergenceError(it, std::move(result.history));
        if (cfg.track_psnr_against) {
            const Image2D current = clipped_image(x.value());
            rec.psnr = psnr(current, *cfg.track_psnr_against);
            rec.ssim = ssim(current, *cfg.track_psnr_against);
            if (*rec.psnr > best_psnr) {
                best_psnr = *rec.psnr;
                result.best_psnr_image = current;
            }
        }
        result.history.records.push_back(rec);
        if (progress) progress(it, rec);

        tape.backward(terms.total);
        for (std::size_t k = 0; k < vars.size(); ++k) grads[k] = tape.gradient(vars[k]);
        nn::adam_step(net.params(), grads, state, cfg.adam);

        if (stopper && stopper->update(rec.loss_total)) {
            result.early_stopped = true;
            break;
        }
    }

    nn::Tensor<float> final_out = net.predict(z);
    for (std::size_t i = 0; i < final_out.size(); ++i) final_out[i] *= mask[i];
    result.image = clipped_image(final_out);
    return result;
}

}  // namespace sparsect
