#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sparsect/errors.hpp"
#include "sparsect/nn/ops.hpp"
#include "sparsect/nn/params.hpp"

namespace sparsect::nn {

struct SkipNetConfig {
    std::size_t scales = 5;
    std::vector<std::size_t> channels_per_scale{16, 32, 64, 128, 256};
    std::size_t skip_channels = 4;
    std::size_t input_channels = 32;
    double leaky_slope = 0.2;
    UpsampleMode upsample = UpsampleMode::kBilinear;
    std::uint64_t seed = 0;
    /// Dropout probability applied after every encoder/decoder activation; 0 disables.
    double dropout = 0.0;

    static SkipNetConfig v1();  ///< 5 scales, [16, 32, 64, 128, 256]
    static SkipNetConfig v2();  ///< 4 scales, [32, 64, 128, 256]
    static SkipNetConfig v3();  ///< 3 scales, [64, 128, 256]
    /// "v1", "v2" or "v3".
    static SkipNetConfig preset(std::string_view name);

    void validate() const;
};

/// Encoder-decoder generator with a narrow skip branch at every scale.
///
/// Scale i takes h (at resolution R) and produces
///   skip  = act(norm(conv1x1(h)))                               at R
///   down  = act(norm(conv3x3(act(norm(conv3x3_s2(h))))))        at R/2
///   inner = scale i+1 applied to down (or down itself at the last scale)
///   out   = act(norm(conv1x1(act(norm(conv3x3(norm(concat(skip, up2x(inner)))))))))
/// and the head maps scale 0's output to one channel through a 1x1 conv and a sigmoid.
template <class T>
class SkipNet {
public:
    explicit SkipNet(SkipNetConfig cfg);

    const SkipNetConfig& config() const { return cfg_; }
    Params<T>& params() { return params_; }
    const Params<T>& params() const { return params_; }

    /// Builds the forward graph on z's tape. `param_vars` must come from
    /// params().bind() (or be aligned with it). Returns a (1,1,H,W) tensor.
    /// `rng` drives dropout and may be null when dropout is disabled.
    Var<T> forward(const std::vector<Var<T>>& param_vars, const Var<T>& z, std::mt19937_64* rng = nullptr) const;

    /// Forward pass on a scratch tape.
    Tensor<T> predict(const Tensor<T>& z) const;

    /// Throws ConfigError unless z is (1, input_channels, H, W) with H and W divisible by 2^scales.
    void check_input(const Shape& z) const;

private:
    struct Conv {
        std::size_t weight, bias;
    };
    struct Norm {
        std::size_t gamma, beta;
    };
    struct Level {
        Conv down1, down2, skip, up1, up2;
        Norm down_norm1, down_norm2, skip_norm, up_norm_in, up_norm1, up_norm2;
    };

    Conv add_conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, std::mt19937_64& rng);
    Norm add_norm(const std::string& name, std::size_t c);
    Var<T> level(std::size_t i, const std::vector<Var<T>>& p, const Var<T>& h, std::mt19937_64* rng) const;

    SkipNetConfig cfg_;
    Params<T> params_;
    std::vector<Level> levels_;
    Conv head_{};
};

}  // namespace sparsect::nn
