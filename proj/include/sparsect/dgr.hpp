#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsect/array2d.hpp"
#include "sparsect/geometry.hpp"
#include "sparsect/nn/adam.hpp"
#include "sparsect/nn/skipnet.hpp"
#include "sparsect/objective.hpp"

namespace sparsect {

struct EarlyStop {
    std::size_t window = 50;
    double min_delta = 0.0;
};

struct DGRConfig {
    LossWeights weights{0.9, 0.0, 0.1};
    /// Rescale weights that do not sum to 1 instead of rejecting them.
    bool normalize_weights = false;
    std::size_t iterations = 4000;
    /// Variance (not std) of the Gaussian perturbation added to z each iteration.
    double input_noise_variance = 0.01;
    nn::AdamSettings adam{};
    nn::SkipNetConfig net = nn::SkipNetConfig::v1();
    std::uint64_t seed = 0;
    /// Research mode: ground truth for per-iteration PSNR/SSIM.
    std::optional<Image2D> track_psnr_against;
    std::optional<EarlyStop> early_stop;

    void validate() const;
};

struct IterationRecord {
    double loss_total = 0.0;
    double loss_meas = 0.0;
    double loss_ssim = 0.0;
    double loss_tv = 0.0;
    std::optional<double> psnr;
    std::optional<double> ssim;
};

struct RunHistory {
    std::vector<IterationRecord> records;

    std::size_t size() const { return records.size(); }
    /// Index of the highest tracked PSNR (first one on ties); nullopt when untracked.
    std::optional<std::size_t> best_psnr_iteration() const;
    /// Columns: iteration, loss_total, loss_meas, loss_ssim, loss_tv, psnr, ssim.
    /// Untracked metrics are left empty.
    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Raised when the loss becomes NaN or infinite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t iteration, RunHistory history);
    std::size_t iteration() const { return iteration_; }
    const RunHistory& history() const { return history_; }

private:
    std::size_t iteration_;
    RunHistory history_;
};

/// Loss-based early stopping. Feed one total loss per iteration; update()
/// returns true once the moving average over `window` iterations has failed
/// to improve on its best value by more than min_delta for `window`
/// consecutive iterations. Never looks at ground truth.
class EarlyStopPolicy {
public:
    explicit EarlyStopPolicy(EarlyStop cfg);
    bool update(double loss);
    bool stopped() const { return stopped_; }

private:
    EarlyStop cfg_;
    std::vector<double> recent_;
    double running_sum_ = 0.0;
    double best_ = 0.0;
    bool have_best_ = false;
    std::size_t stale_ = 0;
    std::size_t seen_ = 0;
    bool stopped_ = false;
};

/// Replays `history` through EarlyStopPolicy and returns the iteration at
/// which it would stop, if any.
std::optional<std::size_t> early_stop_policy(const RunHistory& history, const EarlyStop& cfg);

struct DGRResult {
    /// G(z) with the unperturbed input at the final parameters, masked to the
    /// support and clipped to [0,1].
    Image2D image;
    RunHistory history;
    /// Output of the iteration with the highest tracked PSNR (research mode).
    std::optional<Image2D> best_psnr_image;
    bool early_stopped = false;
};

using DGRProgress = std::function<void(std::size_t iteration, const IterationRecord&)>;

/// Fits a randomly initialized SkipNet so that its masked output explains the
/// measurements under the weighted hybrid loss. x0 is the conventional
/// reconstruction used by the SSIM term.
DGRResult dgr_reconstruct(const Sinogram& y, const Geometry& geom, const Image2D& x0, const DGRConfig& cfg,
                          const DGRProgress& progress = {});

}  // namespace sparsect
