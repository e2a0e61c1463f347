#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparsect/classical.hpp"
#include "sparsect/data.hpp"
#include "sparsect/dgr.hpp"

namespace sparsect::cli {

enum class DatasetKind { kSheppLogan, kEllipses, kSlices };
enum class Method { kFbp, kSart, kSartTv, kDgr };

DatasetKind parse_dataset(std::string_view s);
Method parse_method(std::string_view s);
std::string to_string(DatasetKind k);
std::string to_string(Method m);

struct DatasetConfig {
    DatasetKind kind = DatasetKind::kSheppLogan;
    /// ellipses: one image per seed.
    std::vector<std::uint64_t> seeds{0};
    CountRange ellipse_count{};
    /// slices: every .png / .raw file in the directory, sorted by name.
    std::filesystem::path slices_dir;
    HuOptions hu{};
};

struct ExperimentConfig {
    DatasetConfig dataset;
    std::size_t image_size = 128;
    std::vector<std::size_t> views{64};
    /// +inf disables noise.
    double snr_db = 39.0;
    SignalPower power = SignalPower::kMean;
    std::uint64_t noise_seed = 1000;
    Method method = Method::kFbp;
    FbpConfig fbp{};
    SartConfig sart{};
    /// tv_weight / denoise settings; its SART part is taken from `sart`.
    SartTvConfig sart_tv{};
    DGRConfig dgr = desk_dgr();
    std::filesystem::path output_dir = "sparsect_out";
    /// 0 = SPARSECT_THREADS, else hardware concurrency.
    std::size_t threads = 0;

    /// DGR settings for 128x128 desk runs: 800 iterations, lr 1e-2, 16 skip channels.
    static DGRConfig desk_dgr();
    void validate() const;
};

/// Reads a flat `key = value` file. '#' starts a comment; blank lines are
/// skipped. Throws ConfigError on malformed lines or duplicate keys.
std::vector<std::pair<std::string, std::string>> read_kv_file(const std::filesystem::path& path);

/// Turns key/value pairs into `--key=value` arguments.
std::vector<std::string> kv_to_args(const std::vector<std::pair<std::string, std::string>>& kv);

/// Worker count: `requested` if nonzero, else SPARSECT_THREADS, else the
/// hardware concurrency (at least 1).
std::size_t resolve_threads(std::size_t requested);

/// Runs fn(0..count-1) on up to `threads` workers. Exceptions escaping fn are
/// rethrown after all workers finish (first one wins).
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct DatasetImage {
    std::string name;
    Image2D image;
};
std::vector<DatasetImage> load_dataset(const ExperimentConfig& cfg);

struct Measurement {
    Geometry geom;
    Sinogram clean;
    Sinogram noisy;
};
/// Projects `gt` over `views` angles and adds noise seeded from cfg.noise_seed
/// and the image's position in the dataset.
Measurement measure(const Image2D& gt, std::size_t views, const ExperimentConfig& cfg, std::size_t image_index);

/// A method row: classical method or DGR with a weight triple.
struct MethodSpec {
    Method method = Method::kFbp;
    LossWeights weights{1.0, 0.0, 0.0};

    /// "fbp", "sart", "sart_tv" or "dgr:<meas>/<ssim>/<tv>".
    std::string id() const;
    static MethodSpec parse(std::string_view id);
};

/// FBP, SART, SART+TV and the 13 DGR weight rows of the ellipse/lesion tables.
std::vector<MethodSpec> table_rows();

struct RunOutput {
    Image2D image;
    double runtime_s = 0.0;
    std::optional<RunHistory> history;
};
/// x0 is the SART reconstruction used by DGR's SSIM term; ignored otherwise.
RunOutput run_method(const MethodSpec& spec, const Measurement& m, const Image2D& x0, const ExperimentConfig& cfg,
                     const std::optional<Image2D>& track = std::nullopt);

/// Writes ground truth, clean and noisy sinograms, reconstruction (raw +
/// PNG), DGR history CSV, metrics.jsonl and manifest.json. Returns the number
/// of reconstructions.
std::size_t cmd_reconstruct(const ExperimentConfig& cfg, const std::string& command_line = {});

struct CellStats {
    std::size_t n = 0;
    std::size_t failed = 0;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;  ///< raw SSIM, not x100
};

struct BenchmarkTable {
    std::vector<MethodSpec> rows;
    std::vector<std::size_t> views;
    /// cells[row][view index]
    std::vector<std::vector<CellStats>> cells;

    /// Table layout: method, weights, then "mean ± std" PSNR and SSIM x100 and N per view.
    std::string to_csv() const;
    /// One line per cell with raw numbers.
    std::string cells_csv() const;
    const CellStats& cell(const std::string& row_id, std::size_t views) const;
};

/// Runs every row for every image and view count. Failed runs are counted in
/// the cell and logged, not averaged.
BenchmarkTable cmd_benchmark(const ExperimentConfig& cfg, const std::vector<MethodSpec>& rows,
                             const std::string& command_line = {});

struct Roi2 {
    std::size_t row0 = 0, col0 = 0, rows = 0, cols = 0;
};

struct ProfileInput {
    std::string phantom;
    std::string method;
    std::filesystem::path path;
};
/// "phantom:method=path"
ProfileInput parse_profile_input(std::string_view s);
/// "row0,col0,rows,cols"
Roi2 parse_roi(std::string_view s);

/// Writes profile.csv (one column per input, one line per image column) and,
/// when both ROIs are given, cnr.csv with one row per phantom and one column
/// per method. Degenerate ROIs give an empty cell.
void cmd_profile(const std::vector<ProfileInput>& inputs, std::size_t row, const std::optional<Roi2>& feature,
                 const std::optional<Roi2>& background, const std::filesystem::path& output_dir);

/// DGR curves for every (architecture, SNR, image): one history CSV each plus
/// summary.csv with argmax iterations.
void cmd_curves(const ExperimentConfig& cfg, const std::vector<double>& snrs, const std::vector<std::string>& archs,
                const std::string& command_line = {});

/// Writes every dataset image as raw + PNG.
void cmd_phantom(const ExperimentConfig& cfg, const std::string& command_line = {});

/// Projects a raw/CSV image: writes clean and noisy sinograms (raw + PNG).
void cmd_project(const std::filesystem::path& image, const ExperimentConfig& cfg, const std::string& command_line = {});

}  // namespace sparsect::cli
