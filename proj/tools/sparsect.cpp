// sparsect: sparse-view CT reconstruction experiments from the command line.
//
// Every option can also come from a flat `key = value` file given with
// --config; keys are option names without the leading dashes, and flags on
// the command line win over the file.

#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "sparsect/cli.hpp"
#include "sparsect/io.hpp"

using namespace sparsect;
using namespace sparsect::cli;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

double parse_snr(const std::string& s) {
    if (s == "inf" || s == "none") return std::numeric_limits<double>::infinity();
    return io::parse_double(s);
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
    std::vector<T> out;
    for (const auto& item : split(s, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(item, &used);
            if (used != item.size() || item.front() == '-') throw std::invalid_argument(item);
            out.push_back(T(v));
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad ") + what + " list '" + s + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
    return out;
}

/// Raw option text, converted once parsing is done.
struct ExperimentArgs {
    std::string dataset = "shepp_logan";
    std::string seeds = "0";
    std::size_t ellipses_min = CountRange{}.lo, ellipses_max = CountRange{}.hi;
    std::string slices_dir;
    double hu_lo = HuOptions{}.window_lo, hu_hi = HuOptions{}.window_hi, hu_offset = HuOptions{}.png_offset;
    std::size_t image_size = 128;
    std::string views = "64";
    std::string snr = "39";
    std::string signal_power = "mean";
    std::uint64_t noise_seed = 1000;
    std::string method = "fbp";
    std::string fbp_filter = "ramp";
    bool fbp_clip = true;
    std::size_t sart_iterations = SartConfig{}.iterations;
    double sart_relaxation = SartConfig{}.relaxation;
    std::string sart_mode = "sequential";
    double tv_weight = SartTvConfig{}.tv_weight;
    std::optional<double> denoise_step;
    std::size_t denoise_iters = SartTvConfig{}.denoise_inner_iters;
    std::string weights;
    bool normalize_weights = false;
    std::size_t iterations = ExperimentConfig::desk_dgr().iterations;
    double input_noise_variance = DGRConfig{}.input_noise_variance;
    double lr = ExperimentConfig::desk_dgr().adam.lr;
    std::uint64_t dgr_seed = 0;
    std::string arch = "v1";
    std::optional<std::size_t> skip_channels, input_channels;
    std::string upsample = "bilinear";
    double dropout = 0.0;
    std::size_t early_stop_window = 0;
    double early_stop_delta = 0.0;
    std::string output_dir = "sparsect_out";
    std::size_t threads = 0;

    void add_to(CLI::App& app, bool with_method) {
        app.add_option("--dataset", dataset, "shepp_logan, ellipses or slices");
        app.add_option("--seeds", seeds, "ellipse seeds, comma separated");
        app.add_option("--ellipses-min", ellipses_min, "fewest ellipses per image");
        app.add_option("--ellipses-max", ellipses_max, "most ellipses per image");
        app.add_option("--slices-dir", slices_dir, "directory of HU slices (.png or .raw)");
        app.add_option("--hu-lo", hu_lo, "HU window low end");
        app.add_option("--hu-hi", hu_hi, "HU window high end");
        app.add_option("--hu-offset", hu_offset, "added to 16-bit PNG samples to get HU");
        app.add_option("--image-size", image_size, "reconstruction grid side in pixels");
        app.add_option("--views", views, "view counts, comma separated");
        app.add_option("--snr", snr, "sinogram SNR in dB, or inf");
        app.add_option("--signal-power", signal_power, "mean or peak");
        app.add_option("--noise-seed", noise_seed);
        if (with_method) app.add_option("--method", method, "fbp, sart, sart_tv or dgr");
        app.add_option("--fbp-filter", fbp_filter, "ramp or hann");
        app.add_option("--fbp-clip", fbp_clip, "clip FBP output to [0,1]");
        app.add_option("--sart-iterations", sart_iterations);
        app.add_option("--sart-relaxation", sart_relaxation);
        app.add_option("--sart-mode", sart_mode, "sequential or simultaneous");
        app.add_option("--tv-weight", tv_weight);
        app.add_option("--denoise-step", denoise_step, "default tv-weight * 0.02");
        app.add_option("--denoise-iters", denoise_iters);
        app.add_option("--weights", weights, "DGR loss weights meas/ssim/tv");
        app.add_option("--normalize-weights", normalize_weights, "rescale DGR weights to sum to 1");
        app.add_option("--iterations", iterations, "DGR iterations");
        app.add_option("--input-noise-variance", input_noise_variance);
        app.add_option("--lr", lr, "Adam learning rate");
        app.add_option("--dgr-seed", dgr_seed);
        app.add_option("--arch", arch, "v1, v2 or v3");
        app.add_option("--skip-channels", skip_channels);
        app.add_option("--input-channels", input_channels);
        app.add_option("--upsample", upsample, "bilinear or nearest");
        app.add_option("--dropout", dropout);
        app.add_option("--early-stop-window", early_stop_window, "0 disables early stopping");
        app.add_option("--early-stop-delta", early_stop_delta);
        app.add_option("-o,--output-dir", output_dir);
        app.add_option("--threads", threads, "worker threads; 0 = SPARSECT_THREADS or all cores");
    }

    ExperimentConfig build() const {
        ExperimentConfig c;
        c.dataset.kind = parse_dataset(dataset);
        c.dataset.seeds = parse_list<std::uint64_t>(seeds, "seed");
        c.dataset.ellipse_count = {ellipses_min, ellipses_max};
        c.dataset.slices_dir = slices_dir;
        c.dataset.hu.window_lo = hu_lo;
        c.dataset.hu.window_hi = hu_hi;
        c.dataset.hu.png_offset = hu_offset;
        c.image_size = image_size;
        c.views = parse_list<std::size_t>(views, "views");
        c.snr_db = parse_snr(snr);
        if (signal_power == "mean")
            c.power = SignalPower::kMean;
        else if (signal_power == "peak")
            c.power = SignalPower::kPeak;
        else
            throw ConfigError("signal-power must be mean or peak");
        c.noise_seed = noise_seed;
        c.method = parse_method(method);
        if (fbp_filter == "ramp")
            c.fbp.filter = FbpFilter::kRamp;
        else if (fbp_filter == "hann")
            c.fbp.filter = FbpFilter::kHann;
        else
            throw ConfigError("fbp-filter must be ramp or hann");
        c.fbp.clip = fbp_clip;
        c.sart.iterations = sart_iterations;
        c.sart.relaxation = sart_relaxation;
        if (sart_mode == "sequential")
            c.sart.mode = SartMode::kSequential;
        else if (sart_mode == "simultaneous")
            c.sart.mode = SartMode::kSimultaneous;
        else
            throw ConfigError("sart-mode must be sequential or simultaneous");
        c.sart_tv.tv_weight = tv_weight;
        c.sart_tv.denoise_step = denoise_step;
        c.sart_tv.denoise_inner_iters = denoise_iters;

        DGRConfig& d = c.dgr;
        if (!weights.empty()) d.weights = MethodSpec::parse("dgr:" + weights).weights;
        d.normalize_weights = normalize_weights;
        d.iterations = iterations;
        d.input_noise_variance = input_noise_variance;
        d.adam.lr = lr;
        d.seed = dgr_seed;
        const auto base = d.net;
        d.net = nn::SkipNetConfig::preset(arch);
        d.net.skip_channels = skip_channels.value_or(base.skip_channels);
        d.net.input_channels = input_channels.value_or(base.input_channels);
        if (upsample == "bilinear")
            d.net.upsample = nn::UpsampleMode::kBilinear;
        else if (upsample == "nearest")
            d.net.upsample = nn::UpsampleMode::kNearest;
        else
            throw ConfigError("upsample must be bilinear or nearest");
        d.net.dropout = dropout;
        if (early_stop_window > 0) d.early_stop = EarlyStop{early_stop_window, early_stop_delta};
        c.output_dir = output_dir;
        c.threads = threads;
        return c;
    }
};

/// Pulls --config out of argv. Returns the remaining arguments and the file, if any.
std::pair<std::vector<std::string>, std::string> take_config(int argc, char** argv) {
    std::vector<std::string> rest;
    std::string config;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            if (i + 1 >= argc) throw ConfigError("--config needs a file name");
            config = argv[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            config = a.substr(9);
        } else {
            rest.push_back(a);
        }
    }
    return {rest, config};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-view CT reconstruction: FBP, SART, SART+TV and deep generative reconstruction"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", std::string(SPARSECT_VERSION));
    app.footer("Options may also come from --config FILE (key = value lines, keys without dashes).");

    ExperimentArgs args;

    auto* rec = app.add_subcommand("reconstruct", "reconstruct every dataset image with one method");
    args.add_to(*rec, true);

    std::string rows = "table";
    auto* bench = app.add_subcommand("benchmark", "run method rows over a dataset and tabulate PSNR/SSIM");
    args.add_to(*bench, false);
    bench->add_option("--rows", rows, "comma separated rows (fbp, sart, sart_tv, dgr:m/s/t) or 'table'");

    std::vector<std::string> profile_inputs;
    std::size_t profile_row = 0;
    std::string feature, background, profile_out = "sparsect_out";
    auto* prof = app.add_subcommand("profile", "line profiles and CNR from saved reconstructions");
    prof->add_option("--input", profile_inputs, "phantom:method=path, repeatable")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    prof->add_option("--row", profile_row, "image row for the line profile")->required();
    prof->add_option("--feature", feature, "feature ROI row0,col0,rows,cols");
    prof->add_option("--background", background, "background ROI row0,col0,rows,cols");
    prof->add_option("-o,--output-dir", profile_out);

    std::string snrs = "30,39", archs = "v1,v3";
    auto* curves = app.add_subcommand("curves", "per-iteration PSNR/SSIM curves of DGR against ground truth");
    args.add_to(*curves, false);
    curves->add_option("--snrs", snrs, "SNR values in dB, comma separated");
    curves->add_option("--archs", archs, "architectures, comma separated");

    auto* phantom = app.add_subcommand("phantom", "write dataset images");
    args.add_to(*phantom, false);

    std::string image;
    auto* project = app.add_subcommand("project", "forward-project an image into clean and noisy sinograms");
    args.add_to(*project, false);
    project->add_option("--image", image, "image file (.sct raw or .csv)")->required();

    std::string command_line;
    for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

    try {
        auto [tokens, config] = take_config(argc, argv);
        if (!config.empty()) {
            // File values go right after the subcommand so later flags override them.
            auto it = tokens.begin();
            while (it != tokens.end() && !app.get_subcommand_no_throw(*it)) ++it;
            if (it == tokens.end()) throw ConfigError("--config needs a subcommand");
            CLI::App* sub = app.get_subcommand(*it);
            std::vector<std::string> injected;
            for (const auto& [key, value] : read_kv_file(config)) {
                if (!sub->get_option_no_throw("--" + key))
                    throw ConfigError("config key '" + key + "' is not an option of " + sub->get_name());
                injected.push_back("--" + key + "=" + value);
            }
            tokens.insert(it + 1, injected.begin(), injected.end());
        }
        std::reverse(tokens.begin(), tokens.end());
        app.parse(tokens);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*prof) {
            std::vector<ProfileInput> inputs;
            for (const auto& s : profile_inputs) inputs.push_back(parse_profile_input(s));
            std::optional<Roi2> f, b;
            if (!feature.empty()) f = parse_roi(feature);
            if (!background.empty()) b = parse_roi(background);
            cmd_profile(inputs, profile_row, f, b, profile_out);
            std::cout << "wrote " << profile_out << "/profile.csv" << (f ? " and cnr.csv" : "") << "\n";
            return 0;
        }

        const ExperimentConfig cfg = args.build();
        if (*rec) {
            const std::size_t n = cmd_reconstruct(cfg, command_line);
            std::cout << "wrote " << n << " reconstructions to " << cfg.output_dir.string() << "\n";
        } else if (*bench) {
            std::vector<MethodSpec> specs;
            if (rows == "table")
                specs = table_rows();
            else
                for (const auto& r : split(rows, ',')) specs.push_back(MethodSpec::parse(r));
            const BenchmarkTable t = cmd_benchmark(cfg, specs, command_line);
            std::cout << t.to_csv();
            std::size_t failed = 0;
            for (const auto& row : t.cells)
                for (const auto& c : row) failed += c.failed;
            if (failed) std::cerr << failed << " run(s) failed; see runs.jsonl\n";
        } else if (*curves) {
            std::vector<double> s;
            for (const auto& v : split(snrs, ',')) s.push_back(parse_snr(v));
            cmd_curves(cfg, s, split(archs, ','), command_line);
            std::cout << "wrote " << (cfg.output_dir / "curves" / "summary.csv").string() << "\n";
        } else if (*phantom) {
            cmd_phantom(cfg, command_line);
            std::cout << "wrote phantoms to " << cfg.output_dir.string() << "\n";
        } else if (*project) {
            cmd_project(image, cfg, command_line);
            std::cout << "wrote sinograms to " << cfg.output_dir.string() << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
