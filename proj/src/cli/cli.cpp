#include "sparsect/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sparsect/io.hpp"
#include "sparsect/projection.hpp"

#ifndef SPARSECT_VERSION
#define SPARSECT_VERSION "unknown"
#endif

namespace sparsect::cli {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) { return io::format_double(v); }

// Raw images are stored as float32; print them at that precision.
std::string fmt_f32(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, float(v));
    return std::string(buf, r.ptr);
}

std::string fixed(double v, int digits) {
    std::ostringstream o;
    o.imbue(std::locale::classic());
    o.setf(std::ios::fixed);
    o.precision(digits);
    o << v;
    return o.str();
}

ordered_json number_or_string(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_preview(const Array2D& a, const fs::path& path) {
    double lo = 0.0, hi = 1.0;
    if (a.size() > 0) {
        const auto [mn, mx] = std::minmax_element(a.values().begin(), a.values().end());
        if (*mn < 0.0 || *mx > 1.0) {
            lo = *mn;
            hi = *mx > *mn ? *mx : *mn + 1.0;
        }
    }
    io::write_png8(a, path, lo, hi);
}

ordered_json weights_json(const LossWeights& w) { return ordered_json::array({w.w_meas, w.w_ssim, w.w_tv}); }

ordered_json config_json(const ExperimentConfig& c) {
    ordered_json j;
    j["dataset"] = to_string(c.dataset.kind);
    j["seeds"] = c.dataset.seeds;
    j["ellipse_count"] = {c.dataset.ellipse_count.lo, c.dataset.ellipse_count.hi};
    j["slices_dir"] = c.dataset.slices_dir.string();
    j["hu_window"] = {c.dataset.hu.window_lo, c.dataset.hu.window_hi};
    j["hu_png_offset"] = c.dataset.hu.png_offset;
    j["image_size"] = c.image_size;
    j["views"] = c.views;
    j["snr_db"] = number_or_string(c.snr_db);
    j["signal_power"] = c.power == SignalPower::kMean ? "mean" : "peak";
    j["noise_seed"] = c.noise_seed;
    j["method"] = to_string(c.method);
    j["fbp_filter"] = c.fbp.filter == FbpFilter::kRamp ? "ramp" : "hann";
    j["fbp_clip"] = c.fbp.clip;
    j["sart_iterations"] = c.sart.iterations;
    j["sart_relaxation"] = c.sart.relaxation;
    j["sart_mode"] = c.sart.mode == SartMode::kSequential ? "sequential" : "simultaneous";
    j["tv_weight"] = c.sart_tv.tv_weight;
    j["denoise_step"] = c.sart_tv.effective_denoise_step();
    j["denoise_inner_iters"] = c.sart_tv.denoise_inner_iters;
    const auto& d = c.dgr;
    j["dgr_weights"] = weights_json(d.weights);
    j["dgr_normalize_weights"] = d.normalize_weights;
    j["dgr_iterations"] = d.iterations;
    j["dgr_input_noise_variance"] = d.input_noise_variance;
    j["dgr_lr"] = d.adam.lr;
    j["dgr_seed"] = d.seed;
    j["dgr_scales"] = d.net.scales;
    j["dgr_channels"] = d.net.channels_per_scale;
    j["dgr_skip_channels"] = d.net.skip_channels;
    j["dgr_input_channels"] = d.net.input_channels;
    j["dgr_upsample"] = d.net.upsample == nn::UpsampleMode::kBilinear ? "bilinear" : "nearest";
    j["dgr_dropout"] = d.net.dropout;
    if (d.early_stop) j["dgr_early_stop"] = {d.early_stop->window, d.early_stop->min_delta};
    j["output_dir"] = c.output_dir.string();
    j["threads"] = resolve_threads(c.threads);
    return j;
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& command_line,
                    const ExperimentConfig& cfg, const ordered_json& extra = ordered_json::object()) {
    ordered_json m;
    m["tool"] = "sparsect";
    m["version"] = SPARSECT_VERSION;
    m["command"] = command;
    m["command_line"] = command_line;
    m["config"] = config_json(cfg);
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool needs_x0(const std::vector<MethodSpec>& rows) {
    return std::any_of(rows.begin(), rows.end(), [](const MethodSpec& r) { return r.method == Method::kDgr; });
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    if (v.size() < 2) return {m, 0.0};
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, std::sqrt(s / double(v.size() - 1))};
}

}  // namespace

DatasetKind parse_dataset(std::string_view s) {
    if (s == "shepp_logan") return DatasetKind::kSheppLogan;
    if (s == "ellipses") return DatasetKind::kEllipses;
    if (s == "slices") return DatasetKind::kSlices;
    throw ConfigError("unknown dataset '" + std::string(s) + "' (expected shepp_logan, ellipses or slices)");
}

Method parse_method(std::string_view s) {
    if (s == "fbp") return Method::kFbp;
    if (s == "sart") return Method::kSart;
    if (s == "sart_tv") return Method::kSartTv;
    if (s == "dgr") return Method::kDgr;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected fbp, sart, sart_tv or dgr)");
}

std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::kSheppLogan: return "shepp_logan";
        case DatasetKind::kEllipses: return "ellipses";
        case DatasetKind::kSlices: return "slices";
    }
    return "?";
}

std::string to_string(Method m) {
    switch (m) {
        case Method::kFbp: return "fbp";
        case Method::kSart: return "sart";
        case Method::kSartTv: return "sart_tv";
        case Method::kDgr: return "dgr";
    }
    return "?";
}

DGRConfig ExperimentConfig::desk_dgr() {
    DGRConfig d;
    d.iterations = 800;
    d.adam.lr = 1e-2;
    d.net.skip_channels = 16;
    return d;
}

void ExperimentConfig::validate() const {
    if (image_size < 16) throw ConfigError("image_size must be at least 16");
    if (views.empty()) throw ConfigError("at least one view count is required");
    for (std::size_t v : views)
        if (v == 0) throw ConfigError("view counts must be positive");
    if (std::isnan(snr_db)) throw ConfigError("snr_db must be a number");
    if (dataset.kind == DatasetKind::kEllipses && dataset.seeds.empty())
        throw ConfigError("ellipses dataset needs at least one seed");
    if (dataset.kind == DatasetKind::kSlices && dataset.slices_dir.empty())
        throw ConfigError("slices dataset needs slices_dir");
    sart.validate();
    SartTvConfig tv = sart_tv;
    tv.sart = sart;
    tv.validate();
    dgr.validate();
}

std::vector<std::pair<std::string, std::string>> read_kv_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::set<std::string> seen;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(std::string_view(t).substr(0, eq));
        std::string value = trim(std::string_view(t).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": empty key");
        if (!seen.insert(key).second)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

std::vector<std::string> kv_to_args(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::vector<std::string> args;
    for (const auto& [k, v] : kv) args.push_back("--" + k + "=" + v);
    return args;
}

std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SPARSECT_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1) throw ConfigError("SPARSECT_THREADS must be a positive integer");
        return std::size_t(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::min(std::max<std::size_t>(threads, 1), count);
    std::exception_ptr error;
    std::mutex error_mutex;
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::vector<DatasetImage> load_dataset(const ExperimentConfig& cfg) {
    const std::size_t n = cfg.image_size;
    std::vector<DatasetImage> out;
    switch (cfg.dataset.kind) {
        case DatasetKind::kSheppLogan:
            out.push_back({"shepp_logan", shepp_logan(n)});
            break;
        case DatasetKind::kEllipses:
            for (std::uint64_t s : cfg.dataset.seeds)
                out.push_back({"ellipses_" + std::to_string(s), random_ellipses(n, s, cfg.dataset.ellipse_count)});
            break;
        case DatasetKind::kSlices: {
            const fs::path& dir = cfg.dataset.slices_dir;
            if (!fs::is_directory(dir)) throw ConfigError("slices_dir is not a directory: " + dir.string());
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(dir)) {
                const auto ext = e.path().extension();
                if (e.is_regular_file() && (ext == ".png" || ext == ".raw")) files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            const Geometry geom = Geometry::parallel(n, 1);
            for (const auto& f : files) {
                Image2D im = resize_image(load_hu_slice(f, cfg.dataset.hu), n);
                // Only the inscribed circle is reconstructable.
                for (std::size_t i = 0; i < im.size(); ++i)
                    if (!geom.support()[i]) im[i] = 0.0;
                out.push_back({f.stem().string(), std::move(im)});
            }
            break;
        }
    }
    if (out.empty()) throw ConfigError("dataset is empty");
    return out;
}

Measurement measure(const Image2D& gt, std::size_t views, const ExperimentConfig& cfg, std::size_t image_index) {
    Measurement m{Geometry::parallel(gt.image_size(), views), {}, {}};
    m.clean = forward_project(gt, m.geom);
    const std::uint64_t seed = cfg.noise_seed * 1000003ULL + image_index * 1009ULL + views;
    m.noisy = std::isinf(cfg.snr_db) && cfg.snr_db > 0 ? m.clean : add_awgn(m.clean, {cfg.snr_db, seed, cfg.power});
    return m;
}

std::string MethodSpec::id() const {
    if (method != Method::kDgr) return to_string(method);
    return "dgr:" + fmt(weights.w_meas) + "/" + fmt(weights.w_ssim) + "/" + fmt(weights.w_tv);
}

MethodSpec MethodSpec::parse(std::string_view id) {
    MethodSpec s;
    const auto colon = id.find(':');
    s.method = parse_method(id.substr(0, colon));
    if (s.method == Method::kDgr) {
        s.weights = DGRConfig{}.weights;
        if (colon != std::string_view::npos) {
            const std::string rest(id.substr(colon + 1));
            std::vector<double> w;
            std::size_t pos = 0;
            while (pos <= rest.size()) {
                const auto slash = rest.find('/', pos);
                const auto part = rest.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
                try {
                    w.push_back(io::parse_double(part));
                } catch (const std::exception&) {
                    throw ConfigError("bad DGR weights '" + rest + "'");
                }
                if (slash == std::string::npos) break;
                pos = slash + 1;
            }
            if (w.size() != 3) throw ConfigError("DGR weights need three values: meas/ssim/tv");
            s.weights = {w[0], w[1], w[2]};
        }
    } else if (colon != std::string_view::npos) {
        throw ConfigError("only dgr rows take weights: '" + std::string(id) + "'");
    }
    return s;
}

std::vector<MethodSpec> table_rows() {
    std::vector<MethodSpec> rows{{Method::kFbp}, {Method::kSart}, {Method::kSartTv}};
    const std::vector<LossWeights> grid{{1.0, 0.0, 0.0},   {0.999, 0.001, 0.0}, {0.99, 0.01, 0.0}, {0.99, 0.0, 0.01},
                                        {0.98, 0.01, 0.01}, {0.9, 0.1, 0.0},     {0.9, 0.0, 0.1},  {0.8, 0.1, 0.1},
                                        {0.5, 0.5, 0.0},   {0.33, 0.33, 0.33},  {0.0, 1.0, 0.0},  {0.0, 0.99, 0.01},
                                        {0.0, 0.9, 0.1}};
    for (const auto& w : grid) rows.push_back({Method::kDgr, w});
    return rows;
}

RunOutput run_method(const MethodSpec& spec, const Measurement& m, const Image2D& x0, const ExperimentConfig& cfg,
                     const std::optional<Image2D>& track) {
    RunOutput out;
    const auto t0 = std::chrono::steady_clock::now();
    switch (spec.method) {
        case Method::kFbp:
            out.image = fbp(m.noisy, m.geom, cfg.fbp);
            break;
        case Method::kSart:
            out.image = sart(m.noisy, m.geom, cfg.sart);
            break;
        case Method::kSartTv: {
            SartTvConfig c = cfg.sart_tv;
            c.sart = cfg.sart;
            out.image = sart_tv(m.noisy, m.geom, c);
            break;
        }
        case Method::kDgr: {
            DGRConfig d = cfg.dgr;
            d.weights = spec.weights;
            // Rows like 0.33/0.33/0.33 only make sense renormalized.
            const double sum = spec.weights.w_meas + spec.weights.w_ssim + spec.weights.w_tv;
            d.normalize_weights = cfg.dgr.normalize_weights || std::abs(sum - 1.0) > 1e-9;
            d.track_psnr_against = track;
            auto r = dgr_reconstruct(m.noisy, m.geom, x0, d);
            out.image = std::move(r.image);
            out.history = std::move(r.history);
            break;
        }
    }
    out.runtime_s = seconds_since(t0);
    return out;
}

std::size_t cmd_reconstruct(const ExperimentConfig& cfg, const std::string& command_line) {
    cfg.validate();
    const auto images = load_dataset(cfg);
    ensure_dir(cfg.output_dir);
    MethodSpec spec{cfg.method, cfg.dgr.weights};

    struct Task {
        std::size_t image, views;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < images.size(); ++i)
        for (std::size_t v : cfg.views) tasks.push_back({i, v});
    std::vector<ordered_json> records(tasks.size());

    for (const auto& im : images) {
        const fs::path dir = cfg.output_dir / im.name;
        ensure_dir(dir);
        io::write_raw(im.image, dir / "ground_truth.sct");
        io::write_png8(im.image, dir / "ground_truth.png");
    }

    parallel_for(tasks.size(), resolve_threads(cfg.threads), [&](std::size_t k) {
        const auto& im = images[tasks[k].image];
        const fs::path dir = cfg.output_dir / im.name / ("v" + std::to_string(tasks[k].views));
        ensure_dir(dir);
        const Measurement m = measure(im.image, tasks[k].views, cfg, tasks[k].image);
        io::write_raw(m.clean, dir / "sinogram.sct");
        write_preview(m.clean, dir / "sinogram.png");
        io::write_raw(m.noisy, dir / "sinogram_noisy.sct");
        write_preview(m.noisy, dir / "sinogram_noisy.png");
        const Image2D x0 = spec.method == Method::kDgr ? sart(m.noisy, m.geom, cfg.sart) : Image2D{};
        const RunOutput r = run_method(spec, m, x0, cfg);
        const std::string stem = to_string(spec.method);
        io::write_raw(r.image, dir / (stem + ".sct"));
        io::write_png8(r.image, dir / (stem + ".png"));
        if (r.history) r.history->write_csv(dir / (stem + "_history.csv"));
        ordered_json rec;
        rec["image"] = im.name;
        rec["views"] = tasks[k].views;
        rec["snr_db"] = number_or_string(cfg.snr_db);
        rec["method"] = spec.id();
        rec["psnr"] = number_or_string(psnr(r.image, im.image));
        rec["ssim"] = ssim(r.image, im.image);
        rec["runtime_s"] = r.runtime_s;
        records[k] = std::move(rec);
    });

    std::string lines;
    for (const auto& r : records) lines += r.dump() + "\n";
    write_text(cfg.output_dir / "metrics.jsonl", lines);
    write_manifest(cfg.output_dir, "reconstruct", command_line, cfg);
    return tasks.size();
}

const CellStats& BenchmarkTable::cell(const std::string& row_id, std::size_t v) const {
    for (std::size_t r = 0; r < rows.size(); ++r)
        if (rows[r].id() == row_id)
            for (std::size_t j = 0; j < views.size(); ++j)
                if (views[j] == v) return cells[r][j];
    throw ConfigError("no benchmark cell for " + row_id + " at " + std::to_string(v) + " views");
}

std::string BenchmarkTable::to_csv() const {
    std::ostringstream o;
    o << "method,w_meas,w_ssim,w_tv";
    for (std::size_t v : views) o << ",psnr_" << v << ",ssim_" << v << ",n_" << v << ",failed_" << v;
    o << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& spec = rows[r];
        static const char* names[] = {"FBP", "SART", "SART+TV", "DGR"};
        o << names[int(spec.method)];
        if (spec.method == Method::kDgr)
            o << ',' << fixed(spec.weights.w_meas, 3) << ',' << fixed(spec.weights.w_ssim, 3) << ','
              << fixed(spec.weights.w_tv, 3);
        else
            o << ",,,";
        for (std::size_t j = 0; j < views.size(); ++j) {
            const auto& c = cells[r][j];
            if (c.n == 0) {
                o << ",FAILED,FAILED," << c.n << ',' << c.failed;
                continue;
            }
            o << ',' << fixed(c.psnr_mean, 2) << " ± " << fixed(c.psnr_std, 2) << ',' << fixed(100 * c.ssim_mean, 2)
              << " ± " << fixed(100 * c.ssim_std, 2) << ',' << c.n << ',' << c.failed;
        }
        o << '\n';
    }
    return o.str();
}

std::string BenchmarkTable::cells_csv() const {
    std::ostringstream o;
    o << "method,views,n,failed,psnr_mean,psnr_std,ssim_mean,ssim_std\n";
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < views.size(); ++j) {
            const auto& c = cells[r][j];
            o << rows[r].id() << ',' << views[j] << ',' << c.n << ',' << c.failed << ',' << fmt(c.psnr_mean) << ','
              << fmt(c.psnr_std) << ',' << fmt(c.ssim_mean) << ',' << fmt(c.ssim_std) << '\n';
        }
    return o.str();
}

BenchmarkTable cmd_benchmark(const ExperimentConfig& cfg, const std::vector<MethodSpec>& rows,
                             const std::string& command_line) {
    cfg.validate();
    if (rows.empty()) throw ConfigError("benchmark needs at least one method row");
    const auto images = load_dataset(cfg);
    ensure_dir(cfg.output_dir);
    const std::size_t threads = resolve_threads(cfg.threads);
    const std::size_t ni = images.size(), nv = cfg.views.size();

    // Shared per (image, views): measurement and the SART estimate DGR starts from.
    std::vector<Measurement> meas(ni * nv);
    std::vector<Image2D> x0(ni * nv);
    const bool want_x0 = needs_x0(rows);
    parallel_for(ni * nv, threads, [&](std::size_t k) {
        meas[k] = measure(images[k / nv].image, cfg.views[k % nv], cfg, k / nv);
        if (want_x0) x0[k] = sart(meas[k].noisy, meas[k].geom, cfg.sart);
    });

    struct Result {
        bool ok = false;
        double psnr = 0.0, ssim = 0.0, runtime_s = 0.0;
        std::string error;
    };
    const std::size_t total = rows.size() * ni * nv;
    std::vector<Result> results(total);
    parallel_for(total, threads, [&](std::size_t k) {
        const std::size_t r = k / (ni * nv), mk = k % (ni * nv);
        Result& res = results[k];
        try {
            const RunOutput out = run_method(rows[r], meas[mk], x0[mk], cfg);
            res.psnr = psnr(out.image, images[mk / nv].image);
            res.ssim = ssim(out.image, images[mk / nv].image);
            res.runtime_s = out.runtime_s;
            res.ok = std::isfinite(res.psnr) || res.psnr > 0;
            if (!res.ok) res.error = "non-finite metric";
        } catch (const std::exception& e) {
            res.error = e.what();
        }
    });

    BenchmarkTable table{rows, cfg.views, {}};
    table.cells.assign(rows.size(), std::vector<CellStats>(nv));
    std::string runs;
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < nv; ++j) {
            std::vector<double> p, s;
            CellStats& c = table.cells[r][j];
            for (std::size_t i = 0; i < ni; ++i) {
                const Result& res = results[r * ni * nv + i * nv + j];
                ordered_json rec;
                rec["method"] = rows[r].id();
                rec["image"] = images[i].name;
                rec["views"] = cfg.views[j];
                rec["snr_db"] = number_or_string(cfg.snr_db);
                if (res.ok) {
                    p.push_back(res.psnr);
                    s.push_back(res.ssim);
                    rec["psnr"] = number_or_string(res.psnr);
                    rec["ssim"] = res.ssim;
                    rec["runtime_s"] = res.runtime_s;
                } else {
                    ++c.failed;
                    rec["error"] = res.error;
                }
                runs += rec.dump() + "\n";
            }
            c.n = p.size();
            std::tie(c.psnr_mean, c.psnr_std) = mean_std(p);
            std::tie(c.ssim_mean, c.ssim_std) = mean_std(s);
        }

    write_text(cfg.output_dir / "table.csv", table.to_csv());
    write_text(cfg.output_dir / "cells.csv", table.cells_csv());
    write_text(cfg.output_dir / "runs.jsonl", runs);
    ordered_json extra;
    std::vector<std::string> ids;
    for (const auto& r : rows) ids.push_back(r.id());
    extra["rows"] = ids;
    std::vector<std::string> names;
    for (const auto& im : images) names.push_back(im.name);
    extra["images"] = names;
    write_manifest(cfg.output_dir, "benchmark", command_line, cfg, extra);
    return table;
}

ProfileInput parse_profile_input(std::string_view s) {
    const auto colon = s.find(':');
    const auto eq = s.find('=');
    if (colon == std::string_view::npos || eq == std::string_view::npos || colon > eq || colon == 0 || eq == colon + 1)
        throw ConfigError("profile input must look like phantom:method=path, got '" + std::string(s) + "'");
    return {std::string(s.substr(0, colon)), std::string(s.substr(colon + 1, eq - colon - 1)),
            fs::path(std::string(s.substr(eq + 1)))};
}

Roi2 parse_roi(std::string_view s) {
    std::vector<std::size_t> v;
    std::string token;
    std::istringstream in{std::string(s)};
    while (std::getline(in, token, ',')) {
        const std::string t = trim(token);
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("ROI must be row0,col0,rows,cols with nonnegative integers, got '" + std::string(s) + "'");
        v.push_back(std::stoull(t));
    }
    if (v.size() != 4) throw ConfigError("ROI must have four values: row0,col0,rows,cols");
    return {v[0], v[1], v[2], v[3]};
}

void cmd_profile(const std::vector<ProfileInput>& inputs, std::size_t row, const std::optional<Roi2>& feature,
                 const std::optional<Roi2>& background, const fs::path& output_dir) {
    if (inputs.empty()) throw ConfigError("profile needs at least one input");
    if (feature.has_value() != background.has_value())
        throw ConfigError("CNR needs both a feature and a background ROI");
    std::vector<Image2D> images;
    for (const auto& in : inputs) images.emplace_back(io::load_array(in.path));
    for (const auto& im : images)
        if (!im.same_shape(images.front())) throw ConfigError("profile inputs must all have the same size");
    const std::size_t n = images.front().image_size();
    if (row >= n) throw ConfigError("row " + std::to_string(row) + " is out of bounds for " + std::to_string(n) + " rows");
    ensure_dir(output_dir);

    std::ostringstream prof;
    prof << "col";
    for (const auto& in : inputs) prof << ',' << in.phantom << ':' << in.method;
    prof << '\n';
    for (std::size_t c = 0; c < n; ++c) {
        prof << c;
        for (const auto& im : images) prof << ',' << fmt_f32(im(row, c));
        prof << '\n';
    }
    write_text(output_dir / "profile.csv", prof.str());

    if (!feature) return;
    const Roi f{feature->row0, feature->col0, feature->rows, feature->cols};
    const Roi b{background->row0, background->col0, background->rows, background->cols};
    std::vector<std::string> phantoms, methods;
    for (const auto& in : inputs) {
        if (std::find(phantoms.begin(), phantoms.end(), in.phantom) == phantoms.end()) phantoms.push_back(in.phantom);
        if (std::find(methods.begin(), methods.end(), in.method) == methods.end()) methods.push_back(in.method);
    }
    std::map<std::pair<std::string, std::string>, std::string> table;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        std::string cell;
        try {
            const double v = cnr(images[k], f, b);
            cell = std::isfinite(v) ? fixed(v, 2) : fmt(v);
        } catch (const DegenerateRoiError&) {
            cell = "degenerate";
        }
        table[{inputs[k].phantom, inputs[k].method}] = cell;
    }
    std::ostringstream out;
    out << "phantom";
    for (const auto& m : methods) out << ',' << m;
    out << '\n';
    for (const auto& p : phantoms) {
        out << p;
        for (const auto& m : methods) {
            const auto it = table.find({p, m});
            out << ',' << (it == table.end() ? "" : it->second);
        }
        out << '\n';
    }
    write_text(output_dir / "cnr.csv", out.str());
}

void cmd_curves(const ExperimentConfig& cfg, const std::vector<double>& snrs, const std::vector<std::string>& archs,
                const std::string& command_line) {
    cfg.validate();
    if (snrs.empty() || archs.empty()) throw ConfigError("curves needs at least one SNR and one architecture");
    for (const auto& a : archs) nn::SkipNetConfig::preset(a);
    const auto images = load_dataset(cfg);
    const fs::path dir = cfg.output_dir / "curves";
    ensure_dir(dir);

    struct Task {
        std::string arch;
        double snr;
        std::size_t views, image;
    };
    std::vector<Task> tasks;
    for (const auto& a : archs)
        for (double s : snrs)
            for (std::size_t v : cfg.views)
                for (std::size_t i = 0; i < images.size(); ++i) tasks.push_back({a, s, v, i});
    std::vector<std::string> summary(tasks.size());

    parallel_for(tasks.size(), resolve_threads(cfg.threads), [&](std::size_t k) {
        const Task& t = tasks[k];
        ExperimentConfig c = cfg;
        c.snr_db = t.snr;
        const auto net_seed = c.dgr.net.seed;
        const auto skip = c.dgr.net.skip_channels;
        const auto up = c.dgr.net.upsample;
        const auto in_ch = c.dgr.net.input_channels;
        c.dgr.net = nn::SkipNetConfig::preset(t.arch);
        c.dgr.net.seed = net_seed;
        c.dgr.net.skip_channels = skip;
        c.dgr.net.upsample = up;
        c.dgr.net.input_channels = in_ch;
        const auto& gt = images[t.image].image;
        const Measurement m = measure(gt, t.views, c, t.image);
        const Image2D x0 = sart(m.noisy, m.geom, c.sart);
        const RunOutput r = run_method({Method::kDgr, c.dgr.weights}, m, x0, c, gt);
        const RunHistory& h = *r.history;
        const std::string name = t.arch + "_snr" + fmt(t.snr) + "_v" + std::to_string(t.views) + "_" + images[t.image].name;
        h.write_csv(dir / (name + ".csv"));
        const std::size_t bp = *h.best_psnr_iteration();
        std::size_t bs = 0;
        for (std::size_t i = 0; i < h.size(); ++i)
            if (*h.records[i].ssim > *h.records[bs].ssim) bs = i;
        std::ostringstream o;
        o << t.arch << ',' << fmt(t.snr) << ',' << t.views << ',' << images[t.image].name << ',' << h.size() << ','
          << bp << ',' << fmt(*h.records[bp].psnr) << ',' << fmt(*h.records.back().psnr) << ',' << bs << ','
          << fmt(*h.records[bs].ssim) << ',' << fmt(*h.records.back().ssim) << '\n';
        summary[k] = o.str();
    });

    std::string s =
        "arch,snr_db,views,image,iterations,argmax_psnr_iteration,max_psnr,final_psnr,argmax_ssim_iteration,max_ssim,"
        "final_ssim\n";
    for (const auto& line : summary) s += line;
    write_text(dir / "summary.csv", s);
    ordered_json extra;
    std::vector<ordered_json> sn;
    for (double v : snrs) sn.push_back(number_or_string(v));
    extra["snrs"] = sn;
    extra["archs"] = archs;
    write_manifest(cfg.output_dir, "curves", command_line, cfg, extra);
}

void cmd_phantom(const ExperimentConfig& cfg, const std::string& command_line) {
    cfg.validate();
    const auto images = load_dataset(cfg);
    ensure_dir(cfg.output_dir);
    for (const auto& im : images) {
        io::write_raw(im.image, cfg.output_dir / (im.name + ".sct"));
        io::write_png8(im.image, cfg.output_dir / (im.name + ".png"));
    }
    write_manifest(cfg.output_dir, "phantom", command_line, cfg);
}

void cmd_project(const fs::path& image, const ExperimentConfig& cfg, const std::string& command_line) {
    cfg.validate();
    const Image2D im(io::load_array(image));
    ensure_dir(cfg.output_dir);
    const std::string stem = image.stem().string();
    for (std::size_t v : cfg.views) {
        const Measurement m = measure(im, v, cfg, 0);
        const std::string base = stem + "_v" + std::to_string(v);
        io::write_raw(m.clean, cfg.output_dir / (base + "_sinogram.sct"));
        write_preview(m.clean, cfg.output_dir / (base + "_sinogram.png"));
        io::write_raw(m.noisy, cfg.output_dir / (base + "_sinogram_noisy.sct"));
        write_preview(m.noisy, cfg.output_dir / (base + "_sinogram_noisy.png"));
    }
    ordered_json extra;
    extra["input"] = image.string();
    write_manifest(cfg.output_dir, "project", command_line, cfg, extra);
}

}  // namespace sparsect::cli
