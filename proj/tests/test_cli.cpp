#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sparsect/cli.hpp"
#include "sparsect/io.hpp"

using namespace sparsect;
using namespace sparsect::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sparsect_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
    std::vector<nlohmann::json> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig c;
    c.dataset.kind = DatasetKind::kEllipses;
    c.dataset.seeds = {1, 2};
    c.image_size = 32;
    c.views = {8, 16};
    c.snr_db = 35.0;
    c.sart.iterations = 5;
    c.output_dir = out;
    c.threads = 1;
    return c;
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(SPARSECT_TOOL) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("read_kv_file") {
    const fs::path dir = fresh_dir("kv");

    SUBCASE("comments, blanks, spaces and quotes") {
        write_file(dir / "a.cfg", "# header\n\nviews = 32,64  # trailing\n  snr=39\nslices-dir = \"my dir\"\n");
        const auto kv = read_kv_file(dir / "a.cfg");
        REQUIRE(kv.size() == 3);
        CHECK(kv[0] == std::pair<std::string, std::string>{"views", "32,64"});
        CHECK(kv[1] == std::pair<std::string, std::string>{"snr", "39"});
        CHECK(kv[2].second == "my dir");
        CHECK(kv_to_args(kv) == std::vector<std::string>{"--views=32,64", "--snr=39", "--slices-dir=my dir"});
    }
    SUBCASE("duplicate key") {
        write_file(dir / "b.cfg", "snr = 1\nsnr = 2\n");
        CHECK_THROWS_AS(read_kv_file(dir / "b.cfg"), ConfigError);
    }
    SUBCASE("line without =") {
        write_file(dir / "c.cfg", "snr 39\n");
        CHECK_THROWS_AS(read_kv_file(dir / "c.cfg"), ConfigError);
    }
    SUBCASE("empty key") {
        write_file(dir / "d.cfg", "= 3\n");
        CHECK_THROWS_AS(read_kv_file(dir / "d.cfg"), ConfigError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_kv_file(dir / "nope.cfg"), ConfigError); }
}

TEST_CASE("resolve_threads") {
    CHECK(resolve_threads(3) == 3);
    setenv("SPARSECT_THREADS", "2", 1);
    CHECK(resolve_threads(0) == 2);
    setenv("SPARSECT_THREADS", "zero", 1);
    CHECK_THROWS_AS(resolve_threads(0), ConfigError);
    setenv("SPARSECT_THREADS", "0", 1);
    CHECK_THROWS_AS(resolve_threads(0), ConfigError);
    unsetenv("SPARSECT_THREADS");
    CHECK(resolve_threads(0) >= 1);
}

TEST_CASE("parallel_for") {
    for (std::size_t threads : {1, 4}) {
        CAPTURE(threads);
        std::vector<std::atomic<int>> hits(37);
        parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
        for (const auto& h : hits) CHECK(h == 1);

        std::atomic<int> done{0};
        CHECK_THROWS_AS(parallel_for(10, threads,
                                     [&](std::size_t i) {
                                         if (i == 3) throw std::runtime_error("boom");
                                         ++done;
                                     }),
                        std::runtime_error);
        // Other items still run.
        CHECK(done == 9);
    }
    parallel_for(0, 4, [](std::size_t) { FAIL("called with empty range"); });
}

TEST_CASE("MethodSpec") {
    CHECK(MethodSpec::parse("fbp").method == Method::kFbp);
    CHECK(MethodSpec::parse("sart_tv").id() == "sart_tv");
    const auto d = MethodSpec::parse("dgr:0.9/0/0.1");
    CHECK(d.method == Method::kDgr);
    CHECK(d.weights == LossWeights{0.9, 0.0, 0.1});
    CHECK(d.id() == "dgr:0.9/0/0.1");
    CHECK(MethodSpec::parse(d.id()).weights == d.weights);
    CHECK(MethodSpec::parse("dgr").weights == DGRConfig{}.weights);
    CHECK_THROWS_AS(MethodSpec::parse("dgr:1/0"), ConfigError);
    CHECK_THROWS_AS(MethodSpec::parse("dgr:a/b/c"), ConfigError);
    CHECK_THROWS_AS(MethodSpec::parse("sart:1/0/0"), ConfigError);
    CHECK_THROWS_AS(MethodSpec::parse("art"), ConfigError);
}

TEST_CASE("table_rows") {
    const auto rows = table_rows();
    REQUIRE(rows.size() == 16);
    CHECK(rows[0].id() == "fbp");
    CHECK(rows[1].id() == "sart");
    CHECK(rows[2].id() == "sart_tv");
    std::set<std::string> ids;
    for (const auto& r : rows) ids.insert(r.id());
    CHECK(ids.size() == 16);
    for (const char* id : {"dgr:1/0/0", "dgr:0.9/0/0.1", "dgr:0/1/0", "dgr:0.33/0.33/0.33", "dgr:0/0.9/0.1"})
        CHECK(ids.count(id) == 1);
}

TEST_CASE("parse_roi and parse_profile_input") {
    const Roi2 r = parse_roi("3, 4,5,6");
    CHECK(r.row0 == 3);
    CHECK(r.col0 == 4);
    CHECK(r.rows == 5);
    CHECK(r.cols == 6);
    CHECK_THROWS_AS(parse_roi("1,2,3"), ConfigError);
    CHECK_THROWS_AS(parse_roi("1,2,3,-4"), ConfigError);
    const auto p = parse_profile_input("lesion:sart=out/a b.sct");
    CHECK(p.phantom == "lesion");
    CHECK(p.method == "sart");
    CHECK(p.path == fs::path("out/a b.sct"));
    CHECK_THROWS_AS(parse_profile_input("lesion=x.sct"), ConfigError);
    CHECK_THROWS_AS(parse_profile_input(":sart=x.sct"), ConfigError);
}

TEST_CASE("ExperimentConfig::validate") {
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.dgr.iterations == 800);
    auto bad = c;
    bad.views = {};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.views = {32, 0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.image_size = 8;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.snr_db = std::nan("");
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.dgr.weights = {0.33, 0.33, 0.33};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.dataset.kind = DatasetKind::kSlices;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("load_dataset") {
    ExperimentConfig c = small_config("unused");
    const auto ell = load_dataset(c);
    REQUIRE(ell.size() == 2);
    CHECK(ell[0].name == "ellipses_1");
    CHECK(ell[0].image.values().size() == 32 * 32);
    CHECK(ell[0].image.values()[0] == 0.0);

    c.dataset.kind = DatasetKind::kSheppLogan;
    CHECK(load_dataset(c).size() == 1);

    SUBCASE("slices are resized and masked") {
        const fs::path dir = fresh_dir("slices");
        for (const char* name : {"b", "a"}) {
            std::ofstream raw(dir / (std::string(name) + ".raw"), std::ios::binary);
            for (int i = 0; i < 64 * 64; ++i) {
                const char zero[2] = {0, 0};  // 0 HU, mid-window
                raw.write(zero, 2);
            }
            write_file(dir / (std::string(name) + ".raw.dims"), "64 64\n");
        }
        write_file(dir / "notes.txt", "ignored");
        c.dataset.kind = DatasetKind::kSlices;
        c.dataset.slices_dir = dir;
        const auto s = load_dataset(c);
        REQUIRE(s.size() == 2);
        CHECK(s[0].name == "a");
        CHECK(s[0].image.image_size() == 32);
        CHECK(s[0].image(16, 16) == doctest::Approx(0.5));
        CHECK(s[0].image(0, 0) == 0.0);
    }
    SUBCASE("empty slices directory") {
        c.dataset.kind = DatasetKind::kSlices;
        c.dataset.slices_dir = fresh_dir("empty");
        CHECK_THROWS_AS(load_dataset(c), ConfigError);
    }
}

TEST_CASE("measure") {
    const ExperimentConfig c = small_config("unused");
    const Image2D gt = load_dataset(c)[0].image;
    const auto a = measure(gt, 16, c, 0);
    const auto b = measure(gt, 16, c, 0);
    const auto other = measure(gt, 16, c, 1);
    CHECK(a.noisy.values()[5] == b.noisy.values()[5]);
    CHECK(a.clean.values()[5] == other.clean.values()[5]);
    bool differs = false;
    for (std::size_t i = 0; i < a.noisy.size(); ++i) differs |= a.noisy[i] != other.noisy[i];
    CHECK(differs);

    ExperimentConfig clean = c;
    clean.snr_db = std::numeric_limits<double>::infinity();
    const auto m = measure(gt, 16, clean, 0);
    CHECK(std::equal(m.noisy.values().begin(), m.noisy.values().end(), m.clean.values().begin()));
}

TEST_CASE("cmd_benchmark") {
    const fs::path out = fresh_dir("bench");
    const ExperimentConfig c = small_config(out);
    // v1 needs at least 32 px per 2^5 reduction, so 32 px DGR fails in every cell.
    const std::vector<MethodSpec> rows{MethodSpec::parse("fbp"), MethodSpec::parse("sart"),
                                       MethodSpec::parse("dgr:1/0/0")};
    const BenchmarkTable t = cmd_benchmark(c, rows, "test");

    const auto& fbp8 = t.cell("fbp", 8);
    CHECK(fbp8.n == 2);
    CHECK(fbp8.failed == 0);
    CHECK(fbp8.psnr_mean > 5.0);
    CHECK(fbp8.psnr_std >= 0.0);
    CHECK(t.cell("sart", 16).ssim_mean > t.cell("fbp", 16).ssim_mean);
    CHECK(t.cell("dgr:1/0/0", 8).n == 0);
    CHECK(t.cell("dgr:1/0/0", 8).failed == 2);
    CHECK_THROWS_AS(t.cell("fbp", 99), ConfigError);

    // Mean and sample std match the per-run records.
    std::vector<double> p;
    for (const auto& r : read_jsonl(out / "runs.jsonl"))
        if (r["method"] == "fbp" && r["views"] == 8) p.push_back(r["psnr"].get<double>());
    REQUIRE(p.size() == 2);
    CHECK(fbp8.psnr_mean == doctest::Approx((p[0] + p[1]) / 2));
    CHECK(fbp8.psnr_std == doctest::Approx(std::abs(p[0] - p[1]) / std::sqrt(2.0)));

    const std::string table = read_file(out / "table.csv");
    CHECK(table.rfind("method,w_meas,w_ssim,w_tv,psnr_8,ssim_8,n_8,failed_8,psnr_16", 0) == 0);
    CHECK(table.find(" ± ") != std::string::npos);
    CHECK(table.find("DGR,1.000,0.000,0.000,FAILED,FAILED,0,2") != std::string::npos);
    CHECK(read_file(out / "cells.csv").find("sart,16,2,0,") != std::string::npos);

    const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
    CHECK(manifest["command"] == "benchmark");
    CHECK(manifest["config"]["views"] == nlohmann::json::array({8, 16}));
    CHECK(manifest["rows"].size() == 3);

    ExperimentConfig empty_rows = c;
    CHECK_THROWS_AS(cmd_benchmark(empty_rows, {}), ConfigError);
}

TEST_CASE("cmd_reconstruct is repeatable") {
    const fs::path out = fresh_dir("recon");
    ExperimentConfig c = small_config(out);
    c.method = Method::kSart;
    CHECK(cmd_reconstruct(c) == 4);
    const auto first = read_jsonl(out / "metrics.jsonl");
    const auto raw = io::load_array(out / "ellipses_2" / "v16" / "sart.sct");
    CHECK(cmd_reconstruct(c) == 4);
    const auto second = read_jsonl(out / "metrics.jsonl");
    REQUIRE(first.size() == 4);
    REQUIRE(second.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        auto a = first[i], b = second[i];
        a.erase("runtime_s");
        b.erase("runtime_s");
        CHECK(a == b);
    }
    CHECK(io::load_array(out / "ellipses_2" / "v16" / "sart.sct").values()[100] == raw.values()[100]);
    for (const char* f : {"ground_truth.sct", "ground_truth.png"}) CHECK(fs::exists(out / "ellipses_1" / f));
    for (const char* f : {"sinogram.sct", "sinogram_noisy.sct", "sart.png"})
        CHECK(fs::exists(out / "ellipses_1" / "v8" / f));
}

TEST_CASE("cmd_reconstruct with DGR writes a history") {
    const fs::path out = fresh_dir("recon_dgr");
    ExperimentConfig c = small_config(out);
    c.dataset.seeds = {3};
    c.views = {16};
    c.method = Method::kDgr;
    c.dgr.iterations = 3;
    c.dgr.net = nn::SkipNetConfig::v3();
    c.dgr.net.input_channels = 4;
    CHECK(cmd_reconstruct(c) == 1);
    const std::string h = read_file(out / "ellipses_3" / "v16" / "dgr_history.csv");
    CHECK(std::count(h.begin(), h.end(), '\n') == 4);
    CHECK(read_jsonl(out / "metrics.jsonl")[0]["method"] == "dgr:0.9/0/0.1");
}

TEST_CASE("cmd_profile") {
    const fs::path dir = fresh_dir("profile");
    Image2D a(16), flat(16);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c) {
            a(r, c) = 0.1 + 0.01 * double((r * 7 + c * 3) % 5);
            flat(r, c) = 0.2;
        }
    for (std::size_t r = 4; r < 8; ++r)
        for (std::size_t c = 4; c < 8; ++c) a(r, c) = 0.9;
    io::write_raw(a, dir / "a.sct");
    io::write_raw(flat, dir / "flat.sct");

    const std::vector<ProfileInput> inputs{{"p1", "sart", dir / "a.sct"}, {"p1", "fbp", dir / "flat.sct"},
                                           {"p2", "fbp", dir / "a.sct"}};
    const Roi2 feature{4, 4, 4, 4}, background{10, 10, 5, 5};
    cmd_profile(inputs, 5, feature, background, dir / "out");

    const std::string prof = read_file(dir / "out" / "profile.csv");
    CHECK(prof.rfind("col,p1:sart,p1:fbp,p2:fbp\n", 0) == 0);
    CHECK(prof.find("\n5,0.9,0.2,0.9\n") != std::string::npos);

    // Independent CNR: 20 log10(|mean_f - mean_b| / std_b), population std, on
    // the float32 values the file holds.
    const Image2D stored(io::load_array(dir / "a.sct"));
    double mf = 0.0, mb = 0.0, vb = 0.0;
    for (std::size_t r = 10; r < 15; ++r)
        for (std::size_t c = 10; c < 15; ++c) mb += stored(r, c) / 25.0;
    for (std::size_t r = 10; r < 15; ++r)
        for (std::size_t c = 10; c < 15; ++c) vb += (stored(r, c) - mb) * (stored(r, c) - mb) / 25.0;
    for (std::size_t r = 4; r < 8; ++r)
        for (std::size_t c = 4; c < 8; ++c) mf += stored(r, c) / 16.0;
    const double expected = 20.0 * std::log10((mf - mb) / std::sqrt(vb));
    std::ostringstream want;
    want.setf(std::ios::fixed);
    want.precision(2);
    want << expected;

    const std::string cnr = read_file(dir / "out" / "cnr.csv");
    CHECK(cnr == "phantom,sart,fbp\np1," + want.str() + ",degenerate\np2,," + want.str() + "\n");

    CHECK_THROWS_AS(cmd_profile(inputs, 16, std::nullopt, std::nullopt, dir / "out"), ConfigError);
    CHECK_THROWS_AS(cmd_profile(inputs, 1, feature, std::nullopt, dir / "out"), ConfigError);
    io::write_raw(Image2D(8), dir / "small.sct");
    CHECK_THROWS_AS(cmd_profile({{"p", "m", dir / "a.sct"}, {"p", "n", dir / "small.sct"}}, 1, std::nullopt,
                                std::nullopt, dir / "out"),
                    ConfigError);
}

TEST_CASE("cmd_curves") {
    const fs::path out = fresh_dir("curves");
    ExperimentConfig c = small_config(out);
    c.dataset.seeds = {5};
    c.views = {16};
    c.dgr.iterations = 4;
    c.dgr.net.input_channels = 4;
    cmd_curves(c, {30.0, 39.0}, {"v3"});
    const std::string s = read_file(out / "curves" / "summary.csv");
    CHECK(std::count(s.begin(), s.end(), '\n') == 3);
    CHECK(s.find("\nv3,30,16,ellipses_5,4,") != std::string::npos);
    const std::string h = read_file(out / "curves" / "v3_snr39_v16_ellipses_5.csv");
    // Tracked runs fill the psnr and ssim columns.
    CHECK(h.find(",,") == std::string::npos);
    CHECK_THROWS_AS(cmd_curves(c, {}, {"v3"}), ConfigError);
    CHECK_THROWS_AS(cmd_curves(c, {30.0}, {"v9"}), ConfigError);
}

TEST_CASE("cmd_phantom and cmd_project") {
    const fs::path out = fresh_dir("phantom");
    ExperimentConfig c = small_config(out);
    cmd_phantom(c);
    CHECK(fs::exists(out / "ellipses_1.png"));
    const auto img = io::load_array(out / "ellipses_2.sct");
    CHECK(img.rows() == 32);

    c.output_dir = out / "proj";
    cmd_project(out / "ellipses_2.sct", c);
    const auto sino = io::load_array(out / "proj" / "ellipses_2_v8_sinogram.sct");
    CHECK(sino.rows() == 8);
    CHECK(sino.cols() == 32);
    CHECK(fs::exists(out / "proj" / "ellipses_2_v16_sinogram_noisy.png"));
}

#ifdef SPARSECT_TOOL
TEST_CASE("sparsect executable") {
    const fs::path dir = fresh_dir("tool");
    const std::string out = (dir / "run").string();

    SUBCASE("config file values apply and flags override them") {
        write_file(dir / "exp.cfg", "dataset = ellipses\nseeds = 4\nimage-size = 32\nviews = 8\nmethod = sart\n"
                                    "sart-iterations = 3\nthreads = 1\n");
        REQUIRE(run_tool("reconstruct --config " + (dir / "exp.cfg").string() + " --views 16 -o " + out) == 0);
        const auto m = read_jsonl(dir / "run" / "metrics.jsonl");
        REQUIRE(m.size() == 1);
        CHECK(m[0]["image"] == "ellipses_4");
        CHECK(m[0]["views"] == 16);
        CHECK(m[0]["method"] == "sart");
        const auto manifest = nlohmann::json::parse(read_file(dir / "run" / "manifest.json"));
        CHECK(manifest["config"]["sart_iterations"] == 3);
        CHECK(manifest["command_line"].get<std::string>().find("--config") != std::string::npos);

        // Same command, same metrics.
        REQUIRE(run_tool("reconstruct --config " + (dir / "exp.cfg").string() + " --views 16 -o " + out) == 0);
        auto again = read_jsonl(dir / "run" / "metrics.jsonl");
        auto first = m;
        again[0].erase("runtime_s");
        first[0].erase("runtime_s");
        CHECK(again == first);
    }
    SUBCASE("bad input exits nonzero") {
        CHECK(run_tool("") != 0);
        CHECK(run_tool("reconstruct --no-such-flag -o " + out) != 0);
        CHECK(run_tool("reconstruct --views 0 -o " + out) != 0);
        CHECK(run_tool("reconstruct --method mlem -o " + out) != 0);
        CHECK(run_tool("reconstruct --config " + (dir / "missing.cfg").string()) != 0);
        write_file(dir / "typo.cfg", "veiws = 8\n");
        CHECK(run_tool("phantom --config " + (dir / "typo.cfg").string() + " -o " + out) != 0);
        CHECK(run_tool("benchmark --rows fbp,xyz -o " + out) != 0);
        CHECK(run_tool("profile --input a:b=" + (dir / "missing.sct").string() + " --row 0 -o " + out) != 0);
    }
    SUBCASE("help exits zero") { CHECK(run_tool("--help") == 0); }
}
#endif
