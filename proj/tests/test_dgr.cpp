#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "sparsect/classical.hpp"
#include "sparsect/data.hpp"
#include "sparsect/dgr.hpp"
#include "sparsect/nn/grad_check.hpp"
#include "sparsect/projection.hpp"
#include "sparsect/projection_node.hpp"

using namespace sparsect;

namespace {

struct Problem {
    Geometry geom;
    Image2D gt;
    Sinogram y;
    Image2D x0;
};

Problem small_problem(std::size_t n = 32, std::size_t views = 16, std::uint64_t seed = 4) {
    auto geom = Geometry::parallel(n, views);
    auto gt = random_ellipses(n, seed);
    auto y = add_awgn(forward_project(gt, geom), {35.0, seed});
    SartConfig sc;
    sc.iterations = 5;
    auto x0 = sart(y, geom, sc);
    return {geom, gt, y, x0};
}

DGRConfig tiny_config(std::size_t iterations) {
    DGRConfig cfg;
    cfg.iterations = iterations;
    cfg.net.scales = 2;
    cfg.net.channels_per_scale = {4, 8};
    cfg.net.input_channels = 4;
    cfg.adam.lr = 1e-2;
    cfg.seed = 11;
    return cfg;
}

RunHistory history_of(const std::vector<double>& losses) {
    RunHistory h;
    for (double l : losses) h.records.push_back({l, l, 0.0, 0.0, std::nullopt, std::nullopt});
    return h;
}

}  // namespace

TEST_CASE("DGRConfig validation") {
    const auto p = small_problem();
    auto cfg = tiny_config(0);
    CHECK_THROWS_AS(dgr_reconstruct(p.y, p.geom, p.x0, cfg), ConfigError);
    cfg.iterations = 1;
    cfg.weights = {0.33, 0.33, 0.33};
    CHECK_THROWS_AS(dgr_reconstruct(p.y, p.geom, p.x0, cfg), ConfigError);
    cfg.normalize_weights = true;
    CHECK_NOTHROW(dgr_reconstruct(p.y, p.geom, p.x0, cfg));
    cfg = tiny_config(1);
    cfg.input_noise_variance = -0.1;
    CHECK_THROWS_AS(dgr_reconstruct(p.y, p.geom, p.x0, cfg), ConfigError);
    cfg = tiny_config(1);
    cfg.adam.lr = 0.0;
    CHECK_THROWS_AS(dgr_reconstruct(p.y, p.geom, p.x0, cfg), ConfigError);
    cfg = tiny_config(1);
    cfg.early_stop = EarlyStop{0, 0.0};
    CHECK_THROWS_AS(dgr_reconstruct(p.y, p.geom, p.x0, cfg), ConfigError);
    cfg = tiny_config(1);
    CHECK_THROWS_AS(dgr_reconstruct(p.y, p.geom, Image2D(16), cfg), ConfigError);
    CHECK_THROWS_AS(dgr_reconstruct(Sinogram(16, 31), p.geom, p.x0, cfg), ConfigError);
}

TEST_CASE("dgr_reconstruct") {
    const auto p = small_problem();

    SUBCASE("one iteration gives one record") {
        const auto r = dgr_reconstruct(p.y, p.geom, p.x0, tiny_config(1));
        CHECK(r.history.size() == 1);
        CHECK_FALSE(r.early_stopped);
        CHECK_FALSE(r.best_psnr_image.has_value());
        CHECK_FALSE(r.history.records[0].psnr.has_value());
    }
    SUBCASE("output is in [0,1] and zero outside the support") {
        const auto r = dgr_reconstruct(p.y, p.geom, p.x0, tiny_config(5));
        CHECK(r.image.image_size() == 32);
        for (std::size_t i = 0; i < 32; ++i)
            for (std::size_t j = 0; j < 32; ++j) {
                CHECK(r.image(i, j) >= 0.0);
                CHECK(r.image(i, j) <= 1.0);
                if (!p.geom.in_support(i, j)) CHECK(r.image(i, j) == 0.0);
            }
    }
    SUBCASE("identical config reproduces bitwise") {
        auto cfg = tiny_config(6);
        cfg.weights = {0.5, 0.3, 0.2};
        cfg.track_psnr_against = p.gt;
        const auto a = dgr_reconstruct(p.y, p.geom, p.x0, cfg);
        const auto b = dgr_reconstruct(p.y, p.geom, p.x0, cfg);
        CHECK(a.image == b.image);
        CHECK(a.history.to_csv() == b.history.to_csv());
        for (std::size_t i = 0; i < a.history.size(); ++i) {
            CHECK(a.history.records[i].loss_total == b.history.records[i].loss_total);
            CHECK(*a.history.records[i].psnr == *b.history.records[i].psnr);
        }
    }
    SUBCASE("different seeds give different outputs") {
        auto cfg = tiny_config(3);
        const auto a = dgr_reconstruct(p.y, p.geom, p.x0, cfg);
        cfg.seed = 12;
        const auto b = dgr_reconstruct(p.y, p.geom, p.x0, cfg);
        CHECK_FALSE(a.image == b.image);
    }
    SUBCASE("recorded total is the weighted sum of the components") {
        auto cfg = tiny_config(4);
        cfg.weights = {0.6, 0.25, 0.15};
        const auto r = dgr_reconstruct(p.y, p.geom, p.x0, cfg);
        for (const auto& rec : r.history.records) {
            const double expect = 0.6 * rec.loss_meas + 0.25 * rec.loss_ssim + 0.15 * rec.loss_tv;
            CHECK(std::abs(rec.loss_total - expect) <= 1e-6 * std::abs(expect));
            CHECK(rec.loss_ssim >= 0.0);
            CHECK(rec.loss_ssim <= 2.0);
        }
    }
    SUBCASE("measurement loss decreases over a short fit") {
        auto cfg = tiny_config(60);
        cfg.weights = {1.0, 0.0, 0.0};
        const auto r = dgr_reconstruct(p.y, p.geom, p.x0, cfg);
        CHECK(r.history.records.back().loss_meas < 0.5 * r.history.records.front().loss_meas);
    }
    SUBCASE("tracking keeps the best-PSNR iterate") {
        auto cfg = tiny_config(8);
        cfg.track_psnr_against = p.gt;
        const auto r = dgr_reconstruct(p.y, p.geom, p.x0, cfg);
        REQUIRE(r.best_psnr_image.has_value());
        const auto best = r.history.best_psnr_iteration();
        REQUIRE(best.has_value());
        for (const auto& rec : r.history.records) CHECK(*rec.psnr <= *r.history.records[*best].psnr);
        CHECK(psnr(*r.best_psnr_image, p.gt) == doctest::Approx(*r.history.records[*best].psnr).epsilon(1e-12));
        CHECK(ssim(*r.best_psnr_image, p.gt) == doctest::Approx(*r.history.records[*best].ssim).epsilon(1e-12));
    }
    SUBCASE("progress callback sees every iteration in order") {
        std::vector<std::size_t> seen;
        dgr_reconstruct(p.y, p.geom, p.x0, tiny_config(4), [&](std::size_t it, const IterationRecord&) { seen.push_back(it); });
        CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3});
    }
    SUBCASE("non-finite loss raises DivergenceError with partial history") {
        Sinogram bad = p.y;
        bad(3, 5) = std::numeric_limits<double>::quiet_NaN();
        try {
            dgr_reconstruct(bad, p.geom, p.x0, tiny_config(3));
            FAIL("expected DivergenceError");
        } catch (const DivergenceError& e) {
            CHECK(e.iteration() == 0);
            CHECK(e.history().size() == 0);
        }
    }
    SUBCASE("early stopping halts a plateaued run") {
        auto cfg = tiny_config(400);
        cfg.adam.lr = 1e-9;
        cfg.input_noise_variance = 0.0;
        cfg.early_stop = EarlyStop{5, 1e-3};
        const auto r = dgr_reconstruct(p.y, p.geom, p.x0, cfg);
        CHECK(r.early_stopped);
        CHECK(r.history.size() <= 3 * 5);
    }
}

TEST_CASE("early-stop policy") {
    const EarlyStop es{10, 0.0};
    SUBCASE("strictly decreasing loss never stops") {
        std::vector<double> l;
        for (int i = 0; i < 500; ++i) l.push_back(100.0 - 0.1 * i);
        CHECK_FALSE(early_stop_policy(history_of(l), es).has_value());
    }
    SUBCASE("constant after k stops within k + 2w") {
        for (std::size_t k : {0u, 15u, 40u}) {
            std::vector<double> l;
            for (std::size_t i = 0; i < 200; ++i) l.push_back(i < k ? 50.0 - double(i) : 50.0 - double(k));
            const auto stop = early_stop_policy(history_of(l), es);
            REQUIRE(stop.has_value());
            CHECK(*stop >= k);
            CHECK(*stop <= k + 2 * es.window);
        }
    }
    SUBCASE("window longer than the run is inert") {
        std::vector<double> l(30, 1.0);
        CHECK_FALSE(early_stop_policy(history_of(l), EarlyStop{31, 0.0}).has_value());
    }
    SUBCASE("min_delta ignores tiny improvements") {
        std::vector<double> l;
        for (int i = 0; i < 200; ++i) l.push_back(1.0 - 1e-6 * i);
        CHECK_FALSE(early_stop_policy(history_of(l), es).has_value());
        CHECK(early_stop_policy(history_of(l), EarlyStop{10, 1e-3}).has_value());
    }
    SUBCASE("stateful policy stays stopped") {
        EarlyStopPolicy pol(EarlyStop{2, 0.0});
        bool stopped = false;
        for (int i = 0; i < 10 && !stopped; ++i) stopped = pol.update(1.0);
        CHECK(stopped);
        CHECK(pol.update(-100.0));
    }
    SUBCASE("zero window rejected") { CHECK_THROWS_AS(EarlyStopPolicy(EarlyStop{0, 0.0}), ConfigError); }
}

TEST_CASE("RunHistory CSV") {
    RunHistory h = history_of({3.0, 2.0, 1.5});
    h.records[1].psnr = 20.5;
    h.records[1].ssim = 0.75;
    const std::string csv = h.to_csv();
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "iteration,loss_total,loss_meas,loss_ssim,loss_tv,psnr,ssim");
    CHECK(lines[1].rfind("0,3,3,0,0,,", 0) == 0);
    CHECK(lines[2].find("20.5") != std::string::npos);
    CHECK(lines[2].find("0.75") != std::string::npos);
    CHECK(h.best_psnr_iteration() == std::optional<std::size_t>(1));
    CHECK_FALSE(history_of({1.0}).best_psnr_iteration().has_value());
}

TEST_CASE("hybrid objective through SkipNet v3 matches finite differences") {
    const std::size_t n = 32;
    const auto geom = Geometry::parallel(n, 12);
    const auto gt = random_ellipses(n, 21);
    const auto y = add_awgn(forward_project(gt, geom), {30.0, 21});
    SartConfig sc;
    sc.iterations = 3;
    const auto x0 = sart(y, geom, sc);

    auto cfg = nn::SkipNetConfig::v3();
    cfg.seed = 5;
    nn::SkipNet<double> net(cfg);
    nn::Tensor<double> z(nn::Shape{1, cfg.input_channels, n, n});
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    for (auto& v : z.values()) v = nd(rng);
    nn::Tensor<double> mask(nn::Shape{1, 1, n, n});
    for (std::size_t i = 0; i < n * n; ++i) mask[i] = geom.support()[i] ? 1.0 : 0.0;

    std::vector<nn::Tensor<double>> inputs;
    for (std::size_t i = 0; i < net.params().size(); ++i) inputs.push_back(net.params()[i]);
    const LossWeights w{0.5, 0.3, 0.2};
    auto f = [&](std::span<const nn::Var<double>> vars) {
        std::vector<nn::Var<double>> p(vars.begin(), vars.end());
        auto& tape = p.front().tape();
        auto x = nn::mul(net.forward(p, tape.constant(z)), tape.constant(mask));
        return total_loss(x, y, geom, x0, w).total;
    };
    nn::GradCheckOptions opts;
    opts.max_samples_per_input = 2;
    opts.seed = 3;
    CHECK(nn::grad_check(f, inputs, opts) < 1e-4);
}
