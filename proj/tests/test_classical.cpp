#include <cmath>
#include <random>

#include "doctest.h"
#include "sparsect/classical.hpp"
#include "sparsect/data.hpp"
#include "sparsect/objective.hpp"
#include "sparsect/projection.hpp"

using namespace sparsect;

namespace {

double sino_rmse(const Image2D& x, const Sinogram& y, const Geometry& g) {
    const auto ax = forward_project(x, g);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (ax[i] - y[i]) * (ax[i] - y[i]);
    return std::sqrt(s / double(y.size()));
}

Image2D disk(std::size_t n, double radius, double value) {
    Image2D im(n);
    const double c = (double(n) - 1.0) / 2.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if ((i - c) * (i - c) + (j - c) * (j - c) <= radius * radius) im(i, j) = value;
    return im;
}

Image2D noisy_step(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.1);
    Image2D im(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) im(i, j) = (j >= n / 2 ? 0.7 : 0.3) + nd(rng);
    return im;
}

bool in_unit_range(const Image2D& im) {
    for (double v : im.values())
        if (v < 0.0 || v > 1.0) return false;
    return true;
}

}  // namespace

TEST_CASE("fbp") {
    SUBCASE("dense-view disk keeps its intensity") {
        const std::size_t n = 64;
        const auto geom = Geometry::parallel(n, 180);
        const auto gt = disk(n, 20.0, 0.5);
        const auto rec = fbp(forward_project(gt, geom), geom);
        const double c = (n - 1) / 2.0;
        double sum = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if ((i - c) * (i - c) + (j - c) * (j - c) <= 15.0 * 15.0) {
                    sum += rec(i, j);
                    ++count;
                }
        CHECK(std::abs(sum / count - 0.5) < 0.05 * 0.5);
    }
    SUBCASE("zero sinogram gives zero image") {
        const auto geom = Geometry::parallel(32, 16);
        const auto rec = fbp(Sinogram(16, 32), geom);
        for (double v : rec.values()) CHECK(v == 0.0);
    }
    SUBCASE("linear without clipping") {
        const auto geom = Geometry::parallel(32, 20);
        std::mt19937_64 rng(1);
        std::normal_distribution<double> nd;
        Sinogram s1(20, 32), s2(20, 32), mix(20, 32);
        for (std::size_t i = 0; i < s1.size(); ++i) {
            s1[i] = nd(rng);
            s2[i] = nd(rng);
            mix[i] = 2.0 * s1[i] - 0.5 * s2[i];
        }
        const FbpConfig lin{FbpFilter::kRamp, false};
        const auto a = fbp(s1, geom, lin), b = fbp(s2, geom, lin), m = fbp(mix, geom, lin);
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            err = std::max(err, std::abs(m[i] - (2.0 * a[i] - 0.5 * b[i])));
            scale = std::max(scale, std::abs(m[i]));
        }
        CHECK(err / scale < 1e-6);
    }
    SUBCASE("more views give higher PSNR") {
        const auto gt = shepp_logan(128);
        double prev = -1.0;
        for (std::size_t views : {32u, 64u, 100u}) {
            const auto geom = Geometry::parallel(128, views);
            const auto y = add_awgn(forward_project(gt, geom), {39.0, 7});
            const double p = psnr(fbp(y, geom), gt);
            CHECK(p > prev);
            prev = p;
        }
    }
    SUBCASE("Hann window smooths relative to the plain ramp") {
        const auto geom = Geometry::parallel(64, 64);
        const auto y = add_awgn(forward_project(shepp_logan(64), geom), {30.0, 2});
        CHECK(tv_norm(fbp(y, geom, {FbpFilter::kHann})) < tv_norm(fbp(y, geom, {FbpFilter::kRamp})));
    }
    SUBCASE("output is clipped to [0,1]") {
        const auto geom = Geometry::parallel(64, 32);
        const auto y = add_awgn(forward_project(shepp_logan(64), geom), {20.0, 2});
        CHECK(in_unit_range(fbp(y, geom)));
    }
    SUBCASE("shape errors") {
        CHECK_THROWS_AS(fbp(Sinogram(16, 31), Geometry::parallel(32, 16)), ConfigError);
    }
}

TEST_CASE("sart") {
    SUBCASE("residual is nonincreasing on a consistent system") {
        const auto geom = Geometry::parallel(64, 32);
        const auto y = forward_project(random_ellipses(64, 3), geom);
        SartConfig cfg;
        cfg.iterations = 1;
        Image2D x(64);
        double prev = sino_rmse(x, y, geom);
        for (int k = 0; k < 40; ++k) {
            cfg.initial = x;
            x = sart(y, geom, cfg);
            const double r = sino_rmse(x, y, geom);
            CHECK(r <= prev * 1.001);
            prev = r;
        }
    }
    SUBCASE("chained single sweeps equal one multi-sweep run") {
        const auto geom = Geometry::parallel(32, 16);
        const auto y = forward_project(random_ellipses(32, 4), geom);
        SartConfig one;
        one.iterations = 1;
        Image2D x(32);
        for (int k = 0; k < 5; ++k) {
            one.initial = x;
            x = sart(y, geom, one);
        }
        SartConfig five;
        five.iterations = 5;
        CHECK(x == sart(y, geom, five));
    }
    SUBCASE("default settings cut the sinogram RMSE at least fivefold") {
        const auto geom = Geometry::parallel(128, 64);
        const auto y = forward_project(shepp_logan(128), geom);
        const double before = sino_rmse(Image2D(128), y, geom);
        const auto x = sart(y, geom);
        CHECK(sino_rmse(x, y, geom) < before / 5.0);
        CHECK(in_unit_range(x));
    }
    SUBCASE("simultaneous mode also converges") {
        const auto geom = Geometry::parallel(64, 32);
        const auto y = forward_project(shepp_logan(64), geom);
        SartConfig cfg;
        cfg.mode = SartMode::kSimultaneous;
        cfg.relaxation = 1.0;
        const double before = sino_rmse(Image2D(64), y, geom);
        CHECK(sino_rmse(sart(y, geom, cfg), y, geom) < before / 2.0);
    }
    SUBCASE("zero sinogram is a fixed point") {
        const auto geom = Geometry::parallel(32, 8);
        const auto x = sart(Sinogram(8, 32), geom);
        for (double v : x.values()) CHECK(v == 0.0);
    }
    SUBCASE("invalid settings") {
        const auto geom = Geometry::parallel(16, 4);
        SartConfig cfg;
        cfg.iterations = 0;
        CHECK_THROWS_AS(sart(Sinogram(4, 16), geom, cfg), ConfigError);
        cfg.iterations = 1;
        cfg.relaxation = 2.5;
        CHECK_THROWS_AS(sart(Sinogram(4, 16), geom, cfg), ConfigError);
        cfg.relaxation = 0.15;
        cfg.initial = Image2D(8);
        CHECK_THROWS_AS(sart(Sinogram(4, 16), geom, cfg), ConfigError);
    }
}

TEST_CASE("tv_denoise") {
    SUBCASE("weight 0 is the identity") {
        const auto im = noisy_step(32, 1);
        CHECK(tv_denoise(im, 0.0, 20) == im);
    }
    SUBCASE("constant image is unchanged") {
        const Image2D c(16, 0.37);
        for (double w : {0.01, 0.5, 10.0}) CHECK(tv_denoise(c, w, 30) == c);
    }
    SUBCASE("noisy step: lower TV and lower energy") {
        const auto f = noisy_step(32, 2);
        for (double w : {0.02, 0.1, 0.5}) {
            const auto u = tv_denoise(f, w, 50);
            CHECK(tv_norm(u) < tv_norm(f));
            double fid = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) fid += 0.5 * (u[i] - f[i]) * (u[i] - f[i]);
            CHECK(fid + w * tv_norm(u) < w * tv_norm(f));
        }
    }
    SUBCASE("negative weight rejected") {
        CHECK_THROWS_AS(tv_denoise(Image2D(8), -1.0, 5), ConfigError);
    }
}

TEST_CASE("sart_tv") {
    const auto geom = Geometry::parallel(64, 32);
    const auto gt = random_ellipses(64, 5);
    const auto y = add_awgn(forward_project(gt, geom), {30.0, 1});

    SUBCASE("zero denoise step is exactly sart") {
        SartTvConfig cfg;
        cfg.denoise_step = 0.0;
        CHECK(sart_tv(y, geom, cfg) == sart(y, geom, cfg.sart));
    }
    SUBCASE("default step follows the TV weight") {
        SartTvConfig cfg;
        CHECK(cfg.effective_denoise_step() == doctest::Approx(0.018));
        cfg.tv_weight = 0.5;
        CHECK(cfg.effective_denoise_step() == doctest::Approx(0.01));
    }
    SUBCASE("smoother than plain sart and within range") {
        const auto tv = sart_tv(y, geom);
        CHECK(tv_norm(tv) <= tv_norm(sart(y, geom)));
        CHECK(in_unit_range(tv));
    }
}
