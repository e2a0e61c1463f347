import numpy as np
import pytest

import sparsect as sc


def test_phantoms_are_in_range():
    sl = sc.shepp_logan(64)
    assert sl.shape == (64, 64)
    assert sl.min() >= 0.0 and sl.max() <= 1.0
    e = sc.random_ellipses(32, seed=3)
    assert np.array_equal(e, sc.random_ellipses(32, seed=3))
    assert not np.array_equal(e, sc.random_ellipses(32, seed=4))


def test_projector_is_adjoint():
    g = sc.Geometry.parallel(24, 10)
    assert g.num_angles == 10 and g.num_detectors == 24
    assert len(g.angles) == 10
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (24, 24))
    y = rng.uniform(-1, 1, (10, 24))
    ax = sc.forward_project(x, g)
    assert ax.shape == (10, 24)
    lhs = float(np.sum(ax * y))
    rhs = float(np.sum(x * sc.back_project(y, g)))
    assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(ax) * np.linalg.norm(y)


def test_classical_methods_improve_on_zero():
    gt = sc.shepp_logan(64)
    g = sc.Geometry.parallel(64, 32)
    y = sc.add_awgn(sc.forward_project(gt, g), snr_db=40.0, seed=1)
    zero = np.zeros_like(gt)
    for recon in (sc.fbp(y, g), sc.sart(y, g, iterations=10), sc.sart_tv(y, g, iterations=10)):
        assert recon.shape == gt.shape
        assert sc.psnr(recon, gt) > sc.psnr(zero, gt)


def test_metrics():
    a = sc.random_ellipses(32, seed=1)
    assert sc.ssim(a, a) == 1.0
    assert sc.psnr(a, a) == float("inf")
    img = np.full((16, 16), 0.2)
    img[4:8, 4:8] = 0.8
    img[10:15, 10:15] += np.linspace(0, 0.05, 25).reshape(5, 5)
    assert np.isfinite(sc.cnr(img, (4, 4, 4, 4), (10, 10, 5, 5)))
    with pytest.raises(sc.DegenerateRoiError):
        sc.cnr(img, (4, 4, 4, 4), (0, 0, 3, 3))


def test_bad_input_raises_value_error():
    g = sc.Geometry.parallel(16, 4)
    with pytest.raises(ValueError):
        sc.forward_project(np.zeros((16, 8)), g)
    with pytest.raises(sc.ConfigError):
        sc.fbp(np.zeros((4, 16)), g, filter="cosine")


def test_dgr_short_run_is_reproducible():
    gt = sc.random_ellipses(32, seed=2)
    g = sc.Geometry.parallel(32, 16)
    y = sc.add_awgn(sc.forward_project(gt, g), snr_db=35.0, seed=2)
    x0 = sc.sart(y, g, iterations=5)
    kw = dict(iterations=5, lr=1e-2, arch="v3", input_channels=4, track=gt)
    a = sc.dgr_reconstruct(y, g, x0, **kw)
    b = sc.dgr_reconstruct(y, g, x0, **kw)
    assert a["image"].shape == (32, 32)
    assert np.array_equal(a["image"], b["image"])
    assert len(a["history"]) == 5
    assert a["history"][0]["psnr"] is not None
    assert 0 <= a["best_psnr_iteration"] < 5
    with pytest.raises(ValueError):
        sc.dgr_reconstruct(y, g, x0, weights=(0.33, 0.33, 0.33), iterations=1)
