"""PSNR, SSIM, and the window-local correlation proxy."""

import numpy as np

from dcchi.metrics import correlation_map, proxy_compare, psnr, quality, ssim
from dcchi.sensing import SensingSystem, simulate
from dcchi.synth import make_scene, make_smooth_suite


def test_psnr_reference_values(rng):
    ref = rng.random((16, 16))
    assert psnr(ref, ref) == np.inf
    noisy = ref + 0.1
    # constant offset of 0.1 against peak 1 gives exactly 20 dB
    assert abs(psnr(noisy, ref) - 20.0) < 1e-9


def test_psnr_monotone_in_noise(rng):
    ref = rng.random((32, 32, 4))
    lo = psnr(ref + rng.normal(0, 0.01, ref.shape), ref)
    hi = psnr(ref + rng.normal(0, 0.1, ref.shape), ref)
    assert lo > hi


def test_ssim_self_and_degradation(rng):
    ref = rng.random((32, 32))
    assert abs(ssim(ref, ref) - 1.0) < 1e-9
    assert ssim(ref + rng.normal(0, 0.2, ref.shape), ref) < 0.9


def test_quality_report_lines(rng):
    ref = rng.random((16, 16, 3))
    rep = quality(ref + 0.01, ref)
    text = "\n".join(rep.lines())
    assert "psnr_db=" in text and "ssim=" in text
    assert len(rep.per_band_psnr) == 3


def test_correlation_map_shape_and_bounds(rng):
    cube = rng.random((16, 16, 4))
    maps = correlation_map(cube, window=8)
    assert maps.shape == (4, 64, 64)
    assert maps.min() >= -1.0 and maps.max() <= 1.0
    # self-correlation diagonal is exactly 1
    assert np.allclose(np.diagonal(maps, axis1=1, axis2=2), 1.0)


def test_constant_scene_correlation_near_one():
    cube = np.full((16, 16, 4), 0.7)
    maps = correlation_map(cube, window=8)
    assert maps.min() >= 0.99


def test_proxy_compare_all_bands_equal(rng):
    """A cube whose bands are identical has PAN correlations matching exactly."""
    band = rng.random((16, 16))
    cube = np.repeat(band[:, :, None], 4, axis=2)
    sys = SensingSystem.create(16, 16, 4)
    rep = proxy_compare(cube, simulate(cube, sys).pan, window=8)
    assert rep.correlation >= 0.99


def test_proxy_compare_smooth_suite_mean():
    sys = SensingSystem.create(32, 32, 8)
    corrs = []
    for cube in make_smooth_suite(5, 32, 32, 8, seed=0):
        rep = proxy_compare(cube, simulate(cube, sys).pan, window=8)
        corrs.append(rep.correlation)
    assert float(np.mean(corrs)) >= 0.9


def test_synth_scene_properties():
    cube = make_scene(32, 32, 8, seed=1)
    assert cube.shape == (32, 32, 8)
    assert cube.min() >= 0.0
    assert abs(cube.max() - 1.0) < 1e-12
    again = make_scene(32, 32, 8, seed=1)
    assert np.array_equal(cube, again)
