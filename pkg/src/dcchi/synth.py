"""Seeded synthetic hyperspectral scenes for desk-scale experiments.

Scenes are abundance mixtures: a few smooth spatial abundance maps (Gaussian
blobs) weight smooth positive endmember spectra. This gives spatial structure
that a panchromatic projection actually reflects, which the proxy analysis
and the learning-signal experiments rely on.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


def _smooth_maps(rng: np.random.Generator, h: int, w: int, k: int,
                 blur: float) -> np.ndarray:
    maps = rng.standard_normal((k, h, w))
    maps = np.stack([gaussian_filter(m, blur, mode="reflect") for m in maps])
    maps = np.exp(2.0 * maps)
    return maps / maps.sum(axis=0, keepdims=True)


def _endmembers(rng: np.random.Generator, k: int, bands: int) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, bands)
    spectra = np.empty((k, bands))
    for i in range(k):
        center = rng.uniform(0.1, 0.9)
        width = rng.uniform(0.15, 0.4)
        spectra[i] = 0.15 + rng.uniform(0.5, 1.0) * np.exp(-0.5 * ((grid - center) / width) ** 2)
    return spectra


def make_scene(h: int, w: int, bands: int, seed: int,
               n_materials: int = 3, blur: float | None = None) -> np.ndarray:
    """One smooth non-negative cube in [0, 1] with max value 1."""
    rng = np.random.default_rng(seed)
    blur = blur if blur is not None else max(2.0, min(h, w) / 8.0)
    abund = _smooth_maps(rng, h, w, n_materials, blur)
    spectra = _endmembers(rng, n_materials, bands)
    cube = np.einsum("khw,kc->hwc", abund, spectra)
    return cube / cube.max()


def make_dataset(n: int, h: int, w: int, bands: int, seed: int = 0) -> list[np.ndarray]:
    return [make_scene(h, w, bands, seed + 1000 * i) for i in range(n)]


def make_smooth_suite(n: int, h: int, w: int, bands: int, seed: int = 0) -> list[np.ndarray]:
    """Extra-smooth two-material scenes for the correlation-proxy study."""
    return [make_scene(h, w, bands, seed + 1000 * i, n_materials=2, blur=min(h, w) / 5.0)
            for i in range(n)]
