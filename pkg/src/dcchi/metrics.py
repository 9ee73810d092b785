"""Reconstruction quality metrics and the spatial-correlation proxy analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ShapeError

_COS_EPS = 1e-8


@dataclass
class QualityReport:
    psnr_db: float
    ssim: float
    per_band_psnr: list[float] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"psnr_db={self.psnr_db:.6f}", f"ssim={self.ssim:.6f}"]
        out += [f"psnr_band_{i}={v:.6f}" for i, v in enumerate(self.per_band_psnr)]
        return out


@dataclass
class CorrProxyReport:
    rmse: float
    correlation: float
    psnr_db: float

    def lines(self) -> list[str]:
        return [f"rmse={self.rmse:.6f}", f"correlation={self.correlation:.6f}",
                f"psnr_db={self.psnr_db:.6f}"]


def psnr(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) over the whole array; +inf for identical inputs."""
    x, ref = np.asarray(x), np.asarray(ref)
    if x.shape != ref.shape:
        raise ShapeError(f"psnr shapes disagree: {x.shape} vs {ref.shape}")
    mse = np.mean((x - ref) ** 2)
    if mse == 0.0:
        return math.inf
    return float(10.0 * np.log10(peak * peak / mse))


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (ax / sigma) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def ssim(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    """Structural similarity, 11x11 Gaussian window sigma 1.5, band-averaged."""
    x, ref = np.asarray(x, float), np.asarray(ref, float)
    if x.shape != ref.shape:
        raise ShapeError(f"ssim shapes disagree: {x.shape} vs {ref.shape}")
    if x.ndim == 2:
        x, ref = x[:, :, None], ref[:, :, None]
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    k = _gaussian_kernel()
    vals = []
    for b in range(x.shape[2]):
        a, r = x[:, :, b], ref[:, :, b]
        mu_a = fftconvolve(a, k, mode="valid")
        mu_r = fftconvolve(r, k, mode="valid")
        va = fftconvolve(a * a, k, mode="valid") - mu_a ** 2
        vr = fftconvolve(r * r, k, mode="valid") - mu_r ** 2
        cov = fftconvolve(a * r, k, mode="valid") - mu_a * mu_r
        s = ((2 * mu_a * mu_r + c1) * (2 * cov + c2)) / ((mu_a ** 2 + mu_r ** 2 + c1) * (va + vr + c2))
        vals.append(s.mean())
    return float(np.mean(vals))


def quality(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> QualityReport:
    per_band = [psnr(x[:, :, b], ref[:, :, b], peak) for b in range(x.shape[2])] \
        if x.ndim == 3 else []
    return QualityReport(psnr_db=psnr(x, ref, peak), ssim=ssim(x, ref, peak),
                         per_band_psnr=per_band)


# -- correlation-map proxy ----------------------------------------------------

def _patchify(arr: np.ndarray, p: int) -> np.ndarray:
    """H x W x (p*p*C) reflect-padded patch descriptors."""
    if arr.ndim == 2:
        arr = arr[:, :, None]
    r = p // 2
    padded = np.pad(arr, ((r, r), (r, r), (0, 0)), mode="reflect")
    win = np.lib.stride_tricks.sliding_window_view(padded, (p, p), axis=(0, 1))
    return win.reshape(arr.shape[0], arr.shape[1], -1)


def _pixel_descriptors(source: np.ndarray, patch: int | None) -> np.ndarray:
    """Per-pixel descriptor vectors: the spectral vector for a cube (or its
    patch stack when ``patch`` is set), a flattened patch for a 2-d image."""
    if source.ndim == 3:
        return source if patch is None else _patchify(source, patch)
    if source.ndim != 2:
        raise ShapeError(f"correlation source must be 2-d or 3-d, got {source.shape}")
    return _patchify(source, patch or 3)


def correlation_map(source: np.ndarray, window: int, patch: int | None = None,
                    center: bool = False) -> np.ndarray:
    """Cosine-similarity matrices between pixel descriptors inside each
    non-overlapping window; result is (n_windows, M^2, M^2).

    ``center`` removes the window-mean descriptor first, making the maps
    sensitive to structure instead of shared brightness.
    """
    desc = _pixel_descriptors(np.asarray(source, float), patch)
    h, w, dlen = desc.shape
    m = window
    if h % m or w % m:
        raise ShapeError(f"window {m} does not divide extents {(h, w)}")
    blocks = desc.reshape(h // m, m, w // m, m, dlen).transpose(0, 2, 1, 3, 4)
    tokens = blocks.reshape(-1, m * m, dlen)
    if center:
        tokens = tokens - tokens.mean(axis=1, keepdims=True)
    norms = np.maximum(np.linalg.norm(tokens, axis=-1, keepdims=True), _COS_EPS)
    tokens = tokens / norms
    sims = tokens @ tokens.transpose(0, 2, 1)
    return np.clip(sims, -1.0, 1.0)


def proxy_compare(hsi: np.ndarray, pan: np.ndarray, window: int,
                  patch: int = 3, center: bool = True) -> CorrProxyReport:
    """Agreement between cube-derived and guide-derived correlation maps.

    Both sides use patch descriptors (the cube's patches stack spectra) and
    window-mean centering, so the comparison measures whether the guide's
    local structure predicts the cube's local structure.
    """
    mh = correlation_map(hsi, window, patch=patch, center=center)
    mp = correlation_map(pan, window, patch=patch, center=center)
    diff = mh - mp
    rmse = float(np.sqrt(np.mean(diff ** 2)))
    corr = float(np.corrcoef(mh.ravel(), mp.ravel())[0, 1])
    return CorrProxyReport(rmse=rmse, correlation=corr, psnr_db=psnr(mh, mp, peak=1.0))
