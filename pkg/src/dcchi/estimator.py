"""Scikit-learn style facade over simulation, training, and reconstruction."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ShapeError
from .metrics import psnr
from .network import ArchConfig
from .sensing import NoiseModel, SensingSystem, simulate
from .solver import CgConfig, ReconstructionModel
from .training import TrainConfig, train


def _check_cubes(cubes) -> list[np.ndarray]:
    out = []
    for i, c in enumerate(cubes):
        arr = np.asarray(c, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeError(f"cube {i}: expected 3-d (h, w, bands), got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ShapeError(f"cube {i}: contains non-finite values")
        if arr.min() < 0:
            raise ShapeError(f"cube {i}: negative radiance")
        out.append(arr)
    shapes = {a.shape for a in out}
    if len(shapes) > 1:
        raise ShapeError(f"cubes disagree on shape: {sorted(shapes)}")
    return out


class DcchiReconstructor(BaseEstimator):
    """Fits the unrolled solver on ground-truth cubes, predicts from re-simulated
    measurements.

    fit(X): X is a sequence of (h, w, bands) cubes; builds the sensing system
    from the first cube's shape and trains the unrolled model on simulated
    measurements of every cube.  predict(X) simulates each cube through the
    fitted system and returns reconstructions.  score(X) is mean PSNR in dB.
    """

    def __init__(self, stages=2, cg_iters=5, window=8, d=2, direction="right",
                 mask_seed=0, steps=200, lr=3e-3, sigma_c=0.0, sigma_p=0.0,
                 seed=0):
        self.stages = stages
        self.cg_iters = cg_iters
        self.window = window
        self.d = d
        self.direction = direction
        self.mask_seed = mask_seed
        self.steps = steps
        self.lr = lr
        self.sigma_c = sigma_c
        self.sigma_p = sigma_p
        self.seed = seed

    def fit(self, X, y=None):
        cubes = _check_cubes(X)
        h, w, bands = cubes[0].shape
        self.system_ = SensingSystem.create(h, w, bands, d=self.d,
                                            direction=self.direction,
                                            mask_seed=self.mask_seed)
        cfg = ArchConfig(bands=bands, height=h, width=w, window=self.window)
        rng = np.random.default_rng(self.seed)
        self.model_ = ReconstructionModel(cfg, self.stages, rng)
        tc = TrainConfig(steps=self.steps, lr=self.lr, seed=self.seed,
                         sigma_c=self.sigma_c, sigma_p=self.sigma_p,
                         cg=CgConfig(max_iters=self.cg_iters))
        self.loss_trace_ = train(cubes, self.system_, self.model_, tc)
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise ShapeError("estimator is not fitted; call fit first")
        cubes = _check_cubes(X)
        cg = CgConfig(max_iters=self.cg_iters)
        out = []
        for i, cube in enumerate(cubes):
            noise = NoiseModel(self.sigma_c, self.sigma_p, seed=self.seed + i)
            pair = simulate(cube, self.system_, noise)
            out.append(self.model_.reconstruct(pair, self.system_, cg=cg).data)
        return out

    def score(self, X, y=None):
        cubes = _check_cubes(X)
        recons = self.predict(cubes)
        return float(np.mean([psnr(r, c) for r, c in zip(recons, cubes)]))
