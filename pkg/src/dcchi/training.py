"""Training loop: adaptive-moment gradient descent on mean absolute error,
cosine-annealed learning rate, deterministic given seeds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .sensing import MeasurementPair, NoiseModel, SensingSystem, simulate
from .solver import CgConfig, ReconstructionModel
from .tensor import Tensor, tabs


@dataclass
class TrainConfig:
    steps: int = 200
    lr: float = 3e-3
    lr_min: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    sigma_c: float = 0.0
    sigma_p: float = 0.0
    cg: CgConfig = field(default_factory=CgConfig)


class Adam:
    """Plain first/second-moment optimizer over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, lr: float):
        self.t += 1
        c = self.cfg
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            mhat = self.m[k] / (1 - c.beta1 ** self.t)
            vhat = self.v[k] / (1 - c.beta2 ** self.t)
            p.data = p.data - lr * mhat / (np.sqrt(vhat) + c.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def cosine_lr(step: int, total: int, lr: float, lr_min: float) -> float:
    if total <= 1:
        return lr
    frac = step / (total - 1)
    return lr_min + 0.5 * (lr - lr_min) * (1 + np.cos(np.pi * frac))


def l1_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    return tabs(pred - Tensor(np.asarray(target))).mean()


def train(dataset: list[np.ndarray], sys: SensingSystem, model: ReconstructionModel,
          cfg: TrainConfig, log=None) -> list[float]:
    """Fit the model on ground-truth cubes; returns the per-step loss trace.

    Measurements are simulated once per cube with the configured noise and a
    fixed seed, so reruns are bitwise reproducible.
    """
    pairs: list[tuple[MeasurementPair, np.ndarray]] = []
    for i, cube in enumerate(dataset):
        noise = NoiseModel(cfg.sigma_c, cfg.sigma_p, seed=cfg.seed + i)
        pairs.append((simulate(cube, sys, noise), cube))

    params = model.params()
    opt = Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)
    trace: list[float] = []
    for step in range(cfg.steps):
        y, gt = pairs[int(rng.integers(len(pairs)))]
        opt.zero_grad()
        recon = model.reconstruct(y, sys, cfg.cg)
        loss = l1_loss(recon, gt)
        val = float(loss.data)
        if not np.isfinite(val):
            raise NumericError(f"training diverged at step {step}: loss={val}")
        loss.backward()
        lr = cosine_lr(step, cfg.steps, cfg.lr, cfg.lr_min)
        opt.step(lr)
        trace.append(val)
        if log is not None:
            log(step, val, lr)
    return trace
