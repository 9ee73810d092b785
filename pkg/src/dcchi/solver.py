"""Unrolled reconstruction driver.

Each stage alternates a conjugate-gradient solve of the data-fidelity normal
equations with a pass through the guided denoiser. Stage penalties and
denoiser noise levels come from a small initialization network, so the whole
pipeline is differentiable end to end and trainable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .network import (ArchConfig, GuideExtractor,
                      GuidedDenoiser, Module, trunc_normal)
from .sensing import (MeasurementPair, SensingSystem, cassi_adjoint,
                      cassi_adjoint_op, pan_adjoint, pan_adjoint_op,
                      phi_normal_op)
from .tensor import Tensor, conv2d, gelu, matmul, reshape, softplus

CG_PRESETS = (1, 2, 5, 10)


@dataclass
class CgConfig:
    max_iters: int = 5
    residual_tol: float = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("cg max_iters must be >= 1")
        if self.residual_tol < 0:
            raise ConfigError("cg residual_tol must be non-negative")


def _dot(a: Tensor, b: Tensor) -> Tensor:
    return (a * b).sum()


def cg_solve(apply_a, b: Tensor, x0: Tensor, cfg: CgConfig,
             callback=None) -> Tensor:
    """Conjugate gradients for SPD ``apply_a``; tape-differentiable.

    Stops after ``max_iters`` steps or when the residual norm falls below
    ``residual_tol``. The caller guarantees positive definiteness.
    """
    x = x0
    r = b - apply_a(x)
    p = r
    rs = _dot(r, r)
    for _ in range(cfg.max_iters):
        rs_val = float(rs.data)
        if not np.isfinite(rs_val):
            raise NumericError("cg_solve: non-finite residual (operator ill-posed?)")
        if np.sqrt(rs_val) <= cfg.residual_tol or rs_val == 0.0:
            break
        ap = apply_a(p)
        alpha = rs / _dot(p, ap)
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = _dot(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        if callback is not None:
            callback(x.data)
    return x


def data_objective(y: MeasurementPair, x: np.ndarray, z: np.ndarray,
                   mu: float, sys: SensingSystem) -> float:
    """Quadratic the data step minimizes: ||y - Phi x||^2 + mu ||z - x||^2."""
    from .sensing import cassi_forward, pan_forward
    rc = y.cassi - cassi_forward(x, sys)
    rp = y.pan - pan_forward(x, sys)
    return float((rc * rc).sum() + (rp * rp).sum() + mu * ((z - x) ** 2).sum())


def data_step(y: MeasurementPair, z: Tensor, mu, sys: SensingSystem,
              cfg: CgConfig, callback=None) -> Tensor:
    """CG solve of (Phi^T Phi + mu I) x = Phi^T y + mu z, warm-started at z."""
    if not isinstance(mu, Tensor):
        mu = Tensor(float(mu))
    if float(mu.data) <= 0:
        raise ConfigError("data_step requires mu > 0")
    yc = Tensor(np.asarray(y.cassi))
    yp = Tensor(np.asarray(y.pan))
    b = cassi_adjoint_op(yc, sys) + pan_adjoint_op(yp, sys) + mu * z

    def apply_a(v: Tensor) -> Tensor:
        return phi_normal_op(v, sys) + mu * v

    return cg_solve(apply_a, b, z, cfg, callback=callback)


class InitialNet(Module):
    """Produces the starting cube and positive per-stage (mu, sigma) pairs.

    The cube is the coded-branch adjoint refined by one 3x3 convolution; the
    stage parameters are softplus outputs of per-stage scalars shifted by a
    two-layer map of the mean coded-measurement intensity.
    """

    HIDDEN = 16

    def __init__(self, bands: int, stages: int, rng: np.random.Generator,
                 mu0: float = 0.5, sigma0: float = 0.1):
        self.stages = stages
        eye = np.zeros((3, 3, bands, bands))
        eye[1, 1] = np.eye(bands)
        self.conv_w = Tensor(eye + trunc_normal(rng, eye.shape, 0.02), requires_grad=True)
        self.conv_b = Tensor(np.zeros(bands), requires_grad=True)
        self.fc1_w = Tensor(trunc_normal(rng, (1, self.HIDDEN), 0.1), requires_grad=True)
        self.fc1_b = Tensor(np.zeros(self.HIDDEN), requires_grad=True)
        self.fc2_w = Tensor(trunc_normal(rng, (self.HIDDEN, 2 * stages), 0.1), requires_grad=True)
        self.fc2_b = Tensor(np.zeros(2 * stages), requires_grad=True)
        # softplus^-1 of the requested initial values
        raw = np.concatenate([np.full(stages, _inv_softplus(mu0)),
                              np.full(stages, _inv_softplus(sigma0))])
        self.stage_raw = Tensor(raw, requires_grad=True)

    def forward(self, y: MeasurementPair, sys: SensingSystem):
        adj = cassi_adjoint(np.asarray(y.cassi), sys)
        x0 = conv2d(Tensor(adj), self.conv_w, self.conv_b)
        m = Tensor(np.array([[float(np.mean(y.cassi))]]))
        hidden = gelu(matmul(m, self.fc1_w) + self.fc1_b)
        out = reshape(matmul(hidden, self.fc2_w) + self.fc2_b, (2 * self.stages,))
        vals = softplus(out + self.stage_raw)
        mus = [vals[k] for k in range(self.stages)]
        sigmas = [vals[self.stages + k] for k in range(self.stages)]
        return x0, mus, sigmas


def _inv_softplus(v: float) -> float:
    return float(np.log(np.expm1(v)))


class ReconstructionModel(Module):
    """Everything learnable: init net, shared guide extractor, one denoiser
    per stage (stage denoisers are independent, the guide pyramid is shared)."""

    def __init__(self, cfg: ArchConfig, stages: int, rng: np.random.Generator | None = None,
                 identity_init: bool = True, mu0: float = 0.5, sigma0: float = 0.1):
        if stages < 1:
            raise ConfigError("stage count must be >= 1")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        self.stages = stages
        self.init_net = InitialNet(cfg.bands, stages, rng, mu0=mu0, sigma0=sigma0)
        self.gfe = GuideExtractor(cfg, rng)
        self.denoisers = [GuidedDenoiser(cfg, rng, identity_init) for _ in range(stages)]

    def reconstruct(self, y: MeasurementPair, sys: SensingSystem,
                    cg: CgConfig | None = None, trace: list | None = None) -> Tensor:
        cg = cg or CgConfig()
        y.validate(sys)
        pyramid = self.gfe.forward(Tensor(np.asarray(y.pan)))
        x0, mus, sigmas = self.init_net.forward(y, sys)
        z = x0
        for k in range(self.stages):
            x = data_step(y, z, mus[k], sys, cg)
            z = self.denoisers[k].forward(x, sigmas[k], pyramid)
            if trace is not None:
                trace.append((x.data.copy(), z.data.copy(),
                              float(mus[k].data), float(sigmas[k].data)))
        return z


def run_pipeline(y: MeasurementPair, sys: SensingSystem, model: ReconstructionModel,
                 cg: CgConfig | None = None) -> np.ndarray:
    """Convenience wrapper returning a plain cube."""
    return model.reconstruct(y, sys, cg).data


def identity_prior_pipeline(y: MeasurementPair, sys: SensingSystem, stages: int,
                            mu: float, cg: CgConfig) -> np.ndarray:
    """Unrolled iterations with the prior step removed (z = x). Converges to
    the ridge-regularized least-squares fixed point; used as an untrained
    baseline and by reconstruction without a checkpoint."""
    z = Tensor(phi_adjoint_cube(y, sys))
    for _ in range(stages):
        z = data_step(y, z, mu, sys, cg)
    return z.data


def phi_adjoint_cube(y: MeasurementPair, sys: SensingSystem) -> np.ndarray:
    """Phi^T y reshaped to the scene cube, the standard cheap initialization."""
    return cassi_adjoint(np.asarray(y.cassi), sys) + pan_adjoint(np.asarray(y.pan), sys)
