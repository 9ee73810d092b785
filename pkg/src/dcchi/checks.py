"""Finite-difference verification suites over every differentiable primitive.

Each entry builds a scalar loss from a seeded input and compares the tape
gradient against central differences.  The suites back both the `gradcheck`
CLI command and the acceptance tests.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .gradcheck import GradCheckReport, grad_check, grad_check_params
from .network import ArchConfig, GuidedDenoiser, GuideExtractor
from .sensing import (SensingSystem, cassi_adjoint_op, cassi_forward_op,
                      pan_adjoint_op, pan_forward_op, phi_normal_op)
from .tensor import Tensor


def _scalar(t: Tensor) -> Tensor:
    # weight the output so the loss is not symmetric in any axis
    w = Tensor(np.cos(np.arange(t.data.size, dtype=np.float64)).reshape(t.data.shape))
    return T.tsum(t * w)


def primitive_cases(seed: int = 0):
    """Yield (name, fn, input array) triples covering the op vocabulary."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((5, 7))
    pos = rng.random((5, 7)) + 0.5
    b = Tensor(rng.standard_normal((5, 7)))
    mat = Tensor(rng.standard_normal((7, 4)))
    gain = Tensor(rng.random(7) + 0.5)
    bias = Tensor(rng.standard_normal(7))
    img = rng.standard_normal((8, 8, 3))
    k3 = Tensor(rng.standard_normal((3, 3, 3, 2)) * 0.3)
    k2 = Tensor(rng.standard_normal((2, 2, 3, 2)) * 0.3)
    other = Tensor(rng.standard_normal((5, 7)))
    yield "add", lambda t: _scalar(t + b), x
    yield "sub", lambda t: _scalar(t - b), x
    yield "mul", lambda t: _scalar(t * b), x
    yield "div", lambda t: _scalar(t / Tensor(pos)), x
    yield "neg", lambda t: _scalar(-t), x
    yield "exp", lambda t: _scalar(T.texp(t)), x * 0.3
    yield "log", lambda t: _scalar(T.tlog(t)), pos
    yield "sqrt", lambda t: _scalar(T.tsqrt(t)), pos
    yield "abs", lambda t: _scalar(T.tabs(t)), x + 0.2
    yield "clamp_min", lambda t: _scalar(T.clamp_min(t, 0.1)), pos
    yield "gelu", lambda t: _scalar(T.gelu(t)), x
    yield "softplus", lambda t: _scalar(T.softplus(t)), x
    yield "matmul", lambda t: _scalar(T.matmul(t, mat)), x
    yield "softmax", lambda t: _scalar(T.softmax_lastdim(t)), x
    yield "layer_norm", lambda t: _scalar(T.layer_norm(t, gain, bias)), x
    yield "cosine", lambda t: _scalar(T.cosine_lastdim(t, other)), x
    yield "reshape", lambda t: _scalar(T.reshape(t, (7, 5))), x
    yield "transpose", lambda t: _scalar(T.transpose(t)), x
    yield "take", lambda t: _scalar(t[1:4, 2:6]), x
    yield "concat", lambda t: _scalar(T.concat([t, b], axis=0)), x
    yield "sum", lambda t: T.tsum(t * b), x
    yield "mean_axis", lambda t: _scalar(T.tmean(t, axis=1)), x
    yield "conv2d", lambda t: _scalar(T.conv2d(t, k3)), img
    yield "conv2d_s2", lambda t: _scalar(T.conv2d(t, k3, stride=2)), img
    yield "conv_transpose2d", lambda t: _scalar(T.conv_transpose2d(t, k2, stride=2)), img


def sensing_cases(sys: SensingSystem, seed: int = 0):
    rng = np.random.default_rng(seed)
    cube = rng.random(sys.scene_shape)
    plane = rng.random(sys.cassi_shape)
    pan = rng.random((sys.h, sys.w))
    yield "cassi_forward", lambda t: _scalar(cassi_forward_op(t, sys)), cube
    yield "cassi_adjoint", lambda t: _scalar(cassi_adjoint_op(t, sys)), plane
    yield "pan_forward", lambda t: _scalar(pan_forward_op(t, sys)), cube
    yield "pan_adjoint", lambda t: _scalar(pan_adjoint_op(t, sys)), pan
    yield "phi_normal", lambda t: _scalar(phi_normal_op(t, sys)), cube


def run_primitive_suite(seed: int = 0, tol: float = 1e-4) -> list[GradCheckReport]:
    reports = []
    for name, fn, arr in primitive_cases(seed):
        reports.append(grad_check(fn, arr, tol=tol, name=name))
    sys = SensingSystem.create(8, 8, 4, d=2, mask_seed=seed)
    for name, fn, arr in sensing_cases(sys, seed):
        reports.append(grad_check(fn, arr, tol=tol, name=name))
    return reports


def run_denoiser_suite(seed: int = 0, tol: float = 1e-3,
                       sample: int = 24) -> list[GradCheckReport]:
    """Full denoiser gradient check at the 16x16x4 desk shape.

    Checks the input gradient and a subsample of coordinates of every
    parameter tensor; identity init is disabled so all paths carry signal.
    """
    rng = np.random.default_rng(seed)
    cfg = ArchConfig(bands=4, height=16, width=16, window=4, heads=(1, 2, 4))
    gfe = GuideExtractor(cfg, rng)
    net = GuidedDenoiser(cfg, rng, identity_init=False)
    pan = rng.random((16, 16))
    x = rng.random((16, 16, 4))

    def loss_from_input(t: Tensor) -> Tensor:
        return _scalar(net.forward(t, 0.05, gfe.forward(Tensor(pan))))

    reports = [grad_check(loss_from_input, x, tol=tol, name="denoiser.input",
                          sample=4 * sample, rng=np.random.default_rng(seed + 1))]

    params = dict(net.params())
    params.update({"gfe." + k: v for k, v in gfe.params().items()})

    def build_loss() -> Tensor:
        return _scalar(net.forward(Tensor(x), 0.05, gfe.forward(Tensor(pan))))

    reports.append(grad_check_params(build_loss, params, tol=tol,
                                     name="denoiser.params",
                                     sample_per_param=sample,
                                     rng=np.random.default_rng(seed + 2)))
    return reports
