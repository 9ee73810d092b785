"""Property-style finite-difference checks across seeds for every primitive."""

import numpy as np
import pytest

from dcchi import tensor as T
from dcchi.checks import primitive_cases, sensing_cases
from dcchi.gradcheck import grad_check, grad_check_params
from dcchi.network import ArchConfig, AttentionBlock, GuideExtractor
from dcchi.sensing import SensingSystem
from dcchi.tensor import Tensor


@pytest.mark.parametrize("seed", range(5))
def test_primitive_suite_across_seeds(seed):
    for name, fn, arr in primitive_cases(seed):
        rep = grad_check(fn, arr, tol=1e-4, name=name, sample=20,
                         rng=np.random.default_rng(seed))
        assert rep.passed, str(rep)


@pytest.mark.parametrize("seed", range(3))
def test_sensing_ops_gradients(seed):
    sys = SensingSystem.create(8, 8, 4, d=2, mask_seed=seed)
    for name, fn, arr in sensing_cases(sys, seed):
        rep = grad_check(fn, arr, tol=1e-6, name=name, sample=24,
                         rng=np.random.default_rng(seed))
        assert rep.passed, str(rep)


def _weighted_sum(t):
    w = Tensor(np.sin(np.arange(t.data.size, dtype=np.float64)).reshape(t.data.shape))
    return T.tsum(t * w)


def test_attention_block_gradcheck():
    """Whole-block input gradient at a toy 8x8x4 shape, all paths live."""
    rng = np.random.default_rng(1)
    cfg = ArchConfig(bands=4, height=8, width=8, window=2, heads=(1, 2, 4))
    block = AttentionBlock(cfg, level=0, mode="local", rng=rng, identity_init=False)
    gfe = GuideExtractor(cfg, rng)
    pan = rng.random((8, 8))
    guide = gfe.forward(Tensor(pan))[0]
    x = rng.random((8, 8, cfg.level_width(0)))

    def loss(t):
        return _weighted_sum(block.forward(t, Tensor(guide.data)))

    rep = grad_check(loss, x, tol=1e-4, name="attention_block", sample=48,
                     rng=np.random.default_rng(2))
    assert rep.passed, str(rep)


def test_guide_extractor_param_gradcheck():
    rng = np.random.default_rng(3)
    cfg = ArchConfig(bands=4, height=8, width=8, window=2)
    gfe = GuideExtractor(cfg, rng)
    pan = rng.random((8, 8))

    def build_loss():
        levels = gfe.forward(Tensor(pan))
        return sum((_weighted_sum(g) for g in levels[1:]), _weighted_sum(levels[0]))

    rep = grad_check_params(build_loss, gfe.params(), tol=1e-4,
                            name="gfe", sample_per_param=10)
    assert rep.passed, str(rep)


def test_grad_check_catches_wrong_gradient():
    """The checker must fail when the analytic gradient is wrong."""
    def fn(t):
        # claims d/dt (t^2 sum) = t instead of 2t
        return T.custom_op(np.array((t.data ** 2).sum()), (t,), lambda g: (g * t.data,))

    rep = grad_check(fn, np.array([1.0, 2.0]), tol=1e-4, name="bad")
    assert not rep.passed


def test_report_names_worst_coordinate():
    rep = grad_check(lambda t: T.tsum(t * t), np.array([1.0, -2.0, 3.0]), name="quad")
    assert rep.passed
    assert rep.worst_coord in {(0,), (1,), (2,)}
    assert "quad" in str(rep) and "PASS" in str(rep)
