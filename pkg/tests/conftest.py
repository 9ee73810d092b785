import numpy as np
import pytest

from dcchi import ArchConfig, CgConfig, ReconstructionModel, SensingSystem, TrainConfig
from dcchi.synth import make_dataset, make_scene
from dcchi.training import train


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_sys():
    return SensingSystem.create(8, 8, 4, d=2, mask_seed=0)


@pytest.fixture(scope="session")
def desk_model():
    """Desk-scale trained model shared by the learning-signal and CG-harness
    acceptance criteria: 8 synthetic 32x32x8 cubes, 200 steps."""
    sys = SensingSystem.create(32, 32, 8, d=2, mask_seed=0)
    dataset = make_dataset(8, 32, 32, 8, seed=0)
    held_out = make_scene(32, 32, 8, seed=987)
    cfg = ArchConfig(bands=8, height=32, width=32, window=8)
    model = ReconstructionModel(cfg, stages=2, rng=np.random.default_rng(0))
    tc = TrainConfig(steps=200, seed=0, cg=CgConfig(max_iters=5))
    trace = train(dataset, sys, model, tc)
    return {"sys": sys, "dataset": dataset, "held_out": held_out,
            "model": model, "trace": trace}
