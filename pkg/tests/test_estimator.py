"""Estimator facade: sklearn conventions plus fit/predict/score behavior."""

import numpy as np
import pytest
from sklearn.base import clone

from dcchi import DcchiReconstructor
from dcchi.errors import ShapeError
from dcchi.synth import make_dataset


@pytest.fixture(scope="module")
def fitted():
    cubes = make_dataset(2, 16, 16, 4, seed=0)
    est = DcchiReconstructor(stages=1, cg_iters=2, window=4, steps=3)
    return est.fit(cubes), cubes


def test_get_set_params_and_clone():
    est = DcchiReconstructor(stages=3, cg_iters=10)
    params = est.get_params()
    assert params["stages"] == 3 and params["cg_iters"] == 10
    est2 = clone(est)
    assert est2.get_params() == params
    est.set_params(stages=1)
    assert est.get_params()["stages"] == 1


def test_fit_exposes_trained_attributes(fitted):
    est, cubes = fitted
    assert len(est.loss_trace_) == 3
    assert est.system_.scene_shape == cubes[0].shape


def test_predict_shapes_and_score(fitted):
    est, cubes = fitted
    recons = est.predict(cubes)
    assert len(recons) == 2
    assert all(r.shape == cubes[0].shape for r in recons)
    assert np.isfinite(est.score(cubes))


def test_predict_before_fit_raises():
    with pytest.raises(ShapeError, match="not fitted"):
        DcchiReconstructor().predict(make_dataset(1, 16, 16, 4, seed=0))


def test_input_validation():
    est = DcchiReconstructor(stages=1, steps=1, window=4)
    with pytest.raises(ShapeError, match="3-d"):
        est.fit([np.zeros((4, 4))])
    bad = np.zeros((16, 16, 4))
    bad[0, 0, 0] = np.inf
    with pytest.raises(ShapeError, match="non-finite"):
        est.fit([bad])
    with pytest.raises(ShapeError, match="negative"):
        est.fit([np.full((16, 16, 4), -1.0)])
