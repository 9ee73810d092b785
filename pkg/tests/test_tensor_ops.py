"""Forward-mode correctness of the tensor ops against plain numpy oracles."""

import numpy as np
import pytest

from dcchi import tensor as T
from dcchi.errors import ShapeError, StateError
from dcchi.tensor import Tensor


def test_arithmetic_matches_numpy(rng):
    a = rng.standard_normal((4, 5))
    b = rng.standard_normal((4, 5)) + 2.0
    ta, tb = Tensor(a), Tensor(b)
    assert np.allclose((ta + tb).data, a + b)
    assert np.allclose((ta - tb).data, a - b)
    assert np.allclose((ta * tb).data, a * b)
    assert np.allclose((ta / tb).data, a / b)
    assert np.allclose((-ta).data, -a)


def test_broadcasting_and_grad_unbroadcast(rng):
    a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal(4), requires_grad=True)
    out = T.tsum(a * b)
    out.backward()
    assert a.grad.shape == (3, 4)
    assert b.grad.shape == (4,)
    assert np.allclose(b.grad, a.data.sum(axis=0))


def test_shape_mismatch_raises():
    a = Tensor(np.zeros((3, 4)))
    b = Tensor(np.zeros((5, 2)))
    with pytest.raises(ShapeError):
        _ = a + b


def test_matmul_matches_loop_oracle(rng):
    a = rng.standard_normal((2, 3, 4))
    b = rng.standard_normal((2, 4, 5))
    got = T.matmul(Tensor(a), Tensor(b)).data
    want = np.zeros((2, 3, 5))
    for i in range(2):
        for r in range(3):
            for c in range(5):
                want[i, r, c] = a[i, r] @ b[i, :, c]
    assert np.allclose(got, want, atol=1e-14)


def test_matmul_shape_error_names_shapes():
    with pytest.raises(ShapeError, match=r"3.*4"):
        T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))


def test_softmax_rows_sum_to_one(rng):
    x = rng.standard_normal((6, 9))
    s = T.softmax_lastdim(Tensor(x)).data
    assert np.allclose(s.sum(axis=-1), 1.0)
    assert (s > 0).all()


def test_layer_norm_statistics(rng):
    x = rng.standard_normal((5, 8)) * 3 + 1
    g = Tensor(np.ones(8))
    b = Tensor(np.zeros(8))
    y = T.layer_norm(Tensor(x), g, b).data
    assert np.allclose(y.mean(axis=-1), 0.0, atol=1e-7)
    assert np.allclose(y.std(axis=-1), 1.0, atol=1e-3)


def test_cosine_lastdim_bounds(rng):
    a = rng.standard_normal((10, 4))
    b = rng.standard_normal((10, 4))
    c = T.cosine_lastdim(Tensor(a), Tensor(b)).data
    assert (np.abs(c) <= 1.0 + 1e-12).all()
    self_c = T.cosine_lastdim(Tensor(a), Tensor(a)).data
    assert np.allclose(self_c, 1.0)


def _conv_naive(x, k, stride, pad):
    h, w, cin = x.shape
    ks, _, _, cout = k.shape
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    oh = (h + 2 * pad - ks) // stride + 1
    ow = (w + 2 * pad - ks) // stride + 1
    out = np.zeros((oh, ow, cout))
    for i in range(oh):
        for j in range(ow):
            patch = xp[i * stride:i * stride + ks, j * stride:j * stride + ks]
            for co in range(cout):
                out[i, j, co] = (patch * k[:, :, :, co]).sum()
    return out


def test_conv2d_matches_naive(rng):
    x = rng.standard_normal((7, 9, 3))
    k = rng.standard_normal((3, 3, 3, 2))
    got = T.conv2d(Tensor(x), Tensor(k)).data
    assert np.allclose(got, _conv_naive(x, k, 1, 1), atol=1e-13)
    got2 = T.conv2d(Tensor(rng.standard_normal((8, 8, 3))), Tensor(k), stride=2)
    assert got2.data.shape == (4, 4, 2)


def test_conv_transpose_inverts_downsample_shape(rng):
    x = rng.standard_normal((4, 6, 3))
    k = rng.standard_normal((2, 2, 3, 5))
    y = T.conv_transpose2d(Tensor(x), Tensor(k), stride=2).data
    assert y.shape == (8, 12, 5)


def test_backward_requires_scalar():
    t = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        (t * t).backward()


def test_tape_consumed_after_backward():
    t = Tensor(np.ones(3), requires_grad=True)
    loss = T.tsum(t * t)
    loss.backward()
    with pytest.raises(StateError):
        loss.backward()


def test_backward_on_detached_raises():
    with pytest.raises(StateError):
        Tensor(np.array(1.0)).backward()


def test_reductions_and_indexing(rng):
    x = rng.standard_normal((3, 4, 5))
    t = Tensor(x)
    assert np.allclose(T.tsum(t, axis=1).data, x.sum(axis=1))
    assert np.allclose(T.tmean(t, axis=(0, 2)).data, x.mean(axis=(0, 2)))
    assert np.allclose(t[1, :, 2:4].data, x[1, :, 2:4])
    assert np.allclose(T.transpose(t, (2, 0, 1)).data, x.transpose(2, 0, 1))


def test_concat_roundtrip(rng):
    a = rng.standard_normal((3, 2))
    b = rng.standard_normal((3, 4))
    cat = T.concat([Tensor(a), Tensor(b)], axis=1)
    assert np.array_equal(cat.data, np.concatenate([a, b], axis=1))


def test_nonlinearities_reference_values():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    from scipy.special import erf
    gelu_ref = 0.5 * x * (1 + erf(x / np.sqrt(2)))
    assert np.allclose(T.gelu(Tensor(x)).data, gelu_ref, atol=1e-12)
    assert np.allclose(T.softplus(Tensor(x)).data, np.logaddexp(0, x), atol=1e-12)
    assert np.allclose(T.clamp_min(Tensor(x), 0.1).data, np.maximum(x, 0.1))
