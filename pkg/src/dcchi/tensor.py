"""Dense N-D tensors with a recorded-operation tape for reverse-mode gradients.

Values are numpy arrays (f32 or f64). Every primitive that sees a
``requires_grad`` input records its parents and a vector-Jacobian closure;
``backward()`` on a scalar replays the tape once and populates ``.grad`` on
every reachable tensor that asked for gradients. Tensors are immutable once
built, so sharing across threads is safe; a tape is single-use.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import NumericError, ShapeError, StateError

_FLOAT_DTYPES = (np.float32, np.float64)

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _check_dtype(arr: np.ndarray) -> np.ndarray:
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """Immutable dense value, optionally attached to a gradient tape."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "_consumed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        self.data = _check_dtype(arr)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._vjp = None
        self._consumed = False

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, _coerce(other, self.dtype))

    def __radd__(self, other):
        return add(_coerce(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _coerce(other, self.dtype))

    def __rsub__(self, other):
        return sub(_coerce(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _coerce(other, self.dtype))

    def __rmul__(self, other):
        return mul(_coerce(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, _coerce(other, self.dtype))

    def __rtruediv__(self, other):
        return div(_coerce(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    # -- autodiff ------------------------------------------------------
    def backward(self):
        """Reverse-mode pass from a scalar. Consumes the tape."""
        if self.data.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {self.shape}")
        if self._vjp is None and not self.requires_grad:
            raise StateError("backward on a detached value (no tape recorded)")
        if self._consumed:
            raise StateError("tape already consumed by a previous backward")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
            node._consumed = True
        self._consumed = True


def _coerce(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _record(data: np.ndarray, parents: tuple, vjp) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def custom_op(data: np.ndarray, parents: tuple, vjp) -> Tensor:
    """Register a primitive with an externally supplied vector-Jacobian map.

    ``vjp(g)`` must return one cotangent (numpy array or None) per parent.
    Lets linear operators living outside this module (e.g. optical forward
    models) participate in the tape without re-expressing themselves in
    these primitives.
    """
    return _record(np.asarray(data), parents, vjp)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a cotangent down to the operand shape it was broadcast from."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcastable(a: tuple, b: tuple) -> bool:
    for x, y in zip(a[::-1], b[::-1]):
        if x != y and x != 1 and y != 1:
            return False
    return True


def _check_elementwise(a: Tensor, b: Tensor, opname: str):
    if not _broadcastable(a.shape, b.shape):
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not broadcast")


# -- elementwise arithmetic ---------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise(a, b, "add")
    return _record(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise(a, b, "sub")
    return _record(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise(a, b, "mul")
    return _record(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)))


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise(a, b, "div")
    return _record(a.data / b.data, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def neg(a: Tensor) -> Tensor:
    return _record(-a.data, (a,), lambda g: (-g,))


def texp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def tlog(a: Tensor) -> Tensor:
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def tsqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _record(out, (a,), lambda g: (g * 0.5 / out,))


def tabs(a: Tensor) -> Tensor:
    return _record(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clamp_min(a: Tensor, floor: float) -> Tensor:
    """Elementwise max with a constant; gradient passes only above the floor."""
    mask = a.data > floor
    return _record(np.maximum(a.data, floor), (a,), lambda g: (g * mask,))


def gelu(a: Tensor) -> Tensor:
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * cdf

    def vjp(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        return (g * (cdf + x * pdf),)

    return _record(out, (a,), vjp)


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(0.0, a.data)

    def vjp(g):
        sig = 1.0 / (1.0 + np.exp(-a.data))
        return (g * sig,)

    return _record(out, (a,), vjp)


# -- shape manipulation ---------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(range(a.ndim))[::-1]
    axes = tuple(int(x) for x in axes)
    inv = np.argsort(axes)
    return _record(np.transpose(a.data, axes), (a,),
                   lambda g: (np.transpose(g, inv),))


def take(a: Tensor, idx) -> Tensor:
    """Basic (int/slice/tuple) indexing with scatter-add backward."""
    out = a.data[idx]

    def vjp(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        return (ga,)

    return _record(out, (a,), vjp)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(data, tuple(tensors), vjp)


# -- reductions ------------------------------------------------------------

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        ax = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(out, (a,), vjp)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[i] for i in ax]))
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


# -- linear algebra ----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents disagree: {a.shape} @ {b.shape}")
    if not _broadcastable(a.shape[:-2], b.shape[:-2]):
        raise ShapeError(f"matmul batch extents disagree: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _record(out, (a, b), vjp)


# -- stable nonlinear composites ---------------------------------------------

def softmax_lastdim(t: Tensor) -> Tensor:
    """Softmax over the last dimension, max-subtracted for stability."""
    if np.isnan(t.data).any():
        raise NumericError("softmax_lastdim received NaN input")
    shift = t.data.max(axis=-1, keepdims=True)  # constant w.r.t. the tape
    e = texp(t - Tensor(shift, dtype=t.dtype))
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm(t: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last (channel) dimension, then apply gain and bias."""
    if gain.shape != (t.shape[-1],) or bias.shape != (t.shape[-1],):
        raise ShapeError(
            f"layer_norm affine extents {gain.shape}/{bias.shape} "
            f"do not match channel extent {t.shape[-1]}")
    mu = t.mean(axis=-1, keepdims=True)
    xc = t - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / tsqrt(var + eps)
    return xc * inv * gain + bias


def cosine_lastdim(a: Tensor, b: Tensor, eps: float = 1e-8) -> Tensor:
    """Cosine similarity along the last dimension, keepdim result in [-1, 1].

    Norms are clamped below by eps, so zero vectors yield ~0 instead of NaN.
    """
    if a.shape != b.shape:
        raise ShapeError(f"cosine_lastdim shapes disagree: {a.shape} vs {b.shape}")
    num = (a * b).sum(axis=-1, keepdims=True)
    na = clamp_min(tsqrt((a * a).sum(axis=-1, keepdims=True)), eps)
    nb = clamp_min(tsqrt((b * b).sum(axis=-1, keepdims=True)), eps)
    return num / (na * nb)


# -- spatial convolutions -----------------------------------------------------

def _conv_cols(x: np.ndarray, k: int, stride: int, pad: int):
    """im2col: (H, W, C) -> (Ho, Wo, k*k*C) column matrix plus padded input."""
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(0, 1))
    # axes after sliding: (H', W', C, k, k) -> (H', W', k, k, C)
    win = win[::stride, ::stride].transpose(0, 1, 3, 4, 2)
    ho, wo = win.shape[:2]
    return win.reshape(ho, wo, k * k * x.shape[2]), xp.shape


def conv2d(t: Tensor, kernel: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int | None = None) -> Tensor:
    """Cross-correlation of an H x W x Cin map with a k x k x Cin x Cout kernel."""
    if t.ndim != 3 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects HWC input and kkIO kernel, got {t.shape}, {kernel.shape}")
    k = kernel.shape[0]
    if kernel.shape[1] != k or k % 2 == 0:
        raise ShapeError(f"conv2d kernel must be odd square, got {kernel.shape[:2]}")
    if kernel.shape[2] != t.shape[2]:
        raise ShapeError(f"conv2d channel mismatch: input {t.shape[2]}, kernel {kernel.shape[2]}")
    if stride not in (1, 2):
        raise ShapeError(f"conv2d stride must be 1 or 2, got {stride}")
    if padding is None:
        padding = (k - 1) // 2
    h, w, cin = t.shape
    cout = kernel.shape[3]
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d output extent non-positive for input {t.shape}, k={k}, stride={stride}")

    cols, pad_shape = _conv_cols(t.data, k, stride, padding)
    wmat = kernel.data.reshape(k * k * cin, cout)
    out = cols.reshape(ho * wo, -1) @ wmat
    if bias is not None:
        out = out + bias.data
    out = out.reshape(ho, wo, cout)

    def vjp(g):
        gflat = g.reshape(ho * wo, cout)
        gw = (cols.reshape(ho * wo, -1).T @ gflat).reshape(kernel.shape)
        gcols = (gflat @ wmat.T).reshape(ho, wo, k, k, cin)
        gxp = np.zeros(pad_shape, dtype=t.dtype)
        for ik in range(k):
            for jk in range(k):
                gxp[ik:ik + stride * ho:stride, jk:jk + stride * wo:stride] += gcols[:, :, ik, jk, :]
        gx = gxp[padding:padding + h, padding:padding + w]
        if bias is not None:
            return (gx, gw, gflat.sum(axis=0))
        return (gx, gw)

    parents = (t, kernel) if bias is None else (t, kernel, bias)
    return _record(out, parents, vjp)


def conv_transpose2d(t: Tensor, kernel: Tensor, bias: Tensor | None = None,
                     stride: int = 2) -> Tensor:
    """Strided transposed convolution used for 2x upsampling (kernel side == stride)."""
    if t.ndim != 3 or kernel.ndim != 4:
        raise ShapeError(f"conv_transpose2d expects HWC input and kkIO kernel, got {t.shape}, {kernel.shape}")
    k = kernel.shape[0]
    if kernel.shape[1] != k or k != stride:
        raise ShapeError(f"conv_transpose2d requires kernel side == stride, got {kernel.shape[:2]}, stride={stride}")
    if kernel.shape[2] != t.shape[2]:
        raise ShapeError(f"conv_transpose2d channel mismatch: {t.shape[2]} vs {kernel.shape[2]}")
    h, w, cin = t.shape
    cout = kernel.shape[3]
    out = np.zeros((h * stride, w * stride, cout), dtype=t.dtype)
    for ik in range(k):
        for jk in range(k):
            out[ik::stride, jk::stride] = t.data @ kernel.data[ik, jk]
    if bias is not None:
        out = out + bias.data

    def vjp(g):
        gx = np.zeros_like(t.data)
        gw = np.zeros_like(kernel.data)
        for ik in range(k):
            for jk in range(k):
                sub = g[ik::stride, jk::stride]
                gx += sub @ kernel.data[ik, jk].T
                gw[ik, jk] = t.data.reshape(-1, cin).T @ sub.reshape(-1, cout)
        if bias is not None:
            return (gx, gw, g.sum(axis=(0, 1)))
        return (gx, gw)

    parents = (t, kernel) if bias is None else (t, kernel, bias)
    return _record(out, parents, vjp)
