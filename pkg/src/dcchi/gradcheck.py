"""Finite-difference verification of tape gradients.

Central differences in f64 are the independent oracle for every gradient the
tape produces; nothing here reuses the tape's own machinery beyond one
backward call per check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .tensor import Tensor


@dataclass
class GradCheckReport:
    name: str
    passed: bool
    max_error: float
    worst_coord: tuple = ()
    tol: float = 1e-4
    n_checked: int = 0
    errors: dict = field(default_factory=dict)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: max rel err {self.max_error:.3e} "
                f"at {self.worst_coord} (tol {self.tol:.1e}, {self.n_checked} coords)")


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def grad_check(fn, x: np.ndarray, h: float = 1e-5, tol: float = 1e-4,
               name: str = "fn", sample: int | None = None,
               rng: np.random.Generator | None = None) -> GradCheckReport:
    """Compare the tape gradient of scalar ``fn(Tensor)`` against central differences.

    ``fn`` must be deterministic and f64; ``sample`` limits the check to a
    random subset of coordinates for large inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    xt = Tensor(x.copy(), requires_grad=True)
    loss = fn(xt)
    if not np.isfinite(loss.data).all():
        raise NumericError(f"grad_check: {name} produced non-finite loss")
    loss.backward()
    analytic = xt.grad

    coords = [tuple(int(i) for i in c) for c in np.ndindex(x.shape)]
    if sample is not None and sample < len(coords):
        rng = rng or np.random.default_rng(0)
        picks = rng.choice(len(coords), size=sample, replace=False)
        coords = [coords[int(i)] for i in picks]

    worst = 0.0
    worst_coord: tuple = ()
    errors = {}
    for c in coords:
        xp = x.copy()
        xp[c] += h
        fp = float(fn(Tensor(xp)).data)
        xm = x.copy()
        xm[c] -= h
        fm = float(fn(Tensor(xm)).data)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"grad_check: {name} non-finite at perturbation {c}")
        fd = (fp - fm) / (2.0 * h)
        err = _rel_err(float(analytic[c]), fd)
        errors[c] = err
        if err > worst:
            worst, worst_coord = err, c

    return GradCheckReport(name=name, passed=worst <= tol, max_error=worst,
                           worst_coord=worst_coord, tol=tol,
                           n_checked=len(coords), errors=errors)


def grad_check_params(build_loss, params: dict, h: float = 1e-5, tol: float = 1e-4,
                      name: str = "params", sample_per_param: int | None = None,
                      rng: np.random.Generator | None = None) -> GradCheckReport:
    """Check gradients w.r.t. a dict of named parameter Tensors.

    ``build_loss()`` must read the current ``.data`` of each parameter and
    return a scalar Tensor on a fresh tape.
    """
    rng = rng or np.random.default_rng(0)
    for p in params.values():
        p.grad = None
    loss = build_loss()
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}

    worst = 0.0
    worst_coord: tuple = ()
    n = 0
    for key, p in params.items():
        coords = [tuple(int(i) for i in c) for c in np.ndindex(p.data.shape)]
        if sample_per_param is not None and sample_per_param < len(coords):
            picks = rng.choice(len(coords), size=sample_per_param, replace=False)
            coords = [coords[int(i)] for i in picks]
        for c in coords:
            orig = float(p.data[c])
            p.data[c] = orig + h
            fp = float(build_loss().data)
            p.data[c] = orig - h
            fm = float(build_loss().data)
            p.data[c] = orig
            fd = (fp - fm) / (2.0 * h)
            err = _rel_err(float(analytic[key][c]), fd)
            n += 1
            if err > worst:
                worst, worst_coord = err, (key,) + c

    return GradCheckReport(name=name, passed=worst <= tol, max_error=worst,
                           worst_coord=worst_coord, tol=tol, n_checked=n)
