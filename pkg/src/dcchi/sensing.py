"""Dual-camera compressive acquisition: coded-shift operator, panchromatic
integration, their exact adjoints, and seeded measurement simulation.

All operators are matrix-free and linear. The numpy functions are the fast
path; ``*_op`` variants wrap them as tape primitives (the adjoint of a linear
map is its vector-Jacobian product, so gradients are exact by construction).

Vectorization order is row-major (h, then w, then c) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import Tensor, custom_op

DIRECTIONS = ("right", "up")


@dataclass
class CodedMask:
    """Per-pixel transmission in [0, 1], regenerable from its seed."""

    transmission: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.transmission = np.asarray(self.transmission, dtype=np.float64)
        if self.transmission.ndim != 2:
            raise ShapeError(f"mask must be 2-d, got {self.transmission.shape}")
        if self.transmission.min() < 0 or self.transmission.max() > 1:
            raise ConfigError("mask transmission values must lie in [0, 1]")

    @classmethod
    def random(cls, h: int, w: int, seed: int, density: float = 0.5) -> "CodedMask":
        """Seeded binary mask; default half-open, the usual coded-aperture choice."""
        rng = np.random.default_rng(seed)
        return cls((rng.random((h, w)) < density).astype(np.float64), seed=seed)


@dataclass
class SensingSystem:
    """Geometry and response of one dual-camera rig; defines Phi and its adjoint."""

    mask: CodedMask
    d: int
    direction: str
    pan_response: np.ndarray
    bands: int

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"dispersion direction must be one of {DIRECTIONS}")
        if self.d < 0:
            raise ConfigError("dispersion step must be non-negative")
        self.pan_response = np.asarray(self.pan_response, dtype=np.float64)
        if self.pan_response.shape != (self.bands,):
            raise ShapeError(
                f"pan_response extent {self.pan_response.shape} != bands {self.bands}")
        if (self.pan_response < 0).any():
            raise ConfigError("pan_response weights must be non-negative")
        if abs(self.pan_response.sum() - 1.0) > 1e-9:
            raise ConfigError("pan_response weights must sum to 1")

    @classmethod
    def create(cls, h: int, w: int, bands: int, d: int = 2, direction: str = "right",
               mask_seed: int = 0, pan_response: np.ndarray | None = None,
               mask: CodedMask | None = None) -> "SensingSystem":
        if mask is None:
            mask = CodedMask.random(h, w, mask_seed)
        if pan_response is None:
            pan_response = np.full(bands, 1.0 / bands)
        return cls(mask=mask, d=d, direction=direction,
                   pan_response=pan_response, bands=bands)

    @property
    def h(self) -> int:
        return self.mask.transmission.shape[0]

    @property
    def w(self) -> int:
        return self.mask.transmission.shape[1]

    @property
    def cassi_shape(self) -> tuple[int, int]:
        ext = self.d * (self.bands - 1)
        if self.direction == "right":
            return (self.h, self.w + ext)
        return (self.h + ext, self.w)

    @property
    def scene_shape(self) -> tuple[int, int, int]:
        return (self.h, self.w, self.bands)

    @property
    def m(self) -> int:
        hs, ws = self.cassi_shape
        return hs * ws + self.h * self.w

    @property
    def n(self) -> int:
        return self.h * self.w * self.bands


@dataclass
class NoiseModel:
    sigma_c: float = 0.0
    sigma_p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_c < 0 or self.sigma_p < 0:
            raise ConfigError("noise standard deviations must be non-negative")


@dataclass
class MeasurementPair:
    """One coded (dispersed) exposure and one panchromatic exposure."""

    cassi: np.ndarray
    pan: np.ndarray
    noise_sigma_c: float = 0.0
    noise_sigma_p: float = 0.0

    def validate(self, sys: SensingSystem):
        if self.cassi.shape != sys.cassi_shape:
            raise ShapeError(f"cassi shape {self.cassi.shape} != expected {sys.cassi_shape}")
        if self.pan.shape != (sys.h, sys.w):
            raise ShapeError(f"pan shape {self.pan.shape} != expected {(sys.h, sys.w)}")


# -- shift / unshift -----------------------------------------------------

def _band_offset(c: int, bands: int, d: int, direction: str) -> int:
    # "right": band c slides +c*d columns; "up": band c sits c*d rows closer
    # to the top of the extended canvas (band C-1 at offset 0 from the top).
    if direction == "right":
        return c * d
    return (bands - 1 - c) * d


def shift_cube(x: np.ndarray, d: int, direction: str = "right") -> np.ndarray:
    """Disperse: translate band c by c*d pixels into a zero-padded canvas."""
    h, w, bands = x.shape
    ext = d * (bands - 1)
    if direction == "right":
        out = np.zeros((h, w + ext, bands), dtype=x.dtype)
        for c in range(bands):
            o = _band_offset(c, bands, d, direction)
            out[:, o:o + w, c] = x[:, :, c]
    else:
        out = np.zeros((h + ext, w, bands), dtype=x.dtype)
        for c in range(bands):
            o = _band_offset(c, bands, d, direction)
            out[o:o + h, :, c] = x[:, :, c]
    return out


def unshift_cube(y: np.ndarray, h: int, w: int, bands: int, d: int,
                 direction: str = "right") -> np.ndarray:
    """Adjoint of shift_cube restricted to one band plane, or the gather of a
    2-d canvas back into aligned bands when ``y`` is 2-d."""
    out = np.empty((h, w, bands), dtype=y.dtype)
    for c in range(bands):
        o = _band_offset(c, bands, d, direction)
        if direction == "right":
            out[:, :, c] = y[:, o:o + w] if y.ndim == 2 else y[:, o:o + w, c]
        else:
            out[:, :, c] = y[o:o + h, :] if y.ndim == 2 else y[o:o + h, :, c]
    return out


# -- branch operators -----------------------------------------------------

def cassi_forward(x: np.ndarray, sys: SensingSystem) -> np.ndarray:
    """Coded branch: mask each band, disperse, integrate over bands."""
    if x.shape != sys.scene_shape:
        raise ShapeError(f"scene shape {x.shape} != system {sys.scene_shape}")
    return shift_cube(x * sys.mask.transmission[:, :, None], sys.d, sys.direction).sum(axis=2)


def cassi_adjoint(y: np.ndarray, sys: SensingSystem) -> np.ndarray:
    if y.shape != sys.cassi_shape:
        raise ShapeError(f"cassi measurement shape {y.shape} != {sys.cassi_shape}")
    gathered = unshift_cube(y, sys.h, sys.w, sys.bands, sys.d, sys.direction)
    return gathered * sys.mask.transmission[:, :, None]


def pan_forward(x: np.ndarray, sys: SensingSystem) -> np.ndarray:
    if x.shape != sys.scene_shape:
        raise ShapeError(f"scene shape {x.shape} != system {sys.scene_shape}")
    return x @ sys.pan_response


def pan_adjoint(y: np.ndarray, sys: SensingSystem) -> np.ndarray:
    if y.shape != (sys.h, sys.w):
        raise ShapeError(f"pan measurement shape {y.shape} != {(sys.h, sys.w)}")
    return y[:, :, None] * sys.pan_response


# -- stacked operator ------------------------------------------------------

def phi_apply(x: np.ndarray, sys: SensingSystem) -> np.ndarray:
    """Flat scene vector -> stacked measurement vector [coded; pan]."""
    x = np.asarray(x)
    if x.shape != (sys.n,):
        raise ShapeError(f"scene vector length {x.shape} != N={sys.n}")
    cube = x.reshape(sys.scene_shape)
    return np.concatenate([cassi_forward(cube, sys).ravel(),
                           pan_forward(cube, sys).ravel()])


def phi_adjoint(y: np.ndarray, sys: SensingSystem) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (sys.m,):
        raise ShapeError(f"measurement vector length {y.shape} != M={sys.m}")
    hs, ws = sys.cassi_shape
    yc = y[:hs * ws].reshape(hs, ws)
    yp = y[hs * ws:].reshape(sys.h, sys.w)
    return (cassi_adjoint(yc, sys) + pan_adjoint(yp, sys)).ravel()


def dense_phi(sys: SensingSystem) -> np.ndarray:
    """Materialize Phi column by column. Small instances only (oracle use)."""
    mat = np.zeros((sys.m, sys.n))
    e = np.zeros(sys.n)
    for j in range(sys.n):
        e[j] = 1.0
        mat[:, j] = phi_apply(e, sys)
        e[j] = 0.0
    return mat


# -- simulation --------------------------------------------------------------

def simulate(x: np.ndarray, sys: SensingSystem, noise: NoiseModel | None = None) -> MeasurementPair:
    """Noise-free branches plus seeded additive Gaussian noise."""
    noise = noise or NoiseModel()
    yc = cassi_forward(x, sys)
    yp = pan_forward(x, sys)
    rng = np.random.default_rng(noise.seed)
    if noise.sigma_c > 0:
        yc = yc + rng.normal(0.0, noise.sigma_c, yc.shape)
    if noise.sigma_p > 0:
        yp = yp + rng.normal(0.0, noise.sigma_p, yp.shape)
    return MeasurementPair(cassi=yc, pan=yp,
                           noise_sigma_c=noise.sigma_c, noise_sigma_p=noise.sigma_p)


# -- tape-aware wrappers ------------------------------------------------------

def cassi_forward_op(x: Tensor, sys: SensingSystem) -> Tensor:
    return custom_op(cassi_forward(x.data, sys), (x,),
                     lambda g: (cassi_adjoint(g, sys),))


def cassi_adjoint_op(y: Tensor, sys: SensingSystem) -> Tensor:
    return custom_op(cassi_adjoint(y.data, sys), (y,),
                     lambda g: (cassi_forward(g, sys),))


def pan_forward_op(x: Tensor, sys: SensingSystem) -> Tensor:
    return custom_op(pan_forward(x.data, sys), (x,),
                     lambda g: (pan_adjoint(g, sys),))


def pan_adjoint_op(y: Tensor, sys: SensingSystem) -> Tensor:
    return custom_op(pan_adjoint(y.data, sys), (y,),
                     lambda g: (pan_forward(g, sys),))


def phi_normal_op(x: Tensor, sys: SensingSystem) -> Tensor:
    """Phi^T Phi applied to a cube-shaped Tensor (self-adjoint, so vjp == fwd)."""

    def apply_normal(v: np.ndarray) -> np.ndarray:
        return (cassi_adjoint(cassi_forward(v, sys), sys)
                + pan_adjoint(pan_forward(v, sys), sys))

    return custom_op(apply_normal(x.data), (x,), lambda g: (apply_normal(g),))


# -- text serialization --------------------------------------------------------

def system_to_text(sys: SensingSystem) -> str:
    lines = [
        "[sensing]",
        f"h={sys.h}",
        f"w={sys.w}",
        f"bands={sys.bands}",
        f"d={sys.d}",
        f"direction={sys.direction}",
        f"pan_response={','.join(repr(float(v)) for v in sys.pan_response)}",
    ]
    if sys.mask.seed is not None:
        lines.append(f"mask_seed={sys.mask.seed}")
    else:
        lines.append("mask_values=" + ",".join(repr(float(v)) for v in sys.mask.transmission.ravel()))
    return "\n".join(lines) + "\n"


def system_from_text(text: str) -> SensingSystem:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(("[", "#")):
            continue
        if "=" not in line:
            raise ConfigError(f"malformed sensing config line: {line!r}")
        k, v = line.split("=", 1)
        kv[k.strip()] = v.strip()
    try:
        h, w, bands = int(kv["h"]), int(kv["w"]), int(kv["bands"])
        d, direction = int(kv["d"]), kv["direction"]
        resp = np.array([float(v) for v in kv["pan_response"].split(",")])
        if "mask_seed" in kv:
            mask = CodedMask.random(h, w, int(kv["mask_seed"]))
        else:
            vals = np.array([float(v) for v in kv["mask_values"].split(",")]).reshape(h, w)
            mask = CodedMask(vals)
    except KeyError as exc:
        raise ConfigError(f"sensing config missing key: {exc}") from exc
    return SensingSystem(mask=mask, d=d, direction=direction,
                         pan_response=resp, bands=bands)
