"""Builders from the parsed key=value config to live objects.

A config fully determines a run; the hash of its sensing/solver/arch sections
is embedded in every checkpoint and output so mismatched replays are refused.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .network import ArchConfig
from .sensing import CodedMask, SensingSystem
from .solver import CgConfig
from .training import TrainConfig

PRESETS = {
    # dispersion geometry presets: simulation shifts right by 2, bench
    # hardware shifts up by 1
    "simulation": {"d": "2", "direction": "right"},
    "real": {"d": "1", "direction": "up"},
}


def _get(sec: dict[str, str], key: str, default=None, cast=str):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return cast(sec[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {sec[key]!r}") from exc


def _get_bool(sec, key, default):
    raw = sec.get(key)
    if raw is None:
        return default
    if raw in ("1", "true", "yes"):
        return True
    if raw in ("0", "false", "no"):
        return False
    raise ConfigError(f"bad boolean for {key!r}: {raw!r}")


def build_system(sections: dict) -> SensingSystem:
    sec = dict(sections.get("sensing", {}))
    preset = sec.pop("preset", None)
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown sensing preset {preset!r}")
        for k, v in PRESETS[preset].items():
            sec.setdefault(k, v)
    h = _get(sec, "h", cast=int)
    w = _get(sec, "w", cast=int)
    bands = _get(sec, "bands", cast=int)
    d = _get(sec, "d", 2, int)
    direction = _get(sec, "direction", "right")
    resp_raw = sec.get("pan_response", "uniform")
    if resp_raw == "uniform":
        resp = np.full(bands, 1.0 / bands)
    else:
        resp = np.array([float(v) for v in resp_raw.split(",")])
        resp = resp / resp.sum()
    mask = None
    if "mask_values" in sec:
        vals = np.array([float(v) for v in sec["mask_values"].split(",")]).reshape(h, w)
        mask = CodedMask(vals)
    return SensingSystem.create(h, w, bands, d=d, direction=direction,
                                mask_seed=_get(sec, "mask_seed", 0, int),
                                pan_response=resp, mask=mask)


def build_arch(sections: dict, sys: SensingSystem,
               disable: tuple[str, ...] = ()) -> ArchConfig:
    sec = sections.get("arch", {})
    heads_raw = sec.get("heads", "1,2,4")
    return ArchConfig(
        bands=sys.bands, height=sys.h, width=sys.w,
        window=_get(sec, "window", 8, int),
        base_width=_get(sec, "base_width", sys.bands, int),
        heads=tuple(int(v) for v in heads_raw.split(",")),
        ffn_expand=_get(sec, "ffn_expand", 4, int),
        use_crw=_get_bool(sec, "use_crw", True) and "crw" not in disable,
        use_mhac=_get_bool(sec, "use_mhac", True) and "mhac" not in disable,
        use_mhas=_get_bool(sec, "use_mhas", True) and "mhas" not in disable,
    )


def build_cg(sections: dict, override_iters: int | None = None) -> CgConfig:
    sec = sections.get("solver", {})
    iters = override_iters if override_iters is not None else _get(sec, "cg_iters", 5, int)
    return CgConfig(max_iters=iters, residual_tol=_get(sec, "cg_tol", 0.0, float))


def stages_of(sections: dict, override: int | None = None) -> int:
    if override is not None:
        return override
    return _get(sections.get("solver", {}), "stages", 2, int)


def build_train(sections: dict, cg: CgConfig, seed_override: int | None = None) -> TrainConfig:
    sec = sections.get("train", {})
    return TrainConfig(
        steps=_get(sec, "steps", 200, int),
        lr=_get(sec, "lr", 3e-3, float),
        lr_min=_get(sec, "lr_min", 1e-5, float),
        seed=seed_override if seed_override is not None else _get(sec, "seed", 0, int),
        sigma_c=_get(sec, "sigma_c", 0.0, float),
        sigma_p=_get(sec, "sigma_p", 0.0, float),
        cg=cg,
    )
