"""Ablation sweeps: CG iteration presets and attention component break-down."""

from __future__ import annotations

import time

import numpy as np

from .metrics import quality
from .network import ArchConfig, pipeline_macs
from .sensing import MeasurementPair, NoiseModel, SensingSystem, simulate
from .solver import CG_PRESETS, CgConfig, ReconstructionModel, data_objective, data_step
from .tensor import Tensor
from .training import TrainConfig, train


def cg_sweep(model: ReconstructionModel, sys: SensingSystem, scene: np.ndarray,
             pair: MeasurementPair, presets=CG_PRESETS, repeats: int = 3) -> list[dict]:
    """Reconstruct the same measurement under each CG iteration preset.

    Wall time is the best of `repeats` timed data-solve passes, so the
    systematic cost growth is not masked by scheduler noise.  The data-step
    objective is evaluated from a fixed (z, mu) pair shared by all presets.
    """
    x0, mus, sigmas = model.init_net.forward(pair, sys)
    z_fixed = Tensor(x0.data)
    mu_fixed = float(mus[0].data)
    rows = []
    for iters in presets:
        cg = CgConfig(max_iters=iters, residual_tol=0.0)
        recon = model.reconstruct(pair, sys, cg=cg).data
        rep = quality(recon, scene)
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            data_step(pair, z_fixed, mu_fixed, sys, cg)
            best = min(best, time.perf_counter() - t0)
        xk = data_step(pair, z_fixed, mu_fixed, sys, cg)
        obj = data_objective(pair, xk.data, z_fixed.data, mu_fixed, sys)
        rows.append({
            "variant": f"cg-{iters}",
            "psnr_db": rep.psnr_db,
            "ssim": rep.ssim,
            "flops": pipeline_macs(model.cfg, model.stages, iters),
            "wall_time_s": best,
            "data_objective": obj,
        })
    return rows


COMPONENT_LADDER = (
    ("baseline", {"use_crw": False, "use_mhac": False, "use_mhas": False}),
    ("+crw", {"use_crw": True, "use_mhac": False, "use_mhas": False}),
    ("+mha-c", {"use_crw": True, "use_mhac": True, "use_mhas": False}),
    ("+mha-s", {"use_crw": True, "use_mhac": True, "use_mhas": True}),
)


def component_sweep(base: ArchConfig, sys: SensingSystem, dataset: list[np.ndarray],
                    stages: int, cg: CgConfig, steps: int = 1,
                    seed: int = 0) -> list[dict]:
    """Instantiate the attention ladder, train each variant briefly, report cost."""
    rows = []
    for name, flags in COMPONENT_LADDER:
        cfg = ArchConfig(bands=base.bands, height=base.height, width=base.width,
                         window=base.window, base_width=base.base_width,
                         heads=base.heads, ffn_expand=base.ffn_expand, **flags)
        rng = np.random.default_rng(seed)
        model = ReconstructionModel(cfg, stages, rng)
        tc = TrainConfig(steps=steps, seed=seed, cg=cg)
        trace = train(dataset, sys, model, tc)
        pair = simulate(dataset[0], sys, NoiseModel(seed=seed))
        rep = quality(model.reconstruct(pair, sys, cg=cg).data, dataset[0])
        rows.append({
            "variant": name,
            "psnr_db": rep.psnr_db,
            "ssim": rep.ssim,
            "flops": pipeline_macs(cfg, stages, cg.max_iters),
            "final_loss": trace[-1],
        })
    return rows


def format_table(rows: list[dict]) -> str:
    cols = list(rows[0].keys())
    out = ["\t".join(cols)]
    for row in rows:
        cells = []
        for c in cols:
            v = row[c]
            cells.append(f"{v:.6g}" if isinstance(v, float) else str(v))
        out.append("\t".join(cells))
    return "\n".join(out)
