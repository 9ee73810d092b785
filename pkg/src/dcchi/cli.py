"""Command-line surface: simulate, reconstruct, train, gradcheck, ablate, analyze-corr.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 format
error.  The DCCHI_THREADS environment variable caps BLAS parallelism; it is
applied in the package __init__ before numpy loads.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import checks, runconfig, storage
from .ablate import component_sweep, cg_sweep, format_table
from .errors import ConfigError, FormatError, NumericError
from .metrics import proxy_compare, quality
from .sensing import MeasurementPair, NoiseModel, simulate, system_to_text
from .solver import ReconstructionModel, identity_prior_pipeline
from .synth import make_dataset, make_smooth_suite
from .training import train


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def run_guarded(fn):
    try:
        fn()
    except ConfigError as e:
        _fail(2, str(e))
    except NumericError as e:
        _fail(3, str(e))
    except FormatError as e:
        _fail(4, str(e))


def _load_config(path) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return storage.read_config(p)


def _out_dir(sections, out) -> Path:
    target = out or sections.get("paths", {}).get("out", ".")
    d = Path(target)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _path_of(sections, key, flag=None) -> Path:
    if flag:
        return Path(flag)
    paths = sections.get("paths", {})
    if key not in paths:
        raise ConfigError(f"missing [paths] {key}")
    return Path(paths[key])


def _load_pair(sections) -> MeasurementPair:
    cassi = storage.load_tensor(_path_of(sections, "cassi"))
    pan = storage.load_tensor(_path_of(sections, "pan"))
    return MeasurementPair(cassi=cassi, pan=pan)


def _build_model(sections, sys_, stages, disable, rng_seed=0,
                 identity_init=True) -> ReconstructionModel:
    arch = runconfig.build_arch(sections, sys_, disable=disable)
    return ReconstructionModel(arch, stages, np.random.default_rng(rng_seed),
                               identity_init=identity_init)


def _disable_tuple(crw, mhac, mhas):
    return tuple(n for n, f in (("crw", crw), ("mhac", mhac), ("mhas", mhas)) if f)


@click.group()
def main():
    """Dual-camera compressive hyperspectral imaging toolkit."""


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(), required=False)
@click.option("--seed", type=int, default=None, help="noise seed override")
@click.option("--out", type=click.Path(), default=None, help="output directory")
def simulate_cmd(config_path, seed, out):
    """Simulate coded + panchromatic measurements of a scene cube."""

    def body():
        sections = _load_config(config_path)
        sys_ = runconfig.build_system(sections)
        scene = storage.load_tensor(_path_of(sections, "scene"))
        if scene.shape != sys_.scene_shape:
            raise ConfigError(f"scene shape {scene.shape} does not match "
                              f"sensing config {sys_.scene_shape}")
        sim = sections.get("simulate", {})
        noise = NoiseModel(
            sigma_c=float(sim.get("sigma_c", "0")),
            sigma_p=float(sim.get("sigma_p", "0")),
            seed=seed if seed is not None else int(sim.get("seed", "0")),
        )
        pair = simulate(scene, sys_, noise)
        d = _out_dir(sections, out)
        storage.save_tensor(d / "cassi.dct", pair.cassi)
        storage.save_tensor(d / "pan.dct", pair.pan)
        h = storage.config_hash(sections)
        (d / "sensing.cfg").write_text(system_to_text(sys_)
                                       + f"\n[meta]\nconfig_hash={h}\n")
        click.echo(f"wrote {d / 'cassi.dct'} {d / 'pan.dct'} (config_hash={h})")

    run_guarded(body)


@main.command("reconstruct")
@click.option("--config", "config_path", type=click.Path(), required=False)
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--cg-iters", type=int, default=None)
@click.option("--stages", type=int, default=None)
@click.option("--disable-crw", is_flag=True)
@click.option("--disable-mhac", is_flag=True)
@click.option("--disable-mhas", is_flag=True)
@click.option("--out", type=click.Path(), default=None)
def reconstruct_cmd(config_path, checkpoint, cg_iters, stages,
                    disable_crw, disable_mhac, disable_mhas, out):
    """Reconstruct a cube from measurement files, optionally with a checkpoint."""

    def body():
        sections = _load_config(config_path)
        sys_ = runconfig.build_system(sections)
        pair = _load_pair(sections)
        pair.validate(sys_)
        cg = runconfig.build_cg(sections, cg_iters)
        k = runconfig.stages_of(sections, stages)
        disable = _disable_tuple(disable_crw, disable_mhac, disable_mhas)
        ckpt = checkpoint or sections.get("paths", {}).get("checkpoint")
        if ckpt:
            params, meta = storage.load_checkpoint(ckpt)
            own_hash = storage.config_hash(sections)
            if meta.get("config_hash") != own_hash:
                diff = meta.get("config_items", "")
                raise ConfigError(
                    "checkpoint was trained under a different config "
                    f"(hash {meta.get('config_hash')} != {own_hash})"
                    + (f"; trained config: {diff}" if diff else ""))
            model = _build_model(sections, sys_, int(meta["stages"]), disable)
            model.load_params(params)
            recon = model.reconstruct(pair, sys_, cg=cg).data
        else:
            mu = float(sections.get("solver", {}).get("mu", "0.01"))
            recon = identity_prior_pipeline(pair, sys_, k, mu, cg)
        d = _out_dir(sections, out)
        storage.save_tensor(d / "recon.dct", recon)
        lines = [f"config_hash={storage.config_hash(sections)}"]
        gt_path = sections.get("paths", {}).get("ground_truth")
        if gt_path:
            rep = quality(recon, storage.load_tensor(gt_path))
            lines += rep.lines()
        (d / "recon_report.txt").write_text("\n".join(lines) + "\n")
        for line in lines:
            click.echo(line)

    run_guarded(body)


@main.command("train")
@click.option("--config", "config_path", type=click.Path(), required=False)
@click.option("--seed", type=int, default=None)
@click.option("--cg-iters", type=int, default=None)
@click.option("--stages", type=int, default=None)
@click.option("--disable-crw", is_flag=True)
@click.option("--disable-mhac", is_flag=True)
@click.option("--disable-mhas", is_flag=True)
@click.option("--out", type=click.Path(), default=None)
def train_cmd(config_path, seed, cg_iters, stages,
              disable_crw, disable_mhac, disable_mhas, out):
    """Train the unrolled model on a directory of cube files."""

    def body():
        sections = _load_config(config_path)
        sys_ = runconfig.build_system(sections)
        cg = runconfig.build_cg(sections, cg_iters)
        k = runconfig.stages_of(sections, stages)
        tc = runconfig.build_train(sections, cg, seed)
        disable = _disable_tuple(disable_crw, disable_mhac, disable_mhas)
        dataset = _load_dataset(sections)
        model = _build_model(sections, sys_, k, disable, rng_seed=tc.seed)
        trace = train(dataset, sys_, model, tc,
                      log=lambda s, v, lr: click.echo(f"step {s} loss {v:.6f}"))
        d = _out_dir(sections, out)
        params = {k_: p.data for k_, p in model.params().items()}
        storage.save_checkpoint(d / "model.dck", params, stages=k,
                                config_hash=storage.config_hash(sections))
        (d / "loss_trace.txt").write_text(
            "\n".join(f"{i}\t{v:.10e}" for i, v in enumerate(trace)) + "\n")
        click.echo(f"wrote {d / 'model.dck'}; final loss {trace[-1]:.6f}")

    run_guarded(body)


def _load_dataset(sections) -> list[np.ndarray]:
    paths = sections.get("paths", {})
    if "dataset" in paths:
        folder = Path(paths["dataset"])
        files = sorted(folder.glob("*.dct"))
        if not files:
            raise ConfigError(f"no .dct cube files under {folder}")
        return [storage.load_tensor(f) for f in files]
    # synthetic fallback so training is runnable without any data on disk
    sec = sections.get("train", {})
    sys_sec = sections.get("sensing", {})
    return make_dataset(int(sec.get("synthetic_cubes", "8")),
                        int(sys_sec["h"]), int(sys_sec["w"]),
                        int(sys_sec["bands"]), seed=int(sec.get("seed", "0")))


@main.command("gradcheck")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--full/--primitives-only", default=True,
              help="also run the whole-denoiser check")
def gradcheck_cmd(config_path, seed, full):
    """Finite-difference verification of every primitive and the denoiser."""

    def body():
        reports = checks.run_primitive_suite(seed=seed)
        if full:
            reports += checks.run_denoiser_suite(seed=seed)
        failed = [r for r in reports if not r.passed]
        for r in reports:
            click.echo(str(r))
        if failed:
            raise NumericError(f"{len(failed)} gradient check(s) failed")
        click.echo(f"all {len(reports)} gradient checks passed")

    run_guarded(body)


@main.command("ablate")
@click.option("--config", "config_path", type=click.Path(), required=False)
@click.option("--mode", type=click.Choice(["cg", "components"]), default="cg")
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--stages", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=None)
def ablate_cmd(config_path, mode, checkpoint, stages, seed, out):
    """Sweep CG presets or the attention component ladder; print a table."""

    def body():
        sections = _load_config(config_path)
        sys_ = runconfig.build_system(sections)
        k = runconfig.stages_of(sections, stages)
        abl = sections.get("ablate", {})
        n_cubes = int(abl.get("cubes", "4"))
        train_steps = int(abl.get("train_steps", "1"))
        dataset = make_dataset(n_cubes, sys_.h, sys_.w, sys_.bands, seed=seed)
        arch = runconfig.build_arch(sections, sys_)
        if mode == "cg":
            model = ReconstructionModel(arch, k, np.random.default_rng(seed))
            ckpt = checkpoint or sections.get("paths", {}).get("checkpoint")
            if ckpt:
                params, meta = storage.load_checkpoint(ckpt)
                model = ReconstructionModel(arch, int(meta["stages"]),
                                            np.random.default_rng(seed))
                model.load_params(params)
            scene = dataset[0]
            pair = simulate(scene, sys_, NoiseModel(seed=seed))
            rows = cg_sweep(model, sys_, scene, pair)
        else:
            rows = component_sweep(arch, sys_, dataset, k,
                                   runconfig.build_cg(sections),
                                   steps=train_steps, seed=seed)
        table = format_table(rows)
        click.echo(table)
        if out:
            d = _out_dir(sections, out)
            (d / f"ablate_{mode}.tsv").write_text(table + "\n")

    run_guarded(body)


@main.command("analyze-corr")
@click.option("--config", "config_path", type=click.Path(), required=False)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=None)
def analyze_corr_cmd(config_path, seed, out):
    """Window-local correlation proxy between cubes and their panchromatic views."""

    def body():
        sections = _load_config(config_path)
        sys_ = runconfig.build_system(sections)
        sec = sections.get("analyze", {})
        n = int(sec.get("scenes", "10"))
        window = int(sec.get("window", "8"))
        patch = int(sec.get("patch", "3"))
        scenes = make_smooth_suite(n, sys_.h, sys_.w, sys_.bands, seed=seed)
        rows = []
        for cube in scenes:
            pan = simulate(cube, sys_).pan
            rows.append(proxy_compare(cube, pan, window, patch=patch))
        d = _out_dir(sections, out)
        csv = ["rmse,correlation,psnr_db"]
        csv += [f"{r.rmse:.8f},{r.correlation:.8f},{r.psnr_db:.4f}" for r in rows]
        (d / "corr_proxy.csv").write_text("\n".join(csv) + "\n")
        mean_corr = float(np.mean([r.correlation for r in rows]))
        report = [f"scenes={n}", f"window={window}", f"patch={patch}",
                  f"mean_correlation={mean_corr:.6f}",
                  f"mean_rmse={float(np.mean([r.rmse for r in rows])):.8f}",
                  f"config_hash={storage.config_hash(sections)}"]
        (d / "corr_report.txt").write_text("\n".join(report) + "\n")
        for line in report:
            click.echo(line)

    run_guarded(body)


if __name__ == "__main__":
    main()
