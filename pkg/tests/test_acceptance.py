"""Acceptance gate: one test per criterion, each printing a single pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
summary lines alongside the pytest verdicts.
"""

import time

import numpy as np

from dcchi import storage
from dcchi.ablate import COMPONENT_LADDER, cg_sweep, component_sweep
from dcchi.checks import run_denoiser_suite, run_primitive_suite
from dcchi.metrics import proxy_compare, psnr
from dcchi.network import ArchConfig, GuidedDenoiser, GuideExtractor, AttentionBlock
from dcchi.sensing import (NoiseModel, SensingSystem, cassi_adjoint,
                           cassi_forward, dense_phi, pan_adjoint, pan_forward,
                           phi_adjoint, phi_apply, simulate)
from dcchi.solver import (CgConfig, ReconstructionModel, cg_solve,
                          data_objective, data_step, phi_adjoint_cube)
from dcchi.synth import make_smooth_suite
from dcchi.tensor import Tensor


def _report(n, text):
    print(f"\n[PASS] criterion {n}: {text}")


def test_criterion_1_adjoint_suite():
    """20 seeded (x, y) pairs at H=W=16, C=8, d=2: adjoint defect <= 1e-10."""
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        sys = SensingSystem.create(16, 16, 8, d=2, mask_seed=seed)
        x = rng.standard_normal(sys.scene_shape)
        yc = rng.standard_normal(sys.cassi_shape)
        yp = rng.standard_normal((16, 16))
        yf = rng.standard_normal(sys.m)
        xf = rng.standard_normal(sys.n)

        pairs = [
            (np.vdot(cassi_forward(x, sys), yc), np.vdot(x, cassi_adjoint(yc, sys))),
            (np.vdot(pan_forward(x, sys), yp), np.vdot(x, pan_adjoint(yp, sys))),
            (np.vdot(phi_apply(xf, sys), yf), np.vdot(xf, phi_adjoint(yf, sys))),
        ]
        for lhs, rhs in pairs:
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-10, worst
    assert elapsed < 5.0, elapsed
    _report(1, f"adjoint defect {worst:.2e} over 20 seeds in {elapsed:.2f}s")


def test_criterion_2_dense_oracle_equivalence():
    """Materialized Phi reproduces matrix-free application; data_step matches
    the explicit regularized normal-equations solve at max_iters = N."""
    worst_apply = 0.0
    for h, w, c, d in ((4, 4, 2, 1), (6, 5, 3, 2), (8, 8, 4, 2)):
        rng = np.random.default_rng(h + w)
        sys = SensingSystem.create(h, w, c, d=d, mask_seed=h)
        phi = dense_phi(sys)
        for _ in range(5):
            v = rng.standard_normal(sys.n)
            worst_apply = max(worst_apply,
                              np.abs(phi @ v - phi_apply(v, sys)).max())
            u = rng.standard_normal(sys.m)
            worst_apply = max(worst_apply,
                              np.abs(phi.T @ u - phi_adjoint(u, sys)).max())
    assert worst_apply == 0.0 or worst_apply < 1e-14

    rng = np.random.default_rng(0)
    sys = SensingSystem.create(8, 8, 4, d=2, mask_seed=0)
    pair = simulate(rng.random(sys.scene_shape), sys)
    z = rng.random(sys.scene_shape)
    mu = 0.4
    got = data_step(pair, Tensor(z), mu, sys, CgConfig(max_iters=sys.n)).data
    phi = dense_phi(sys)
    y = np.concatenate([pair.cassi.ravel(), pair.pan.ravel()])
    want = np.linalg.solve(phi.T @ phi + mu * np.eye(sys.n),
                           phi.T @ y + mu * z.ravel()).reshape(sys.scene_shape)
    err = np.abs(got - want).max()
    assert err <= 1e-8, err
    _report(2, f"dense apply defect {worst_apply:.1e}, data_step vs dense {err:.1e}")


def test_criterion_3_cg_correctness():
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (16, 128, 512):
        m = rng.standard_normal((n, n))
        a = m @ m.T + n * np.eye(n)
        b = rng.standard_normal(n)
        x_star = np.linalg.solve(a, b)
        errs = []
        x = cg_solve(lambda v, a=a: Tensor(a @ v.data), Tensor(b),
                     Tensor(np.zeros(n)), CgConfig(max_iters=n),
                     callback=lambda xd, a=a, s=x_star, e=errs:
                         e.append(float((xd - s) @ a @ (xd - s))))
        worst = max(worst, float(np.abs(x.data - x_star).max()))
        assert all(e2 <= e1 * (1 + 1e-12) + 1e-12
                   for e1, e2 in zip(errs, errs[1:])), "A-norm error increased"
    assert worst <= 1e-8, worst

    sys = SensingSystem.create(8, 8, 4, mask_seed=2)
    pair = simulate(rng.random(sys.scene_shape), sys)
    z = rng.random(sys.scene_shape)
    objs = [data_objective(pair,
                           data_step(pair, Tensor(z), 0.2, sys,
                                     CgConfig(max_iters=k)).data,
                           z, 0.2, sys)
            for k in (1, 2, 5, 10, 20)]
    assert all(b <= a + 1e-10 for a, b in zip(objs, objs[1:]))
    _report(3, f"cg vs dense {worst:.1e}, objective chain {['%.3f' % o for o in objs]}")


def test_criterion_4_gradient_suite():
    t0 = time.perf_counter()
    reports = run_primitive_suite(seed=0, tol=1e-4)
    reports += run_denoiser_suite(seed=0, tol=1e-3)
    elapsed = time.perf_counter() - t0
    failed = [r for r in reports if not r.passed]
    assert not failed, "\n".join(str(r) for r in failed)
    assert elapsed < 600.0, elapsed
    worst = max(r.max_error for r in reports)
    _report(4, f"{len(reports)} gradient checks, worst rel err {worst:.1e}, {elapsed:.1f}s")


def test_criterion_5_residual_identity_invariants():
    rng = np.random.default_rng(3)
    cfg = ArchConfig(bands=4, height=16, width=16, window=4)
    gfe = GuideExtractor(cfg, rng)
    pyramid = gfe.forward(Tensor(rng.random((16, 16))))
    block = AttentionBlock(cfg, level=0, mode="local", rng=rng)
    x = rng.random((16, 16, 4))
    dev_block = np.abs(block.forward(Tensor(x), pyramid[0]).data - x).max()
    net = GuidedDenoiser(cfg, rng)
    dev_net = np.abs(net.forward(Tensor(x), 0.2, pyramid).data - x).max()
    assert dev_block == 0.0 and dev_net == 0.0
    _report(5, f"block deviation {dev_block}, denoiser deviation {dev_net}")


def test_criterion_6_desk_scale_learning_signal(desk_model):
    trace = desk_model["trace"]
    initial = trace[0]
    final = float(np.mean(trace[-10:]))
    assert final < 0.5 * initial, (initial, final)

    sys = desk_model["sys"]
    held = desk_model["held_out"]
    pair = simulate(held, sys, NoiseModel(seed=123))
    recon = desk_model["model"].reconstruct(pair, sys, cg=CgConfig(max_iters=5)).data
    model_psnr = psnr(recon, held)
    base_psnr = psnr(phi_adjoint_cube(pair, sys), held)
    assert model_psnr >= base_psnr + 3.0, (model_psnr, base_psnr)
    _report(6, f"loss {initial:.3f} -> {final:.3f}, held-out psnr "
               f"{model_psnr:.2f} dB vs adjoint baseline {base_psnr:.2f} dB")


def test_criterion_7_cg_iteration_harness(desk_model):
    sys = desk_model["sys"]
    scene = desk_model["held_out"]
    pair = simulate(scene, sys, NoiseModel(seed=123))
    rows = cg_sweep(desk_model["model"], sys, scene, pair, repeats=5)
    assert [r["variant"] for r in rows] == ["cg-1", "cg-2", "cg-5", "cg-10"]
    times = [r["wall_time_s"] for r in rows]
    assert all(b > a for a, b in zip(times, times[1:])), times
    objs = [r["data_objective"] for r in rows]
    assert all(b <= a + 1e-10 for a, b in zip(objs, objs[1:])), objs
    _report(7, f"wall times {['%.4f' % t for t in times]}, "
               f"objectives {['%.3f' % o for o in objs]}")


def test_criterion_8_break_down_harness():
    sys = SensingSystem.create(16, 16, 4, mask_seed=0)
    from dcchi.synth import make_dataset
    dataset = make_dataset(2, 16, 16, 4, seed=0)
    base = ArchConfig(bands=4, height=16, width=16, window=4)
    rows = component_sweep(base, sys, dataset, stages=1,
                           cg=CgConfig(max_iters=2), steps=1, seed=0)
    assert [r["variant"] for r in rows] == [n for n, _ in COMPONENT_LADDER]
    assert all(np.isfinite(r["final_loss"]) for r in rows)
    flops = [r["flops"] for r in rows]
    assert all(b > a for a, b in zip(flops, flops[1:])), flops
    _report(8, f"flop ladder {flops}")


def test_criterion_9_intra_similarity_proxy():
    sys = SensingSystem.create(32, 32, 8, mask_seed=0)
    corrs = []
    for cube in make_smooth_suite(10, 32, 32, 8, seed=0):
        rep = proxy_compare(cube, simulate(cube, sys).pan, window=8)
        corrs.append(rep.correlation)
    mean_corr = float(np.mean(corrs))
    assert mean_corr >= 0.9, corrs
    _report(9, f"mean proxy correlation {mean_corr:.4f} over 10 scenes")


def test_criterion_10_io_determinism(tmp_path, desk_model):
    rng = np.random.default_rng(4)
    arr = rng.standard_normal((8, 8, 3))
    storage.save_tensor(tmp_path / "a.dct", arr)
    assert storage.load_tensor(tmp_path / "a.dct").tobytes() == arr.tobytes()

    sys = desk_model["sys"]
    scene = desk_model["held_out"]
    pair = simulate(scene, sys, NoiseModel(0.005, 0.005, seed=11))
    files = []
    for run in range(2):
        model = ReconstructionModel(ArchConfig(bands=8, height=32, width=32),
                                    stages=2, rng=np.random.default_rng(7))
        out = model.reconstruct(pair, sys, cg=CgConfig(max_iters=3)).data
        p = tmp_path / f"recon_{run}.dct"
        storage.save_tensor(p, out)
        files.append(p.read_bytes())
    assert files[0] == files[1]
    _report(10, "tensor round-trip bitwise, repeated reconstruction bitwise identical")
