"""
Acceptance gate. One test per criterion; each prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
without ``-s``).
"""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from attnforce.constraint import apply_plan, guidance_loss, spatial_excluding_constraint
from attnforce.core import GuidanceParams, Region, Vec2, bounding_box, mean_in_region, rasterize_region
from attnforce.detect import detect
from attnforce.errors import EmptyMask
from attnforce.forces import Force, balance, margin_force, repulsive_force, step_scale
from attnforce.io import scene_to_dict
from attnforce.metrics import vtcm
from attnforce.simulate import GOLDEN, NoiseSource, run, standard_scene, step_guided, step_unguided
from attnforce.warp import plan_warp, warp_step

from conftest import brute_mean, gaussian


@pytest.fixture
def report_line(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name} {detail}")
        assert ok, f"{name} failed: {detail}"

    return emit


def test_ac1_vtcm_table(report_line):
    rows = [
        ((28.26, 29.89, 14.11), 2.95),
        ((25.73, 52.64, 18.02), 1.92),
        ((27.94, 54.34, 22.55), 1.75),
        ((17.67, 21.30, 9.10), 2.77),
        ((27.96, 28.37, 13.29), 3.09),
    ]
    t0 = time.perf_counter()
    errs = [abs(vtcm(*args) - expected) for args, expected in rows]
    dt = time.perf_counter() - t0
    report_line("AC-1 VTCM vs reference P2P rows", max(errs) <= 0.01 and dt < 1.0, f"max |err|={max(errs):.4f} ({dt:.3f}s)")


def test_ac2_detector_oracle(report_line):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    disagreements = 0
    trials = 0
    while trials < 1000:
        xs = np.sort(rng.random(2))
        ys = np.sort(rng.random(2))
        if xs[0] == xs[1] or ys[0] == ys[1]:
            continue
        region = Region(xs[0], ys[0], xs[1], ys[1])
        try:
            mask = rasterize_region(region, 16, 16)
        except EmptyMask:
            continue
        v = rng.random((16, 16)) * rng.random()
        theta = rng.uniform(0.05, 0.5)
        oracle = brute_mean(v.tolist(), mask.tolist()) > theta
        disagreements += detect(v, mask, theta) != oracle
        trials += 1
    dt = time.perf_counter() - t0
    report_line("AC-2 detector vs brute force", disagreements == 0 and dt < 5.0, f"{disagreements}/1000 disagree ({dt:.2f}s)")


def test_ac3_warp_containment(report_line):
    p = GuidanceParams()
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    violations = 0
    for _ in range(1000):
        H = W = int(rng.choice([16, 32, 64]))
        center = (rng.uniform(0, H - 1), rng.uniform(0, W - 1))
        sigma = rng.uniform(0.03, 0.25) * H
        v = gaussian(H, W, center, sigma)
        # displacements up to the engine's clamp
        ang = rng.uniform(0, 2 * math.pi)
        mag = rng.uniform(0, step_scale(H, W, p.max_step))
        d = Vec2(mag * math.cos(ang), mag * math.sin(ang))
        out = warp_step(v, d, p)
        moved = plan_warp(v, d, p).apply_box(bounding_box(v, p.bbox_mass))
        if not (bounding_box(out, p.bbox_mass).within(H, W) and moved.within(H, W, tol=1e-9)):
            violations += 1
        if (out.values < 0).any():
            violations += 1
    identity_err = 0.0
    for _ in range(50):
        v = rng.random((16, 16))
        identity_err = max(identity_err, float(np.abs(warp_step(v, Vec2(0, 0), p).values - v).max()))
    dt = time.perf_counter() - t0
    ok = violations == 0 and identity_err <= 1e-9 and dt < 30
    report_line("AC-3 warp containment", ok, f"{violations} violations, identity err {identity_err:.1e} ({dt:.2f}s)")


def test_ac4_sec_exactness(report_line):
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    worst = 0.0
    bad = 0
    for _ in range(500):
        H, W = rng.integers(2, 40, size=2)
        v = rng.random((H, W)) * rng.uniform(0, 10)
        mask = rng.random((H, W)) < rng.random()
        lam = rng.random()
        out = spatial_excluding_constraint(v, mask, lam).values
        if np.any(out[mask] != 0.0):
            bad += 1
        worst = max(worst, float(np.abs(out[~mask] - lam * v[~mask]).max(initial=0.0)))
        once = spatial_excluding_constraint(v, mask, 1.0)
        if not np.array_equal(spatial_excluding_constraint(once, mask, 1.0).values, once.values):
            bad += 1
    dt = time.perf_counter() - t0
    ok = bad == 0 and worst <= 1e-12 and dt < 5
    report_line("AC-4 SEC exactness", ok, f"{bad} violations, max dev {worst:.1e} ({dt:.2f}s)")


def test_ac5_guidance_efficacy(report_line):
    scene = standard_scene()
    params = GuidanceParams()
    identical = []

    def compare(step, t, ori, res):
        for l in range(len(scene.layers)):
            for k in (2, 3):
                identical.append(np.array_equal(ori.map(l, k).values, res.map(l, k).values))

    t0 = time.perf_counter()
    rep = run(scene, GOLDEN, params, on_step=compare)
    dt = time.perf_counter() - t0

    flagged = rep.flagged_tokens
    final_means = []
    for l, (H, W) in enumerate(scene.layers):
        mask = rasterize_region(GOLDEN, H, W)
        for k in flagged:
            final_means.append(mean_in_region(rep.final_raw.map(l, k), mask))
            final_means.append(mean_in_region(rep.final_res.map(l, k), mask))
    g, u = rep.metrics["guided"], rep.metrics["unguided"]
    never = [k for k in scene.object_tokens if k not in flagged]
    a = flagged == [1] and max(final_means) < params.theta
    b = g.saliency_iou < u.saliency_iou
    c = g.tv_loss_in_R <= u.tv_loss_in_R
    d = never == [2, 3] and all(identical) and all(
        rec.centers[k] == scene.objects[k - 1].center for rec in rep.per_step for k in never
    )
    detail = (
        f"(a) max mean in R {max(final_means):.4f} < 0.2: {a}; "
        f"(b) IOU {g.saliency_iou:.2f} < {u.saliency_iou:.2f}: {b}; "
        f"(c) TV {g.tv_loss_in_R:.3f} <= {u.tv_loss_in_R:.3f}: {c}; "
        f"(d) untouched tokens identical: {d} ({dt:.2f}s)"
    )
    report_line("AC-5 guidance efficacy on std3", a and b and c and d and dt < 10, detail)


def test_ac6_loss_fixed_point(report_line):
    scene = standard_scene()
    params = GuidanceParams()
    noise = NoiseSource(scene.seed)
    t = scene.steps - 1
    ori = step_unguided(scene, t, noise)
    plan = step_guided(scene.objects, scene, GOLDEN, params, t, noise, ori=ori).plan
    assert plan.edits, "std3 must produce edits at the first step"
    res = apply_plan(ori, plan)
    zero = guidance_loss(ori, res, plan, params.gamma)
    rng = np.random.default_rng(5)
    positives = 0
    trials = 200
    for _ in range(trials):
        l = int(rng.integers(len(scene.layers)))
        k = int(rng.integers(res.token_count))
        v = res.map(l, k).values.copy()
        v.flat[int(rng.integers(v.size))] += 1e-3
        perturbed = res.replace_maps({(l, k): res.map(l, k).with_values(v)})
        positives += guidance_loss(ori, perturbed, plan, params.gamma)[0] > 0
    ok = zero == (0.0, 0.0, 0.0) and positives == trials
    report_line("AC-6 loss fixed point", ok, f"loss at targets {zero}, {positives}/{trials} perturbations positive")


def test_ac7_cli_determinism(report_line, tmp_path):
    scene = tmp_path / "std3.json"
    scene.write_text(json.dumps(scene_to_dict(standard_scene()), indent=2))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "attnforce", "simulate", "--scene", str(scene), "--region", "golden", "--out", str(out)],
            capture_output=True,
        )
        assert proc.returncode == 0, proc.stderr.decode()
        outs.append(out)
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in ("report.json", "metrics.csv"))
    report_line("AC-7 simulate determinism", same, "report.json and metrics.csv byte-identical" if same else "files differ")


def test_ac8_force_properties(report_line):
    rng = np.random.default_rng(8)
    n = 10_000
    dot_bad = bal_bad = mono_bad = margin_bad = 0
    for _ in range(n):
        v = Vec2(*rng.uniform(-100, 100, 2))
        t = Vec2(*rng.uniform(-100, 100, 2))
        f = repulsive_force(v, t, rng.uniform(0.01, 10), rng.uniform(1e-3, 1))
        if f.vector.dot(v - t) < 0:
            dot_bad += 1

        alpha = rng.uniform(1e-3, 10)
        m1, m2 = np.sort(rng.uniform(0, 1e3, 2))
        direction = Vec2(*rng.normal(size=2))
        direction = direction * (1.0 / direction.norm())
        b1 = balance(Force.of(direction * m1), alpha).magnitude
        b2 = balance(Force.of(direction * m2), alpha).magnitude
        if not (b1 < 1 and b2 < 1):
            bal_bad += 1
        if m1 < m2 and not b1 <= b2:
            mono_bad += 1

        H, W = (int(x) for x in rng.integers(2, 257, 2))
        mf = margin_force(Vec2((H - 1) / 2, (W - 1) / 2), H, W, rng.uniform(0, 10), rng.uniform(1e-3, 1))
        if mf.magnitude != 0.0:
            margin_bad += 1
    total = dot_bad + bal_bad + mono_bad + margin_bad
    detail = f"dot {dot_bad}, bounded {bal_bad}, monotone {mono_bad}, center {margin_bad} violations of {n}"
    report_line("AC-8 force properties", total == 0, detail)
