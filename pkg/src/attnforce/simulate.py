"""
Diffusion-free stand-in for the paired denoising loop.

Each object token is a parametric Gaussian blob. The unguided trajectory
re-renders the scene as declared; the guided one carries blob parameters
that every step's detect / repel / warp / exclude edit feeds back into.

Timesteps run from ``steps - 1`` down to ``0``: blobs are widest and noisiest
at the start and sharpen as the loop proceeds.

Noise for a map is drawn from ``PCG64(SeedSequence(seed, spawn_key=(t, layer,
token)))``, so both trajectories see the same noise field for a given
(timestep, layer, token), as paired generations sharing an initial latent
would.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .constraint import EditPlan, apply_plan, guidance_loss
from .core import (
    AttentionMap,
    AttentionStack,
    GuidanceParams,
    Region,
    centroid,
    mean_in_region,
    rasterize_region,
    region_centroid,
)
from .detect import ConflictSet, detect_all, region_mask
from .errors import InvariantError, WarpFailure
from .forces import TargetSpec, displacement
from .metrics import composite_field, evaluate
from .warp import warp_step_with_transform

log = logging.getLogger(__name__)

__all__ = [
    "BlobObject",
    "Scene",
    "TargetRegion",
    "NoiseSource",
    "StepRecord",
    "GuidanceReport",
    "render_blob",
    "render_stack",
    "step_unguided",
    "step_guided",
    "run",
    "standard_scene",
    "GOLDEN",
]

GOLDEN = Region(0.618, 0.30, 0.95, 0.70)


@dataclass(frozen=True)
class BlobObject:
    token: int
    center: tuple  # normalized (x, y); x runs along columns
    sigma: float
    amplitude: float = 1.0
    label: str = ""

    def __post_init__(self):
        cx, cy = (float(c) for c in self.center)
        object.__setattr__(self, "center", (cx, cy))
        if not (0 <= cx <= 1 and 0 <= cy <= 1):
            raise InvariantError(f"blob {self.token}: center {self.center} outside [0, 1]^2")
        if not 0 < self.sigma <= 0.5:
            raise InvariantError(f"blob {self.token}: sigma {self.sigma} outside (0, 0.5]")
        if not 0 < self.amplitude <= 1:
            raise InvariantError(f"blob {self.token}: amplitude {self.amplitude} outside (0, 1]")


@dataclass(frozen=True)
class TargetRegion:
    region: Region
    omega: float = 1.0


@dataclass(frozen=True)
class Scene:
    objects: tuple
    background_token: int = 0
    layers: tuple = ((64, 64), (32, 32), (16, 16))
    steps: int = 50
    sharpen: float = 1.0
    noise_amp: float = 0.02
    seed: int = 42
    targets: tuple = ()

    def __post_init__(self):
        objs = tuple(sorted(self.objects, key=lambda o: o.token))
        object.__setattr__(self, "objects", objs)
        object.__setattr__(self, "layers", tuple((int(h), int(w)) for h, w in self.layers))
        object.__setattr__(self, "targets", tuple(self.targets))
        tokens = [o.token for o in objs]
        if not objs:
            raise InvariantError("scene needs at least one object")
        if len(set(tokens)) != len(tokens):
            raise InvariantError(f"object tokens must be distinct, got {tokens}")
        if min(tokens) < 0 or self.background_token < 0:
            raise InvariantError("tokens must be non-negative")
        if self.background_token in tokens:
            raise InvariantError(f"background token {self.background_token} is also an object token")
        if not self.layers:
            raise InvariantError("scene needs at least one layer")
        if any(h < 2 or w < 2 for h, w in self.layers):
            raise InvariantError("layer resolutions must be at least 2x2")
        if self.steps < 1:
            raise InvariantError("steps must be >= 1")
        if self.sharpen < 0 or self.noise_amp < 0:
            raise InvariantError("sharpen and noise_amp must be >= 0")

    @property
    def token_count(self) -> int:
        return max([o.token for o in self.objects] + [self.background_token]) + 1

    @property
    def object_tokens(self) -> list:
        return [o.token for o in self.objects]


class NoiseSource:
    """Keyed uniform noise fields, reproducible across platforms."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def generator(self, t: int, layer: int, token: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(t), int(layer), int(token)))
        return np.random.Generator(np.random.PCG64(ss))

    def field(self, t: int, layer: int, token: int, shape) -> np.ndarray:
        return self.generator(t, layer, token).random(shape)


def _gaussian(center, sigma, amplitude, H, W):
    cr = center[1] * H - 0.5
    cc = center[0] * W - 0.5
    s = sigma * min(H, W)
    rr = (np.arange(H) - cr) ** 2
    cc2 = (np.arange(W) - cc) ** 2
    return amplitude * np.exp(-(rr[:, None] + cc2[None, :]) / (2.0 * s * s))


def render_blob(obj: BlobObject, H: int, W: int, noise_level: float = 0.0, rng=None) -> AttentionMap:
    """Rasterize a blob; ``rng`` supplies the uniform noise when ``noise_level > 0``."""
    if noise_level < 0:
        raise InvariantError("noise_level must be >= 0")
    v = _gaussian(obj.center, obj.sigma, obj.amplitude, H, W)
    if noise_level > 0:
        if rng is None:
            raise InvariantError("noise requested without a generator")
        v = v + noise_level * rng.random((H, W))
    return AttentionMap(np.maximum(v, 0.0), token=obj.token)


def _time_sigma(scene: Scene, sigma: float, t: int) -> float:
    return sigma * (1.0 + scene.sharpen * t / scene.steps)


def render_stack(objects: Sequence[BlobObject], scene: Scene, t: int, noise: NoiseSource) -> AttentionStack:
    noise_t = scene.noise_amp * t / scene.steps
    K = scene.token_count
    by_token = {o.token: o for o in objects}
    maps = []
    for l, (H, W) in enumerate(scene.layers):
        row = []
        for k in range(K):
            if k == scene.background_token:
                m = AttentionMap(np.full((H, W), 1.0 / (H * W)), token=k, layer=l)
            elif k in by_token:
                o = by_token[k]
                # widened sigma may pass 0.5; render without the declared-object check
                v = _gaussian(o.center, _time_sigma(scene, o.sigma, t), o.amplitude, H, W)
                if noise_t > 0:
                    v = v + noise_t * noise.field(t, l, k, (H, W))
                m = AttentionMap(np.maximum(v, 0.0), token=k, layer=l)
            else:
                m = AttentionMap(np.zeros((H, W)), token=k, layer=l)
            row.append(m)
        maps.append(tuple(row))
    return AttentionStack(scene.layers, tuple(maps))


def step_unguided(scene: Scene, t: int, noise: NoiseSource) -> AttentionStack:
    if not 0 <= t < scene.steps:
        raise InvariantError(f"timestep {t} outside 0..{scene.steps - 1}")
    return render_stack(scene.objects, scene, t, noise)


@dataclass
class StepResult:
    objects: tuple
    raw: AttentionStack
    edited: AttentionStack
    plan: EditPlan
    conflicts: ConflictSet
    displacements: dict  # (layer, token) -> Vec2 in that layer's grid units
    loss: tuple


def _targets_for(regions: Sequence[TargetRegion], H: int, W: int) -> list:
    return [TargetSpec(region_centroid(rasterize_region(r.region, H, W)), r.omega) for r in regions]


def step_guided(
    objects: Sequence[BlobObject],
    scene: Scene,
    region,
    params: GuidanceParams,
    t: int,
    noise: NoiseSource,
    ori: Optional[AttentionStack] = None,
    force_source: str = "result",
) -> StepResult:
    """One guided denoising step.

    ``region`` is a Region or a list of :class:`TargetRegion`; the first entry's
    weight defaults to ``params.omega[0]``.
    """
    regions = _as_targets(region, params)
    all_regions = [r.region for r in regions]
    if ori is None:
        ori = step_unguided(scene, t, noise)
    raw = render_stack(objects, scene, t, noise)
    conflicts = detect_all(raw, all_regions, params, [o.token for o in objects])

    edits = {}
    warped = {}
    disps = {}
    for l, k in conflicts:
        H, W = scene.layers[l]
        src = ori if force_source == "original" else raw
        v = centroid(src.map(l, k))
        d = displacement(v, _targets_for(regions, H, W), H, W, params)
        try:
            out, tr = warp_step_with_transform(raw.map(l, k), d, params)
        except WarpFailure as exc:
            raise WarpFailure(f"timestep {t}, layer {l}, token {k}: {exc}") from exc
        edits[(l, k)] = tr
        warped[(l, k)] = out
        disps[(l, k)] = d

    plan = EditPlan(edits, frozenset(edits), params.lambda_sec, tuple(all_regions))
    edited = apply_plan(raw, plan)
    loss = guidance_loss(ori, edited, plan, params.gamma)
    new_objects = _update_objects(objects, raw, warped, edits, scene)
    return StepResult(new_objects, raw, edited, plan, conflicts, disps, loss)


def _as_targets(region, params: GuidanceParams) -> list:
    if isinstance(region, Region):
        return [TargetRegion(region, params.omega[0])]
    out = []
    for r in region:
        out.append(r if isinstance(r, TargetRegion) else TargetRegion(r, params.omega[0]))
    if not out:
        raise InvariantError("at least one target region is required")
    return out


def _update_objects(objects, raw, warped, edits, scene: Scene) -> tuple:
    out = []
    for o in objects:
        layers = sorted(l for (l, k) in warped if k == o.token)
        if not layers:
            out.append(o)
            continue
        dx = dy = wsum = 0.0
        log_scale = 0.0
        n_scaled = 0
        for l in layers:
            H, W = scene.layers[l]
            before = centroid(raw.map(l, o.token))
            after = centroid(warped[(l, o.token)])
            w = float(H * W)
            dy += w * (after.row - before.row) / H
            dx += w * (after.col - before.col) / W
            wsum += w
            sx, sy = edits[(l, o.token)].scale
            if (sx, sy) != (1.0, 1.0):
                log_scale += 0.5 * math.log(sx * sy)
                n_scaled += 1
        cx = min(1.0, max(0.0, o.center[0] + dx / wsum))
        cy = min(1.0, max(0.0, o.center[1] + dy / wsum))
        sigma = o.sigma
        if n_scaled:
            sigma = max(o.sigma * math.exp(log_scale / n_scaled), 1e-6)
        out.append(replace(o, center=(cx, cy), sigma=sigma))
    return tuple(out)


@dataclass
class StepRecord:
    step: int
    t: int
    conflicts: list  # flagged (layer, token) pairs
    displacement_norms: dict  # token -> max displacement norm over layers
    loss_total: float
    loss_main: float
    loss_norm: float
    mean_attn_in_R: dict  # token -> layer-0 mean inside R, before editing
    centers: dict  # token -> normalized (x, y) after the step

    @property
    def max_displacement(self) -> float:
        return max(self.displacement_norms.values(), default=0.0)

    def as_dict(self) -> dict:
        return {
            "step": self.step,
            "t": self.t,
            "conflicts": [list(p) for p in self.conflicts],
            "displacement_norms": {str(k): v for k, v in sorted(self.displacement_norms.items())},
            "loss_total": self.loss_total,
            "loss_main": self.loss_main,
            "loss_norm": self.loss_norm,
            "mean_attn_in_R": {str(k): v for k, v in sorted(self.mean_attn_in_R.items())},
            "centers": {str(k): list(v) for k, v in sorted(self.centers.items())},
        }


@dataclass
class GuidanceReport:
    per_step: list
    final_ori: AttentionStack
    final_res: AttentionStack
    final_raw: AttentionStack  # guided render at the last step, before editing
    trajectories: dict  # "guided"/"unguided" -> token -> layer-0 (row, col) centroid per step, before editing
    metrics: dict  # "unguided" / "guided" -> MetricsReport
    flagged_tokens: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "per_step": [r.as_dict() for r in self.per_step],
            "trajectories": {
                name: {str(k): [list(c) for c in v] for k, v in sorted(paths.items())}
                for name, paths in sorted(self.trajectories.items())
            },
            "metrics": {name: m.as_dict() for name, m in sorted(self.metrics.items())},
            "flagged_tokens": sorted(self.flagged_tokens),
        }


def run(
    scene: Scene,
    region: Region,
    params: GuidanceParams = GuidanceParams(),
    semantic_score: float = 1.0,
    sal_threshold: float = 0.5,
    force_source: str = "result",
    on_step: Optional[Callable] = None,
) -> GuidanceReport:
    """Run unguided and guided trajectories over every timestep.

    ``on_step(step, t, ori_stack, res_stack)`` is called after each step.
    Extra scene targets join ``region`` as additional repulsion sources.
    """
    if force_source not in ("result", "original"):
        raise InvariantError(f"force_source must be 'result' or 'original', got {force_source!r}")
    noise = NoiseSource(scene.seed)
    targets = [TargetRegion(region, params.omega[0])] + list(scene.targets)
    objects = scene.objects
    records = []
    flagged = set()
    trajectories = {name: {o.token: [] for o in objects} for name in ("guided", "unguided")}
    ori = res = raw = None
    for step in range(scene.steps):
        t = scene.steps - 1 - step
        ori = step_unguided(scene, t, noise)
        sr = step_guided(objects, scene, targets, params, t, noise, ori=ori, force_source=force_source)
        objects = sr.objects
        raw, res = sr.raw, sr.edited
        flagged |= sr.conflicts.tokens()

        H0, W0 = scene.layers[0]
        mask0 = region_mask([r.region for r in targets], H0, W0)
        norms = {}
        for (l, k), d in sr.displacements.items():
            norms[k] = max(norms.get(k, 0.0), d.norm())
        records.append(
            StepRecord(
                step=step,
                t=t,
                conflicts=list(sr.conflicts.entries),
                displacement_norms=norms,
                loss_total=sr.loss[0],
                loss_main=sr.loss[1],
                loss_norm=sr.loss[2],
                mean_attn_in_R={o.token: mean_in_region(raw.map(0, o.token), mask0) for o in objects},
                centers={o.token: o.center for o in objects},
            )
        )
        for o in objects:
            for name, stack in (("guided", raw), ("unguided", ori)):
                c = centroid(stack.map(0, o.token))
                trajectories[name][o.token].append((c.row, c.col))
        if on_step is not None:
            on_step(step, t, ori, res)
        log.debug("step %d (t=%d): %d conflicts, loss %.4g", step, t, len(sr.conflicts), sr.loss[0])

    metrics = {}
    for name, stack in (("unguided", ori), ("guided", res)):
        fieldmap = composite_field(stack, scene.object_tokens)
        mask = region_mask([r.region for r in targets], *fieldmap.shape)
        metrics[name] = evaluate(fieldmap, mask, semantic_score, sal_threshold)
    return GuidanceReport(records, ori, res, raw, trajectories, metrics, sorted(flagged))


def standard_scene(**overrides) -> Scene:
    """Three-blob fixture: a sun inside the golden region, a tree and a bird clear of it."""
    kw = dict(
        objects=(
            BlobObject(1, (0.78, 0.45), 0.09, 1.0, "sun"),
            BlobObject(2, (0.25, 0.6), 0.12, 1.0, "tree"),
            BlobObject(3, (0.5, 0.15), 0.06, 1.0, "bird"),
        ),
        background_token=0,
        layers=((64, 64), (32, 32), (16, 16)),
        steps=50,
        sharpen=1.0,
        noise_amp=0.02,
        seed=42,
    )
    kw.update(overrides)
    return Scene(**kw)
