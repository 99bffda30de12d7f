"""
Force model acting on attention centroids.

Forces are dimensionless; :func:`displacement` converts them to grid units
through ``max_step`` times the grid diagonal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import GuidanceParams, Vec2
from .errors import InvariantError

__all__ = [
    "Force",
    "TargetSpec",
    "repulsive_force",
    "multi_target_force",
    "balance",
    "margin_force",
    "displacement",
    "step_scale",
]

_FALLBACK_DIRECTION = Vec2(-1.0, 0.0)


@dataclass(frozen=True)
class Force:
    vector: Vec2
    magnitude: float

    @classmethod
    def of(cls, vector: Vec2) -> "Force":
        return cls(vector, vector.norm())

    @classmethod
    def zero(cls) -> "Force":
        return cls(Vec2(0.0, 0.0), 0.0)


@dataclass(frozen=True)
class TargetSpec:
    position: Vec2
    weight: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise InvariantError(f"target weight must be finite and >= 0, got {self.weight}")


def repulsive_force(v: Vec2, target: Vec2, xi: float, eps_dist: float) -> Force:
    """Push ``v`` away from ``target`` with magnitude xi^2 / distance."""
    if not xi > 0:
        raise InvariantError("xi must be positive")
    delta = v - target
    dist = delta.norm()
    mag = xi * xi / max(dist, eps_dist)
    direction = delta * (1.0 / dist) if dist > 0 else _FALLBACK_DIRECTION
    return Force(direction * mag, mag)


def multi_target_force(v: Vec2, targets: Sequence[TargetSpec], xi: float, eps_dist: float) -> Force:
    if not targets:
        raise InvariantError("at least one target is required")
    row = col = 0.0
    for t in targets:
        f = repulsive_force(v, t.position, xi, eps_dist).vector
        row += t.weight * f.row
        col += t.weight * f.col
    return Force.of(Vec2(row, col))


def balance(f: Force, alpha: float) -> Force:
    """Saturate the magnitude to |f| / (alpha + |f|), keeping the direction."""
    if not alpha > 0:
        raise InvariantError("alpha must be positive")
    mag = f.vector.norm()
    if mag == 0:
        return Force.zero()
    new_mag = mag / (alpha + mag)
    return Force(f.vector * (new_mag / mag), new_mag)


def margin_force(v: Vec2, H: int, W: int, m: float, eps_dist: float) -> Force:
    """Inward push from all four borders of the [0, H-1] x [0, W-1] canvas."""
    if m < 0:
        raise InvariantError("margin strength must be >= 0")
    if m == 0:
        return Force.zero()

    def push(d):
        return m / max(d, eps_dist) ** 2

    top, bottom = push(v.row), push(H - 1 - v.row)
    left, right = push(v.col), push(W - 1 - v.col)
    return Force.of(Vec2(top - bottom, left - right))


def step_scale(H: int, W: int, max_step: float) -> float:
    return max_step * math.hypot(H, W)


def displacement(v: Vec2, targets: Sequence[TargetSpec], H: int, W: int, params: GuidanceParams) -> Vec2:
    """Per-step move of a centroid: balanced repulsion plus margin force, clamped."""
    scale = step_scale(H, W, params.max_step)
    rep = balance(multi_target_force(v, targets, params.xi, params.eps_dist), params.alpha)
    marg = margin_force(v, H, W, params.margin_m, params.eps_dist)
    d = rep.vector * scale + marg.vector
    n = d.norm()
    if n > scale:
        d = d * (scale / n)
    return d
