"""
Value types for attention grids and the primitives every other module uses.

Coordinates are (row, col) with the origin at the top-left cell. Normalized
region coordinates map ``x`` to columns and ``y`` to rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import EmptyMask, InvariantError, ShapeMismatch, ZeroMass

__all__ = [
    "AttentionMap",
    "AttentionStack",
    "Region",
    "Vec2",
    "BoundingBox",
    "GuidanceParams",
    "as_map",
    "centroid",
    "rasterize_region",
    "region_centroid",
    "mean_in_region",
    "bounding_box",
]


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class AttentionMap:
    """One token's non-negative H x W attention grid at one layer."""

    values: np.ndarray
    token: int = 0
    layer: int = 0

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise ShapeMismatch(f"attention map must be 2-D, got shape {v.shape}")
        if v.shape[0] < 2 or v.shape[1] < 2:
            raise InvariantError(f"attention map must be at least 2x2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvariantError("attention map contains non-finite values")
        if np.any(v < 0):
            raise InvariantError("attention map contains negative values")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values) -> "AttentionMap":
        return replace(self, values=values)

    def __eq__(self, other):
        if not isinstance(other, AttentionMap):
            return NotImplemented
        return (
            self.token == other.token
            and self.layer == other.layer
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def as_map(m) -> AttentionMap:
    if isinstance(m, AttentionMap):
        return m
    return AttentionMap(np.asarray(m, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class AttentionStack:
    """Per-layer attention maps for every token.

    ``maps[l][k]`` is the map of token ``k`` at layer ``l``. Layer ids are the
    positional indices into ``resolutions``.
    """

    resolutions: tuple
    maps: tuple

    def __post_init__(self):
        res = tuple((int(h), int(w)) for h, w in self.resolutions)
        maps = tuple(tuple(layer) for layer in self.maps)
        if not res:
            raise InvariantError("stack needs at least one layer")
        if len(maps) != len(res):
            raise InvariantError("one map list per layer is required")
        counts = {len(layer) for layer in maps}
        if len(counts) != 1 or 0 in counts:
            raise InvariantError("every layer must hold the same non-zero token count")
        for l, ((h, w), layer) in enumerate(zip(res, maps)):
            if h <= 0 or w <= 0:
                raise InvariantError(f"layer {l} has non-positive resolution")
            for k, m in enumerate(layer):
                if m.shape != (h, w):
                    raise ShapeMismatch(f"map ({l}, {k}) has shape {m.shape}, expected {(h, w)}")
        object.__setattr__(self, "resolutions", res)
        object.__setattr__(self, "maps", maps)

    @classmethod
    def from_arrays(cls, arrays: Sequence[Sequence[np.ndarray]]) -> "AttentionStack":
        maps = []
        res = []
        for l, layer in enumerate(arrays):
            row = [AttentionMap(a, token=k, layer=l) for k, a in enumerate(layer)]
            res.append(row[0].shape)
            maps.append(row)
        return cls(tuple(res), tuple(maps))

    @property
    def n_layers(self) -> int:
        return len(self.resolutions)

    @property
    def token_count(self) -> int:
        return len(self.maps[0])

    def map(self, layer: int, token: int) -> AttentionMap:
        return self.maps[layer][token]

    def same_layout(self, other: "AttentionStack") -> bool:
        return self.resolutions == other.resolutions and self.token_count == other.token_count

    def replace_maps(self, updates: dict) -> "AttentionStack":
        """Return a new stack with ``{(layer, token): AttentionMap}`` swapped in."""
        maps = [list(layer) for layer in self.maps]
        for (l, k), m in updates.items():
            maps[l][k] = m
        return AttentionStack(self.resolutions, tuple(tuple(x) for x in maps))

    def averaged(self, token: int) -> AttentionMap:
        """Mean of the token's maps over layers, resampled to the finest layer."""
        l_fine = max(range(self.n_layers), key=lambda l: self.resolutions[l][0] * self.resolutions[l][1])
        H, W = self.resolutions[l_fine]
        acc = np.zeros((H, W))
        for l in range(self.n_layers):
            acc += _resize_bilinear(self.maps[l][token].values, H, W)
        return AttentionMap(acc / self.n_layers, token=token, layer=-1)

    def __eq__(self, other):
        if not isinstance(other, AttentionStack):
            return NotImplemented
        return self.resolutions == other.resolutions and self.maps == other.maps

    __hash__ = None


def _resize_bilinear(values: np.ndarray, H: int, W: int) -> np.ndarray:
    h, w = values.shape
    if (h, w) == (H, W):
        return values.copy()
    # align pixel centers between the two grids
    rs = np.clip((np.arange(H) + 0.5) * h / H - 0.5, 0, h - 1)
    cs = np.clip((np.arange(W) + 0.5) * w / W - 0.5, 0, w - 1)
    r0 = np.floor(rs).astype(int)
    c0 = np.floor(cs).astype(int)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rs - r0)[:, None]
    fc = (cs - c0)[None, :]
    top = values[np.ix_(r0, c0)] * (1 - fc) + values[np.ix_(r0, c1)] * fc
    bot = values[np.ix_(r1, c0)] * (1 - fc) + values[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


@dataclass(frozen=True)
class Region:
    """Axis-aligned normalized rectangle reserved for text."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in vals):
            raise InvariantError(f"region coordinates must be finite: {vals}")
        if not (0.0 <= self.x0 < self.x1 <= 1.0):
            raise InvariantError(f"region needs 0 <= x0 < x1 <= 1, got x0={self.x0}, x1={self.x1}")
        if not (0.0 <= self.y0 < self.y1 <= 1.0):
            raise InvariantError(f"region needs 0 <= y0 < y1 <= 1, got y0={self.y0}, y1={self.y1}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class Vec2:
    row: float
    col: float

    def __post_init__(self):
        if not (math.isfinite(self.row) and math.isfinite(self.col)):
            raise InvariantError(f"non-finite vector ({self.row}, {self.col})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.row + other.row, self.col + other.col)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.row - other.row, self.col - other.col)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.row * s, self.col * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.row, -self.col)

    def dot(self, other: "Vec2") -> float:
        return self.row * other.row + self.col * other.col

    def norm(self) -> float:
        return math.hypot(self.row, self.col)

    def as_array(self) -> np.ndarray:
        return np.array([self.row, self.col])


@dataclass(frozen=True)
class BoundingBox:
    """Box with upper-left corner ``(x, y)`` and lower-right ``(a, b)``, as (row, col)."""

    x: float
    y: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.x <= self.a and self.y <= self.b):
            raise InvariantError(f"inverted bounding box {self}")

    def shifted(self, d: Vec2) -> "BoundingBox":
        return BoundingBox(self.x + d.row, self.y + d.col, self.a + d.row, self.b + d.col)

    def corners(self) -> list[Vec2]:
        """Upper-left, upper-right, lower-left, lower-right."""
        return [Vec2(self.x, self.y), Vec2(self.x, self.b), Vec2(self.a, self.y), Vec2(self.a, self.b)]

    def within(self, H: int, W: int, tol: float = 0.0) -> bool:
        return (
            self.x >= -tol
            and self.y >= -tol
            and self.a <= H - 1 + tol
            and self.b <= W - 1 + tol
        )


@dataclass(frozen=True)
class GuidanceParams:
    """Every tunable of the guidance step.

    ``omega`` holds one weight per target, in target order; a single value is
    broadcast to all targets.
    """

    theta: float = 0.2
    xi: float = 1.0
    alpha: float = 0.1
    margin_m: float = 0.5
    omega: tuple = (1.0,)
    lambda_sec: float = 1.0
    gamma: float = 1.0
    max_step: float = 0.15
    bbox_mass: float = 0.3
    eps_dist: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        checks = [
            (self.theta > 0, "theta > 0"),
            (self.xi > 0, "xi > 0"),
            (self.alpha > 0, "alpha > 0"),
            (self.margin_m >= 0, "margin_m >= 0"),
            (0 <= self.lambda_sec <= 1, "lambda_sec in [0, 1]"),
            (self.gamma >= 0, "gamma >= 0"),
            (0 < self.max_step <= 1, "max_step in (0, 1]"),
            (0 < self.bbox_mass < 1, "bbox_mass in (0, 1)"),
            (self.eps_dist > 0, "eps_dist > 0"),
            (len(self.omega) > 0 and all(math.isfinite(w) and w >= 0 for w in self.omega), "omega finite and >= 0"),
        ]
        for ok, what in checks:
            if not ok:
                raise InvariantError(f"GuidanceParams violates {what}")

    def weights_for(self, n_targets: int) -> tuple:
        if len(self.omega) == n_targets:
            return self.omega
        if len(self.omega) == 1:
            return self.omega * n_targets
        raise InvariantError(f"{len(self.omega)} weights given for {n_targets} targets")


def centroid(m) -> Vec2:
    """Attention-weighted mean (row, col) position of the map."""
    v = as_map(m).values
    total = v.sum()
    if total <= 0:
        raise ZeroMass("centroid of an all-zero map")
    rows = np.arange(v.shape[0], dtype=np.float64)
    cols = np.arange(v.shape[1], dtype=np.float64)
    return Vec2(float(rows @ v.sum(axis=1) / total), float(cols @ v.sum(axis=0) / total))


def rasterize_region(region: Region, H: int, W: int) -> np.ndarray:
    """Boolean H x W mask of the pixels whose centers fall inside ``region``."""
    if H < 2 or W < 2:
        raise InvariantError(f"resolution must be at least 2x2, got {H}x{W}")
    rc = (np.arange(H) + 0.5) / H
    cc = (np.arange(W) + 0.5) / W
    rows = (rc >= region.y0) & (rc <= region.y1)
    cols = (cc >= region.x0) & (cc <= region.x1)
    mask = rows[:, None] & cols[None, :]
    if not mask.any():
        raise EmptyMask(f"region {region.as_tuple()} covers no pixel center at {H}x{W}")
    return mask


def region_centroid(mask: np.ndarray) -> Vec2:
    """Centroid of the set pixels of a mask, in grid units."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("empty mask has no centroid")
    r, c = np.nonzero(mask)
    return Vec2(float(r.mean()), float(c.mean()))


def _check_mask(m: AttentionMap, mask) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != m.shape:
        raise ShapeMismatch(f"mask shape {mask.shape} does not match map shape {m.shape}")
    mask = mask.astype(bool)
    if not mask.any():
        raise EmptyMask("mask has no set pixels")
    return mask


def mean_in_region(m, mask) -> float:
    m = as_map(m)
    mask = _check_mask(m, mask)
    return float(m.values[mask].sum() / mask.sum())


def bounding_box(m, bbox_mass: float) -> BoundingBox:
    """Tight box around the cells holding at least ``bbox_mass`` of the peak value."""
    v = as_map(m).values
    if not 0 < bbox_mass < 1:
        raise InvariantError("bbox_mass must lie in (0, 1)")
    peak = v.max()
    if peak <= 0:
        raise ZeroMass("bounding box of an all-zero map")
    hot = v >= bbox_mass * peak
    rows = np.flatnonzero(hot.any(axis=1))
    cols = np.flatnonzero(hot.any(axis=0))
    return BoundingBox(float(rows[0]), float(cols[0]), float(rows[-1]), float(cols[-1]))
