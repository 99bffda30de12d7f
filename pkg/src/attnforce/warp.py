"""
Translation and boundary-preserving affine warps of attention maps.

All resampling is inverse-mapped bilinear interpolation; samples that fall
outside the source grid read as zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AttentionMap, BoundingBox, GuidanceParams, Vec2, as_map, bounding_box
from .errors import DegenerateBox, InvariantError, SingularTransform, WarpFailure, ZeroMass

__all__ = [
    "AffineTransform",
    "translate_map",
    "compute_scale",
    "build_transform",
    "apply_affine",
    "plan_warp",
    "warp_step",
]


@dataclass(frozen=True)
class AffineTransform:
    """Axis-aligned scale about ``origin`` composed with a shift.

    A point ``p`` maps to ``scale * (p + shift - origin) + origin``. ``scale``
    and ``shift`` are (row, col) pairs; the row scale is ``S_x``.
    """

    scale: tuple = (1.0, 1.0)
    shift: Vec2 = Vec2(0.0, 0.0)
    origin: Vec2 = Vec2(0.0, 0.0)

    def __post_init__(self):
        sx, sy = (float(s) for s in self.scale)
        if not (0 < sx <= 1 and 0 < sy <= 1):
            if sx == 0 or sy == 0:
                raise SingularTransform(f"zero scale {self.scale}")
            raise InvariantError(f"scale factors must lie in (0, 1], got {self.scale}")
        object.__setattr__(self, "scale", (sx, sy))

    @classmethod
    def translation(cls, d: Vec2) -> "AffineTransform":
        return cls((1.0, 1.0), d, Vec2(0.0, 0.0))

    @property
    def is_translation(self) -> bool:
        return self.scale == (1.0, 1.0)

    @property
    def matrix(self) -> np.ndarray:
        """The raw homogeneous matrix with translation entries ``shift - origin``."""
        sx, sy = self.scale
        return np.array(
            [
                [sx, 0.0, self.shift.row - self.origin.row],
                [0.0, sy, self.shift.col - self.origin.col],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def action_matrix(self) -> np.ndarray:
        """Homogeneous matrix of the full point map, including the origin restore."""
        sx, sy = self.scale
        o, d = self.origin, self.shift
        return np.array(
            [
                [sx, 0.0, sx * (d.row - o.row) + o.row],
                [0.0, sy, sy * (d.col - o.col) + o.col],
                [0.0, 0.0, 1.0],
            ]
        )

    def apply(self, p: Vec2) -> Vec2:
        sx, sy = self.scale
        o, d = self.origin, self.shift
        return Vec2(sx * (p.row + d.row - o.row) + o.row, sy * (p.col + d.col - o.col) + o.col)

    def apply_box(self, box: BoundingBox) -> BoundingBox:
        ul = self.apply(Vec2(box.x, box.y))
        lr = self.apply(Vec2(box.a, box.b))
        return BoundingBox(ul.row, ul.col, lr.row, lr.col)


def _sample(values: np.ndarray, src_r: np.ndarray, src_c: np.ndarray) -> np.ndarray:
    H, W = values.shape
    r0 = np.floor(src_r)
    c0 = np.floor(src_c)
    fr = src_r - r0
    fc = src_c - c0
    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)

    def tap(r, c):
        ok = (r >= 0) & (r < H) & (c >= 0) & (c < W)
        return np.where(ok, values[np.clip(r, 0, H - 1), np.clip(c, 0, W - 1)], 0.0)

    out = (
        (1 - fr) * (1 - fc) * tap(r0, c0)
        + (1 - fr) * fc * tap(r0, c0 + 1)
        + fr * (1 - fc) * tap(r0 + 1, c0)
        + fr * fc * tap(r0 + 1, c0 + 1)
    )
    return np.maximum(out, 0.0)


def _grid(H: int, W: int):
    rr, cc = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing="ij")
    return rr, cc


def translate_map(m, d: Vec2) -> AttentionMap:
    """Shift the whole map by ``d``; mass pushed off the grid is discarded."""
    m = as_map(m)
    if d.row == 0 and d.col == 0:
        return m.with_values(m.values.copy())
    rr, cc = _grid(m.height, m.width)
    return m.with_values(_sample(m.values, rr - d.row, cc - d.col))


def compute_scale(bbox_moved: BoundingBox, H: int, W: int) -> tuple[float, float]:
    """Scale factors (S_x, S_y) = (min(1, (H-1)/a'), min(1, (W-1)/b'))."""
    a, b = bbox_moved.a, bbox_moved.b
    if not (a > 0 and b > 0):
        raise DegenerateBox(f"moved box needs positive lower-right corner, got ({a}, {b})")
    return (min(1.0, (H - 1) / a), min(1.0, (W - 1) / b))


def build_transform(d: Vec2, scale, o_new: Vec2) -> AffineTransform:
    return AffineTransform(tuple(scale), d, o_new)


def apply_affine(m, t: AffineTransform) -> AttentionMap:
    m = as_map(m)
    sx, sy = t.scale
    if sx <= 0 or sy <= 0:
        raise SingularTransform(f"cannot invert scale {t.scale}")
    rr, cc = _grid(m.height, m.width)
    o, d = t.origin, t.shift
    src_r = (rr - o.row) / sx - d.row + o.row
    src_c = (cc - o.col) / sy - d.col + o.col
    return m.with_values(_sample(m.values, src_r, src_c))


def _inside(p: Vec2, H: int, W: int) -> bool:
    return 0 <= p.row <= H - 1 and 0 <= p.col <= W - 1


def _axis_frame(lo: float, hi: float, anchor: float, size: int) -> tuple[float, float]:
    # extent of the box seen from the anchor, and room to the canvas border on that side
    if anchor == lo:
        return hi - lo, size - 1 - lo
    return hi - lo, hi


def _canvas_anchor(lo: float, hi: float, size: int) -> tuple[float, float, float]:
    # anchor on the border opposite the overflow so the far edge lands on the other border
    if hi > size - 1:
        return 0.0, hi, size - 1
    if lo < 0:
        return size - 1.0, size - 1 - lo, size - 1
    return lo, hi - lo, size - 1 - lo


def plan_warp(m, d: Vec2, params: GuidanceParams) -> AffineTransform:
    """Choose the transform that moves ``m`` by ``d`` and keeps its box on canvas."""
    m = as_map(m)
    H, W = m.shape
    box = bounding_box(m, params.bbox_mass).shifted(d)
    if box.within(H, W):
        return AffineTransform.translation(d)

    o_new = None
    for corner in box.corners():
        if not _inside(corner, H, W):
            continue
        ext_r, room_r = _axis_frame(box.x, box.a, corner.row, H)
        ext_c, room_c = _axis_frame(box.y, box.b, corner.col, W)
        if (ext_r > room_r and room_r <= 0) or (ext_c > room_c and room_c <= 0):
            continue
        o_new = corner
        break
    if o_new is None:
        # no usable box corner: anchor on the canvas instead
        o_r, ext_r, room_r = _canvas_anchor(box.x, box.a, H)
        o_c, ext_c, room_c = _canvas_anchor(box.y, box.b, W)
        o_new = Vec2(o_r, o_c)

    # the box as seen from o_new, against the canvas as seen from o_new
    framed = BoundingBox(0.0, 0.0, max(ext_r, 1e-12), max(ext_c, 1e-12))
    scale = compute_scale(framed, room_r + 1, room_c + 1)
    scale = (scale[0] if ext_r > room_r else 1.0, scale[1] if ext_c > room_c else 1.0)
    t = build_transform(d, scale, o_new)
    moved = t.apply_box(bounding_box(m, params.bbox_mass))
    if not moved.within(H, W, tol=1e-9):
        raise WarpFailure(f"transformed box {moved} leaves the {H}x{W} canvas")
    return t


def warp_step(m, d: Vec2, params: GuidanceParams) -> AttentionMap:
    """Move ``m`` by ``d``, shrinking it about an in-canvas anchor when it would overflow."""
    out, _ = warp_step_with_transform(m, d, params)
    return out


def warp_step_with_transform(m, d: Vec2, params: GuidanceParams):
    m = as_map(m)
    if not (math.isfinite(d.row) and math.isfinite(d.col)):
        raise WarpFailure(f"non-finite displacement {d}")
    t = plan_warp(m, d, params)
    out = translate_map(m, d) if t.is_translation else apply_affine(m, t)
    try:
        box = bounding_box(out, params.bbox_mass)
    except ZeroMass as exc:
        raise WarpFailure("warp discarded the entire map") from exc
    if not box.within(*out.shape):
        raise WarpFailure(f"warped box {box} leaves the canvas")
    return out, t
