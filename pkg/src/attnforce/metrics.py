"""Region-level quality metrics: total variation, saliency overlap and VTCM."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .core import AttentionMap, AttentionStack, as_map
from .errors import DivisionDomain, EmptyMask, InvariantError, ShapeMismatch, ZeroMass

__all__ = ["MetricsReport", "composite_field", "tv_loss", "saliency_iou", "vtcm", "evaluate"]


@dataclass(frozen=True)
class MetricsReport:
    tv_loss_in_R: float
    saliency_iou: float
    semantic_score: float = 1.0
    vtcm: Optional[float] = None  # undefined when either denominator is 0

    def as_dict(self) -> dict:
        return asdict(self)


def composite_field(stack: AttentionStack, object_tokens=None, exclude=(0,)) -> AttentionMap:
    """Peak-normalized per-pixel max over object tokens at the finest layer.

    By default every token except ``exclude`` (the background) is an object.
    """
    l = max(range(stack.n_layers), key=lambda i: stack.resolutions[i][0] * stack.resolutions[i][1])
    if object_tokens is None:
        object_tokens = [k for k in range(stack.token_count) if k not in set(exclude)]
    if not object_tokens:
        raise InvariantError("no object tokens to composite")
    field = np.max([stack.map(l, k).values for k in object_tokens], axis=0)
    peak = field.max()
    if peak <= 0:
        raise ZeroMass("all object maps are zero")
    return AttentionMap(field / peak, token=-1, layer=l)


def _mask_for(field: np.ndarray, mask) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != field.shape:
        raise ShapeMismatch(f"mask shape {mask.shape} does not match field shape {field.shape}")
    mask = mask.astype(bool)
    if not mask.any():
        raise EmptyMask("metric mask has no set pixels")
    return mask


def tv_loss(field, mask) -> float:
    """Mean absolute neighbor difference inside the mask, as a percentage."""
    f = as_map(field).values
    mask = _mask_for(f, mask)
    vert = mask[1:, :] & mask[:-1, :]
    horiz = mask[:, 1:] & mask[:, :-1]
    n_pairs = int(vert.sum() + horiz.sum())
    if n_pairs == 0:
        return 0.0
    total = np.abs(np.diff(f, axis=0))[vert].sum() + np.abs(np.diff(f, axis=1))[horiz].sum()
    return float(100.0 * total / n_pairs)


def saliency_iou(field, mask, sal_threshold: float = 0.5) -> float:
    """IOU (percent) between the above-threshold pixels and the region mask."""
    if not 0 < sal_threshold < 1:
        raise InvariantError("sal_threshold must lie in (0, 1)")
    f = as_map(field).values
    mask = _mask_for(f, mask)
    salient = f >= sal_threshold
    if not salient.any():
        return 0.0
    inter = np.count_nonzero(salient & mask)
    union = np.count_nonzero(salient | mask)
    return float(100.0 * inter / union)


def vtcm(semantic_score: float, saliency_iou: float, tv: float) -> float:
    if not (saliency_iou > 0 and tv > 0):
        raise DivisionDomain(f"VTCM needs positive IOU and TV, got {saliency_iou}, {tv}")
    return semantic_score * (1.0 / saliency_iou + 1.0 / tv)


def evaluate(field, mask, semantic_score: float = 1.0, sal_threshold: float = 0.5) -> MetricsReport:
    tv = tv_loss(field, mask)
    iou = saliency_iou(field, mask, sal_threshold)
    score = vtcm(semantic_score, iou, tv) if (iou > 0 and tv > 0) else None
    if score is not None and not math.isfinite(score):
        score = None
    return MetricsReport(tv, iou, semantic_score, score)
