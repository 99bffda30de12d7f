"""Spatial exclusion of edited tokens from the text region, and the guidance loss."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import AttentionMap, AttentionStack, as_map
from .detect import region_mask
from .errors import InvariantError, LayoutMismatch, ShapeMismatch
from .warp import apply_affine, translate_map

__all__ = ["EditPlan", "spatial_excluding_constraint", "apply_plan", "guidance_loss"]


@dataclass(frozen=True)
class EditPlan:
    """Edits applied to one stack at one step.

    ``edits`` maps ``(layer, token)`` to the warp used; ``sec_applied`` lists the
    pairs that were additionally masked out of ``region``.
    """

    edits: dict = field(default_factory=dict)
    sec_applied: frozenset = frozenset()
    lambda_sec: float = 1.0
    region: object = None

    def __post_init__(self):
        object.__setattr__(self, "sec_applied", frozenset(self.sec_applied))
        if self.sec_applied and self.region is None:
            raise InvariantError("a region is required when SEC is applied")
        if not 0 <= self.lambda_sec <= 1:
            raise InvariantError("lambda_sec must lie in [0, 1]")

    def pairs(self) -> list:
        return sorted(set(self.edits) | set(self.sec_applied))

    def check_against(self, stack: AttentionStack):
        for l, k in self.pairs():
            if not (0 <= l < stack.n_layers and 0 <= k < stack.token_count):
                raise InvariantError(f"edit ({l}, {k}) outside the stack layout")


def spatial_excluding_constraint(m, mask, lambda_sec: float) -> AttentionMap:
    """lambda * A * (1 - mask): zero inside the region, scaled elsewhere."""
    m = as_map(m)
    mask = np.asarray(mask)
    if mask.shape != m.shape:
        raise ShapeMismatch(f"mask shape {mask.shape} does not match map shape {m.shape}")
    if not 0 <= lambda_sec <= 1:
        raise InvariantError("lambda_sec must lie in [0, 1]")
    return m.with_values(np.where(mask.astype(bool), 0.0, lambda_sec * m.values))


def edit_map(m: AttentionMap, layer: int, token: int, plan: EditPlan) -> AttentionMap:
    t = plan.edits.get((layer, token))
    if t is not None:
        m = translate_map(m, t.shift) if t.is_translation else apply_affine(m, t)
    if (layer, token) in plan.sec_applied:
        m = spatial_excluding_constraint(m, region_mask(plan.region, *m.shape), plan.lambda_sec)
    return m


def apply_plan(stack: AttentionStack, plan: EditPlan) -> AttentionStack:
    """Apply the plan's warps and exclusion constraint to ``stack``."""
    plan.check_against(stack)
    updates = {(l, k): edit_map(stack.map(l, k), l, k, plan) for l, k in plan.pairs()}
    return stack.replace_maps(updates)


def guidance_loss(ori: AttentionStack, res: AttentionStack, plan: EditPlan, gamma: float):
    """Return ``(total, main_term, norm_term)``.

    Edited pairs are compared against the plan applied to ``ori``; every other
    pair is compared against ``ori`` directly and weighted by ``gamma``.
    """
    if not ori.same_layout(res):
        raise LayoutMismatch(
            f"layouts differ: {ori.resolutions} x {ori.token_count} vs {res.resolutions} x {res.token_count}"
        )
    plan.check_against(ori)
    edited = set(plan.pairs())
    main = 0.0
    norm = 0.0
    for l in range(ori.n_layers):
        for k in range(ori.token_count):
            a = ori.map(l, k)
            b = res.map(l, k).values
            if (l, k) in edited:
                main += float(np.sum((edit_map(a, l, k, plan).values - b) ** 2))
            else:
                norm += float(np.sum((a.values - b) ** 2))
    return main + gamma * norm, main, norm
