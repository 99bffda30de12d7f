"""Layer-wise conflict detection between token attention and the text region."""
from __future__ import annotations

from dataclasses import dataclass, field

from .core import AttentionStack, GuidanceParams, Region, mean_in_region, rasterize_region
from .errors import InvariantError

__all__ = ["ConflictSet", "detect", "detect_all"]


@dataclass(frozen=True)
class ConflictSet:
    """Flagged ``(layer, token)`` pairs with the overlap mean that triggered each.

    ``entries`` is ordered by ascending layer, then token.
    """

    entries: tuple = ()
    per_entry_mean: dict = field(default_factory=dict)
    theta: float = 0.0

    def __post_init__(self):
        for e in self.entries:
            if not self.per_entry_mean[e] > self.theta:
                raise InvariantError(f"entry {e} does not exceed theta={self.theta}")

    def __len__(self):
        return len(self.entries)

    def __contains__(self, item):
        return tuple(item) in self.per_entry_mean

    def __iter__(self):
        return iter(self.entries)

    def tokens(self) -> set:
        return {k for _, k in self.entries}

    def at_layer(self, layer: int) -> list:
        return [k for l, k in self.entries if l == layer]


def detect(m, mask, theta: float) -> bool:
    """True when the mean attention inside ``mask`` strictly exceeds ``theta``."""
    if not theta > 0:
        raise InvariantError("theta must be positive")
    return mean_in_region(m, mask) > theta


def detect_all(stack: AttentionStack, region, params: GuidanceParams, editable_tokens) -> ConflictSet:
    """Run the detector on every editable token at every layer.

    ``region`` may be a :class:`Region` or a sequence of regions; with several
    regions the union of their masks is tested.
    """
    editable = sorted(set(int(k) for k in editable_tokens))
    for k in editable:
        if not 0 <= k < stack.token_count:
            raise InvariantError(f"editable token {k} outside 0..{stack.token_count - 1}")
    entries = []
    means = {}
    for l, (H, W) in enumerate(stack.resolutions):
        mask = region_mask(region, H, W)
        for k in editable:
            mean = mean_in_region(stack.map(l, k), mask)
            if mean > params.theta:
                entries.append((l, k))
                means[(l, k)] = mean
    return ConflictSet(tuple(entries), means, params.theta)


def region_mask(region, H: int, W: int):
    if isinstance(region, Region):
        return rasterize_region(region, H, W)
    mask = None
    for r in region:
        m = rasterize_region(r, H, W)
        mask = m if mask is None else (mask | m)
    if mask is None:
        raise InvariantError("at least one region is required")
    return mask
