"""
Pushing a blob out of a reserved box.

A single Gaussian sits inside the golden region of a 64x64 grid. We compute
the repulsive displacement from the region centre, then warp the blob by
it and watch the mean attention inside the region fall.
"""
import numpy as np

from attnforce import GuidanceParams, Vec2, centroid, mean_in_region, rasterize_region, region_centroid
from attnforce.forces import TargetSpec, displacement, margin_force
from attnforce.simulate import GOLDEN
from attnforce.warp import plan_warp, warp_step

H = W = 64
params = GuidanceParams()
mask = rasterize_region(GOLDEN, H, W)
target = region_centroid(mask)
print(f"region covers {mask.sum()} cells, centre at ({target.row:.1f}, {target.col:.1f})")

rr, cc = np.mgrid[0:H, 0:W]
blob = np.exp(-((rr - 30.0) ** 2 + (cc - 47.0) ** 2) / (2 * 6.0**2))
c = centroid(blob)
print(f"blob centroid ({c.row:.2f}, {c.col:.2f}), mean in region {mean_in_region(blob, mask):.3f}")

# The border term alone is tiny away from the edges.
mf = margin_force(c, H, W, params.margin_m, params.eps_dist)
print(f"margin force at the centroid: ({mf.vector.row:.2e}, {mf.vector.col:.2e})")

# Repel, balance, add margin, clamp: one call.
d = displacement(c, [TargetSpec(target, 1.0)], H, W, params)
print(f"displacement ({d.row:.2f}, {d.col:.2f}), |d| = {d.norm():.2f} px")

t = plan_warp(blob, d, params)
print(f"transform: scale {t.scale}, pure translation: {t.is_translation}")

moved = blob
for i in range(4):
    c = centroid(moved)
    d = displacement(c, [TargetSpec(target, 1.0)], H, W, params)
    moved = warp_step(moved, d, params)
    print(f"  step {i}: centroid ({centroid(moved).row:.2f}, {centroid(moved).col:.2f}), "
          f"mean in region {mean_in_region(moved, mask):.3f}")
