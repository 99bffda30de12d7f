"""
Which tokens collide with the reserved box, and how exclusion zeroes them.

Renders the first (noisiest) step of the three-object fixture, lists the
token maps whose mean inside the golden region exceeds theta, then applies
the spatial exclusion constraint to the flagged ones.
"""
from attnforce import GuidanceParams, detect_all, mean_in_region, rasterize_region
from attnforce.constraint import spatial_excluding_constraint
from attnforce.simulate import GOLDEN, NoiseSource, standard_scene, step_unguided

scene = standard_scene()
params = GuidanceParams()
stack = step_unguided(scene, scene.steps - 1, NoiseSource(scene.seed))

print("mean attention inside the region, per layer and token:")
for l, (H, W) in enumerate(scene.layers):
    mask = rasterize_region(GOLDEN, H, W)
    row = "  ".join(f"{o.label}={mean_in_region(stack.map(l, o.token), mask):.3f}" for o in scene.objects)
    print(f"  {H}x{W}: {row}")

conflicts = detect_all(stack, GOLDEN, params, scene.object_tokens)
print(f"\nflagged at theta={params.theta}: {list(conflicts.entries)}")

for l, k in conflicts.entries:
    H, W = scene.layers[l]
    mask = rasterize_region(GOLDEN, H, W)
    m = stack.map(l, k)
    out = spatial_excluding_constraint(m, mask, params.lambda_sec)
    print(f"  layer {l} token {k}: max inside {m.values[mask].max():.3f} -> {out.values[mask].max():.1f}, "
          f"outside mass kept {out.values[~mask].sum() / m.values[~mask].sum():.2f}")
