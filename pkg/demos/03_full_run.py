"""
A complete paired run on the three-object fixture.

Both trajectories share noise, so the only difference is the guidance. The
sun starts inside the golden region and gets pushed out within a few steps;
the tree and bird are never touched.
"""
from pathlib import Path

from attnforce import GuidanceParams, run
from attnforce.io import load_scene
from attnforce.simulate import GOLDEN

scene = load_scene(Path(__file__).with_name("std3.json"))
report = run(scene, GOLDEN, GuidanceParams())

print("step  conflicts  max|d|    loss      sun mean in R")
for rec in report.per_step[:8]:
    print(f"{rec.step:4d}  {len(rec.conflicts):9d}  {rec.max_displacement:6.2f}  {rec.loss_total:8.4f}  "
          f"{rec.mean_attn_in_R[1]:.3f}")
print("  ...")
last = report.per_step[-1]
print(f"{last.step:4d}  {len(last.conflicts):9d}  {last.max_displacement:6.2f}  {last.loss_total:8.4f}  "
      f"{last.mean_attn_in_R[1]:.3f}")

print(f"\ntokens ever flagged: {report.flagged_tokens}")
sun = report.trajectories["guided"][1]
print(f"sun centroid (row, col): start {sun[0][0]:.1f},{sun[0][1]:.1f} -> end {sun[-1][0]:.1f},{sun[-1][1]:.1f}")

for name in ("unguided", "guided"):
    m = report.metrics[name]
    print(f"{name:>9}: saliency IOU {m.saliency_iou:6.2f}%  TV in R {m.tv_loss_in_R:6.3f}")
