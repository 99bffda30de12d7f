"""
The combined text-placement score on reference numbers.

VTCM = score * (1/IOU + 1/TV): semantic alignment is rewarded, while both
saliency overlap and roughness inside the text box are penalised.
"""
from attnforce import vtcm

rows = {
    "P2P template A": (28.26, 29.89, 14.11),
    "P2P template B": (25.73, 52.64, 18.02),
    "P2P template C": (27.94, 54.34, 22.55),
    "P2P template D": (17.67, 21.30, 9.10),
    "P2P template E": (27.96, 28.37, 13.29),
}
print(f"{'row':<16} {'score':>6} {'IOU':>6} {'TV':>6} {'VTCM':>7}")
for name, (s, iou, tv) in rows.items():
    print(f"{name:<16} {s:6.2f} {iou:6.2f} {tv:6.2f} {vtcm(s, iou, tv):7.3f}")

# Halving the overlap at fixed score and TV raises the score noticeably.
s, iou, tv = rows["P2P template A"]
print(f"\nhalving IOU on row A: {vtcm(s, iou, tv):.3f} -> {vtcm(s, iou / 2, tv):.3f}")
