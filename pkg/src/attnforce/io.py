"""
File formats: region specs, scene JSON, run reports, metrics CSV and PGM renders.

Reports are canonical JSON (sorted keys, floats at 9 significant digits) so
identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import Region, as_map
from .errors import InvariantError, ParseError
from .simulate import BlobObject, Scene, TargetRegion

__all__ = [
    "PRESETS",
    "parse_region",
    "write_render",
    "pgm_bytes",
    "read_pgm",
    "SceneError",
    "parse_scene",
    "load_scene",
    "scene_to_dict",
    "canonical",
    "dumps_canonical",
    "atomic_write",
    "METRICS_CSV_HEADER",
    "metrics_csv",
]

PRESETS = {
    "golden": Region(0.618, 0.30, 0.95, 0.70),
    "center": Region(0.35, 0.40, 0.65, 0.60),
}

METRICS_CSV_HEADER = [
    "step",
    "conflicts",
    "max_displacement",
    "loss_total",
    "loss_main",
    "loss_norm",
    "mean_attn_in_R",
]


def parse_region(spec: str) -> Region:
    """Parse ``"x0,y0,x1,y1"`` or a preset name (``golden``, ``center``)."""
    spec = spec.strip()
    if spec.lower() in PRESETS:
        return PRESETS[spec.lower()]
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 4:
        raise ParseError(f"region needs 4 comma-separated numbers or a preset name, got {spec!r}")
    vals = []
    for p in parts:
        try:
            vals.append(float(p))
        except ValueError:
            raise ParseError(f"bad region coordinate {p!r} in {spec!r}") from None
    return Region(*vals)


def atomic_write(path, data) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def pgm_bytes(m) -> bytes:
    v = as_map(m).values
    peak = v.max()
    if peak > 0:
        pix = np.floor(v / peak * 255.0 + 0.5)
    else:
        pix = np.zeros_like(v)
    pix = np.clip(pix, 0, 255).astype(np.uint8)
    H, W = pix.shape
    return f"P5\n{W} {H}\n255\n".encode("ascii") + pix.tobytes(order="C")


def write_render(m, path) -> None:
    """Binary 8-bit PGM, scaled so the map's maximum becomes 255."""
    atomic_write(path, pgm_bytes(m))


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM with maxval <= 255 into a uint8 array."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    if tokens[0] != b"P5":
        raise ParseError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        W, H, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError(f"{path}: malformed PGM header") from None
    if not 0 < maxval <= 255:
        raise ParseError(f"{path}: only 8-bit PGM is supported")
    raster = data[pos : pos + W * H]
    if len(raster) != W * H:
        raise ParseError(f"{path}: expected {W * H} pixel bytes, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(H, W).copy()


class SceneError(ParseError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


_SCENE_KEYS = {"objects", "background_token", "layers", "steps", "sharpen", "noise_amp", "seed", "targets"}
_SCENE_REQUIRED = {"objects", "layers", "steps"}
_OBJECT_KEYS = {"token", "label", "center", "sigma", "amplitude"}
_OBJECT_REQUIRED = {"token", "center", "sigma"}
_TARGET_KEYS = {"region", "omega"}


def _line_of(text: str, key: str) -> int | None:
    idx = text.find(f'"{key}"')
    return text.count("\n", 0, idx) + 1 if idx >= 0 else None


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def parse_scene(text: str) -> Scene:
    """Parse and validate a scene document; unknown keys are rejected."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(exc.msg, exc.lineno) from None

    def fail(msg, key):
        raise SceneError(msg, _line_of(text, key))

    if not isinstance(doc, dict):
        raise SceneError("scene must be a JSON object", 1)
    for k in sorted(set(doc) - _SCENE_KEYS):
        fail(f"unknown scene key {k!r}", k)
    for k in sorted(_SCENE_REQUIRED - set(doc)):
        raise SceneError(f"missing required scene key {k!r}", 1)

    objs = doc["objects"]
    if not isinstance(objs, list) or not objs:
        fail("'objects' must be a non-empty list", "objects")
    objects = []
    for i, o in enumerate(objs):
        if not isinstance(o, dict):
            fail(f"objects[{i}] must be an object", "objects")
        for k in sorted(set(o) - _OBJECT_KEYS):
            fail(f"unknown key {k!r} in objects[{i}]", k)
        for k in sorted(_OBJECT_REQUIRED - set(o)):
            fail(f"objects[{i}] is missing {k!r}", "objects")
        c = o["center"]
        if not (isinstance(c, list) and len(c) == 2 and all(_is_num(x) for x in c)):
            fail(f"objects[{i}].center must be [x, y]", "center")
        if not _is_int(o["token"]):
            fail(f"objects[{i}].token must be an integer", "token")
        if not _is_num(o["sigma"]) or not _is_num(o.get("amplitude", 1.0)):
            fail(f"objects[{i}] sigma/amplitude must be numbers", "sigma")
        if not isinstance(o.get("label", ""), str):
            fail(f"objects[{i}].label must be a string", "label")
        try:
            objects.append(
                BlobObject(o["token"], tuple(c), float(o["sigma"]), float(o.get("amplitude", 1.0)), o.get("label", ""))
            )
        except InvariantError as exc:
            fail(str(exc), "objects")

    layers = doc["layers"]
    if not (
        isinstance(layers, list)
        and layers
        and all(isinstance(r, list) and len(r) == 2 and all(_is_int(x) for x in r) for r in layers)
    ):
        fail("'layers' must be a non-empty list of [H, W] integer pairs", "layers")

    kw = {}
    for key, check, what in (
        ("background_token", _is_int, "an integer"),
        ("steps", _is_int, "an integer"),
        ("seed", _is_int, "an integer"),
        ("sharpen", _is_num, "a number"),
        ("noise_amp", _is_num, "a number"),
    ):
        if key in doc:
            if not check(doc[key]):
                fail(f"{key!r} must be {what}", key)
            kw[key] = doc[key]

    targets = []
    for i, tgt in enumerate(doc.get("targets", [])):
        if not isinstance(tgt, dict):
            fail(f"targets[{i}] must be an object", "targets")
        for k in sorted(set(tgt) - _TARGET_KEYS):
            fail(f"unknown key {k!r} in targets[{i}]", k)
        r = tgt.get("region")
        if not (isinstance(r, list) and len(r) == 4 and all(_is_num(x) for x in r)):
            fail(f"targets[{i}].region must be [x0, y0, x1, y1]", "region")
        omega = tgt.get("omega", 1.0)
        if not _is_num(omega) or omega < 0:
            fail(f"targets[{i}].omega must be a number >= 0", "omega")
        try:
            targets.append(TargetRegion(Region(*map(float, r)), float(omega)))
        except InvariantError as exc:
            fail(str(exc), "region")

    try:
        return Scene(objects=tuple(objects), layers=tuple(tuple(r) for r in layers), targets=tuple(targets), **kw)
    except InvariantError as exc:
        raise SceneError(str(exc), 1) from None


def load_scene(path) -> Scene:
    return parse_scene(Path(path).read_text())


def scene_to_dict(scene: Scene) -> dict:
    d = {
        "objects": [
            {"token": o.token, "label": o.label, "center": list(o.center), "sigma": o.sigma, "amplitude": o.amplitude}
            for o in scene.objects
        ],
        "background_token": scene.background_token,
        "layers": [list(r) for r in scene.layers],
        "steps": scene.steps,
        "sharpen": scene.sharpen,
        "noise_amp": scene.noise_amp,
        "seed": scene.seed,
    }
    if scene.targets:
        d["targets"] = [{"region": list(t.region.as_tuple()), "omega": t.omega} for t in scene.targets]
    return d


def canonical(obj):
    """Recursively round floats to 9 significant digits; non-finite floats become None."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.9g}")
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_canonical(obj) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def metrics_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_CSV_HEADER)
    for r in records:
        mean_in_r = max(r.mean_attn_in_R.values(), default=0.0)
        w.writerow(
            [
                r.step,
                len(r.conflicts),
                f"{r.max_displacement:.9g}",
                f"{r.loss_total:.9g}",
                f"{r.loss_main:.9g}",
                f"{r.loss_norm:.9g}",
                f"{mean_in_r:.9g}",
            ]
        )
    return buf.getvalue()
