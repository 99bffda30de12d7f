"""
Command-line entry point.

    attnforce simulate --scene scene.json --region golden --out run/
    attnforce metrics --field run/step_49_res_1.pgm --region golden
    attnforce compare --report-a a/report.json --report-b b/report.json

Exit codes: 0 ok, 1 usage, 2 invalid input, 3 compare non-dominance,
4 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import AttentionMap, GuidanceParams
from .errors import AttnForceError, InvariantError, ParseError
from .io import (
    atomic_write,
    dumps_canonical,
    load_scene,
    metrics_csv,
    parse_region,
    read_pgm,
    scene_to_dict,
    write_render,
)
from .metrics import evaluate
from .detect import region_mask
from .simulate import run

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_DOMINANCE, EXIT_RUNTIME = 0, 1, 2, 3, 4

log = logging.getLogger("attnforce")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="attnforce", description="Force-directed attention guidance simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    d = GuidanceParams()
    s = sub.add_parser("simulate", help="run unguided and guided trajectories")
    s.add_argument("--scene", required=True)
    s.add_argument("--region", required=True)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--theta", type=float, default=d.theta)
    s.add_argument("--xi", type=float, default=d.xi)
    s.add_argument("--alpha", type=float, default=d.alpha)
    s.add_argument("--margin", type=float, default=d.margin_m)
    s.add_argument("--lambda", dest="lambda_sec", type=float, default=d.lambda_sec)
    s.add_argument("--gamma", type=float, default=d.gamma)
    s.add_argument("--semantic-score", type=float, default=1.0)
    s.add_argument("--sal-threshold", type=float, default=0.5)
    s.add_argument("--force-source", choices=("result", "original"), default="result")
    s.add_argument("--out", default="out")

    m = sub.add_parser("metrics", help="score a rendered field against a region")
    m.add_argument("--field", required=True)
    m.add_argument("--region", required=True)
    m.add_argument("--semantic-score", type=float, default=1.0)
    m.add_argument("--sal-threshold", type=float, default=0.5)

    c = sub.add_parser("compare", help="compare the guided metrics of two run reports")
    c.add_argument("--report-a", required=True)
    c.add_argument("--report-b", required=True)
    return p


def _simulate(args) -> int:
    scene = load_scene(args.scene)
    overrides = {}
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        scene = replace(scene, **overrides)
    region = parse_region(args.region)
    params = GuidanceParams(
        theta=args.theta,
        xi=args.xi,
        alpha=args.alpha,
        margin_m=args.margin,
        lambda_sec=args.lambda_sec,
        gamma=args.gamma,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fine = max(range(len(scene.layers)), key=lambda l: scene.layers[l][0] * scene.layers[l][1])
    renders = []

    def on_step(step, t, ori, res):
        for k in scene.object_tokens:
            for tag, stack in (("ori", ori), ("res", res)):
                name = f"step_{step}_{tag}_{k}.pgm"
                write_render(stack.map(fine, k), out / name)
                renders.append(name)

    try:
        report = run(
            scene,
            region,
            params,
            semantic_score=args.semantic_score,
            sal_threshold=args.sal_threshold,
            force_source=args.force_source,
            on_step=on_step,
        )
    except AttnForceError as exc:
        print(f"attnforce: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    doc = {
        "params": {
            "theta": params.theta,
            "xi": params.xi,
            "alpha": params.alpha,
            "margin_m": params.margin_m,
            "omega": list(params.omega),
            "lambda_sec": params.lambda_sec,
            "gamma": params.gamma,
            "max_step": params.max_step,
            "bbox_mass": params.bbox_mass,
            "eps_dist": params.eps_dist,
            "semantic_score": args.semantic_score,
            "sal_threshold": args.sal_threshold,
            "force_source": args.force_source,
        },
        "scene": scene_to_dict(scene),
        "region": list(region.as_tuple()),
        "report": report.as_dict(),
        "renders": renders,
    }
    atomic_write(out / "report.json", dumps_canonical(doc))
    atomic_write(out / "metrics.csv", metrics_csv(report.per_step))
    log.info("wrote %s", out / "report.json")
    return EXIT_OK


def _metrics(args) -> int:
    pix = read_pgm(args.field).astype(np.float64)
    peak = pix.max()
    field = AttentionMap(pix / peak if peak > 0 else pix)
    region = parse_region(args.region)
    mask = region_mask(region, *field.shape)
    rep = evaluate(field, mask, args.semantic_score, args.sal_threshold)
    sys.stdout.write(dumps_canonical(rep.as_dict()))
    return EXIT_OK


def _guided_metrics(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
        return doc["report"]["metrics"]["guided"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: not a run report ({exc})") from None


def _compare(args) -> int:
    a = _guided_metrics(args.report_a)
    b = _guided_metrics(args.report_b)
    deltas = {
        "tv_loss_in_R": a["tv_loss_in_R"] - b["tv_loss_in_R"],
        "saliency_iou": a["saliency_iou"] - b["saliency_iou"],
    }
    if a.get("vtcm") is not None and b.get("vtcm") is not None:
        deltas["vtcm"] = a["vtcm"] - b["vtcm"]
    dominates = deltas["tv_loss_in_R"] <= 0 and deltas["saliency_iou"] <= 0
    sys.stdout.write(dumps_canonical({"a_dominates": dominates, "delta_a_minus_b": deltas}))
    return EXIT_OK if dominates else EXIT_DOMINANCE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"simulate": _simulate, "metrics": _metrics, "compare": _compare}[args.command]
    try:
        return handler(args)
    except (ParseError, InvariantError, OSError) as exc:
        print(f"attnforce: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AttnForceError as exc:
        print(f"attnforce: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
