"""Command-line interface: simulate / detect / eval / ablate / export-graph."""

import argparse
import os
import sys

from . import dataio
from ._backend import BACKEND
from .detection import DetectionParams, apply_correction
from .errors import SemloopError
from .evaluation import (
    evaluate_run,
    per_keyframe_errors,
    run_ablation,
    run_detection,
)
from .simulator import (
    DriftModel,
    ObservationNoise,
    single_loop_fixture,
    two_floor_fixture,
)


def _load_params(args):
    params = DetectionParams.from_file(args.params) if args.params else DetectionParams()
    return params.with_env_overrides()


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _cmd_simulate(args):
    scene = dataio.load_json(args.scene) if args.scene else {}
    kind = scene.get("kind", args.preset)
    seed = args.seed if args.seed is not None else scene.get("seed", 0)
    kw = {}
    if "noise" in scene:
        kw["noise"] = ObservationNoise(**scene["noise"])
    if "keyframe_count" in scene:
        kw["keyframe_count"] = scene["keyframe_count"]
    if kind == "single-loop":
        if "drift" in scene:
            kw["drift"] = DriftModel(**scene["drift"])
        if "object_count" in scene:
            kw["object_count"] = scene["object_count"]
        records, _ = single_loop_fixture(seed, **kw)
    elif kind == "two-floor":
        if "perturbation" in scene:
            kw["perturbation"] = scene["perturbation"]
        records, _ = two_floor_fixture(seed, **kw)
    else:
        raise SemloopError(f"unknown scene kind {kind!r}")
    out = os.path.join(_outdir(args), "dataset.jsonl")
    dataio.save_dataset(records, out)
    print(f"wrote {len(records)} keyframes to {out}")
    return 0


def _cmd_detect(args):
    params = _load_params(args)
    records = dataio.load_dataset(args.dataset)
    result = run_detection(records, params, seed=args.seed or 0)
    outdir = _outdir(args)
    dataio.save_reports(result.reports, os.path.join(outdir, "reports.json"))
    dataio.save_json(result.events, os.path.join(outdir, "events.json"))
    dataio.save_json(
        [[kc, kl, s] for kc, kl, s in result.candidates],
        os.path.join(outdir, "candidates.json"),
    )
    print(
        f"{len(result.reports)} loop(s) accepted, "
        f"{len(result.events)} candidate rejection(s) [{BACKEND} backend]"
    )
    return 0


def _cmd_eval(args):
    records = dataio.load_dataset(args.dataset)
    raw = dataio.load_json(args.reports)
    pairs = [(r["loop_kf"], r["current_kf"]) for r in raw]

    params = _load_params(args)
    report = evaluate_run(
        records,
        [type("R", (), {"loop_kf": a, "current_kf": b, "fine_sim3": dataio.sim3_from_dict(raw[i]["fine"])})()
         for i, (a, b) in enumerate(pairs)],
        min_gap=params.min_kf_gap,
    )
    outdir = _outdir(args)
    metrics = {
        "detections": report.detections,
        "true_positives": report.true_positives,
        "labeled_loops": report.labeled_loops,
        "precision": report.precision,
        "recall": report.recall,
        "ate_before_cm": report.ate_before_cm,
        "ate_after_cm": report.ate_after_cm,
    }
    dataio.save_json(metrics, os.path.join(outdir, "metrics.json"))
    if args.timeline:
        est = [r.est_pose for r in records]
        gt = [r.gt_pose for r in records]
        before = per_keyframe_errors(est, gt)
        after = [None] * len(records)
        if raw:
            loop = type(
                "R",
                (),
                {
                    "loop_kf": raw[0]["loop_kf"],
                    "current_kf": raw[0]["current_kf"],
                    "fine_sim3": dataio.sim3_from_dict(raw[0]["fine"]),
                },
            )()
            after = per_keyframe_errors(apply_correction(est, loop), gt)
        rows = [(r.id, before[i], after[i]) for i, r in enumerate(records)]
        fmt = "json" if args.format == "json" else "csv"
        dataio.export_timeline(rows, os.path.join(outdir, f"timeline.{fmt}"), fmt)
    print(
        f"precision {metrics['precision']:.3f}  recall {metrics['recall']:.3f}  "
        f"ate before {metrics['ate_before_cm']:.2f} cm  after "
        f"{'-' if metrics['ate_after_cm'] is None else format(metrics['ate_after_cm'], '.2f')} cm"
    )
    return 0


def _cmd_ablate(args):
    params = _load_params(args)
    records = dataio.load_dataset(args.dataset)
    rows = run_ablation(records, params, seed=args.seed or 0)
    outdir = _outdir(args)
    if args.format == "csv":
        import csv

        path = os.path.join(outdir, "ablation.csv")
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(
                fh, fieldnames=["checks", "detections", "true_positives", "precision", "recall"]
            )
            w.writeheader()
            w.writerows(rows)
    else:
        path = os.path.join(outdir, "ablation.json")
        dataio.save_json(rows, path)
    for row in rows:
        print(
            f"{row['checks']:>16}: precision {row['precision']:.3f} "
            f"recall {row['recall']:.3f} ({row['detections']} detections)"
        )
    return 0


def _cmd_export_graph(args):
    params = _load_params(args)
    records = dataio.load_dataset(args.dataset)
    result = run_detection(records, params, seed=args.seed or 0)
    outdir = _outdir(args)
    dataio.export_graph_dot(result.db.graph, os.path.join(outdir, "covis_graph.dot"))
    count = 0
    for report in result.reports:
        path = os.path.join(
            outdir, f"match_{report.loop_kf}_{report.current_kf}.dot"
        )
        dataio.export_match_dot(result.db, report, path)
        count += 1
    print(f"wrote covis_graph.dot and {count} match graph(s) to {outdir}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="semloop",
        description="Semantic covisibility-graph loop closure: simulate, detect, evaluate.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--scene", help="scene JSON (kind, keyframe_count, noise, drift, ...)")
    p.add_argument("--preset", default="single-loop", choices=["single-loop", "two-floor"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("detect", help="run loop detection over a dataset")
    p.add_argument("dataset")
    p.add_argument("--params", help="detection params JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="precision/recall and trajectory error")
    p.add_argument("dataset")
    p.add_argument("reports")
    p.add_argument("--params")
    p.add_argument("--timeline", action="store_true", help="also write the per-keyframe error timeline")
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="cumulative-checks ablation table")
    p.add_argument("dataset")
    p.add_argument("--params")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("export-graph", help="DOT export of the covisibility graph and matches")
    p.add_argument("dataset")
    p.add_argument("--params")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_export_graph)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SemloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
