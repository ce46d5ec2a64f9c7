"""Command-line entry point: estimate, train, eval, synth, bench.

Exit codes: 0 success, 2 bad configuration or inputs, 3 file I/O, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DENSITIES,
    SHAPES,
    PointCloud,
    SynthSpec,
    atomic_write_text,
    load_shape,
    read_normals,
    read_shape_list,
    read_xyz,
    synthesize,
    write_normals,
    write_xyz,
)
from .errors import ConfigError, DataError, LengthMismatch, NumericError
from .estimators import NetConfig, init_params, make_estimator, save_params
from .estimators.neural import load_params
from .metrics import MetricReport, emit_report, rmse, pgp
from .pipeline import InferenceConfig, TrainConfig, infer, train

log = logging.getLogger("e3normals")

EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 2, 3, 4


def _add_inference_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inference")
    g.add_argument("--estimator", default="jet", choices=("pca", "jet", "neural"))
    g.add_argument("--jet-order", type=int, default=2)
    g.add_argument("--params", help="network parameter file (neural estimator)")
    g.add_argument("--patch-size", type=int, default=1400)
    g.add_argument("--n-frames", type=int, default=8, choices=(1, 2, 4, 8))
    g.add_argument("--graph-k", type=int, default=50)
    g.add_argument("--no-geopatch", action="store_true", help="Euclidean kNN patches")
    g.add_argument("--no-halfpatch", action="store_true", help="keep predictions from the whole patch")
    g.add_argument("--no-gaussianpatch", action="store_true", help="uniform aggregation weights")
    g.add_argument("--gauss-sigma", type=float, default=None, help="fixed sigma (default: half radius / 2)")
    g.add_argument("--per-point", action="store_true", help="one patch per point, keep its center")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    g.add_argument("--seed", type=int, default=0)


def inference_config(args) -> InferenceConfig:
    return InferenceConfig(
        patch_size=args.patch_size,
        n_frames=args.n_frames,
        graph_k=args.graph_k,
        use_geodesic=not args.no_geopatch,
        use_half_patch=not args.no_halfpatch,
        use_gaussian_agg=not args.no_gaussianpatch,
        gauss_sigma=args.gauss_sigma,
        per_point_mode=args.per_point,
        seed=args.seed,
        threads=args.threads,
    )


def _estimator(args):
    if args.estimator == "jet" and args.jet_order < 1:
        raise ConfigError("jet order must be >= 1")
    if args.estimator == "neural" and not args.params:
        raise ConfigError("--estimator neural needs --params")
    return make_estimator(args.estimator, args.jet_order, args.params)


def cmd_estimate(args) -> int:
    cfg = inference_config(args)
    est = _estimator(args)
    cloud = read_xyz(args.input)
    t0 = time.perf_counter()
    normals = infer(cloud, est, cfg)
    elapsed = time.perf_counter() - t0
    write_normals(normals, args.output)
    if args.manifest:
        manifest = {
            "command": "estimate",
            "input": str(args.input),
            "output": str(args.output),
            "n_points": len(cloud),
            "estimator": est.name,
            "config": {**vars(cfg), "gauss_sigma_rule": cfg.gauss_sigma_rule},
            "seed": cfg.seed,
            "runtime_s": elapsed,
            "version": __version__,
        }
        atomic_write_text(args.manifest, json.dumps(manifest, indent=2) + "\n")
    return 0


def _load_list(args, normals: bool) -> list[PointCloud]:
    names = read_shape_list(args.shapes)
    if not names:
        raise ConfigError(f"shape list {args.shapes} is empty")
    return [load_shape(args.data, n, normals) for n in names]


def cmd_train(args) -> int:
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr_max=args.lr_max,
        lr_min=args.lr_min,
        loss=args.loss,
        seed=args.seed,
        patch_size=args.patch_size,
        patches_per_epoch=args.patches_per_epoch,
        gauss_sigma=args.gauss_sigma,
        geodesic_patches=args.geodesic_train,
    )
    shapes = _load_list(args, normals=True)
    net = NetConfig.with_fused_dim(args.fused_dim)
    result = train(shapes, init_params(net, args.seed), cfg)
    save_params(result.params, args.output)
    if args.loss_csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(result.history, 1):
            w.writerow([i, repr(v)])
        atomic_write_text(args.loss_csv, buf.getvalue())
    return 0


def _aligned(pred, gt, name):
    if len(pred) != len(gt):
        raise LengthMismatch(f"{name}: {len(pred)} predicted vs {len(gt)} ground-truth normals")
    return pred, gt


def cmd_eval(args) -> int:
    names = read_shape_list(args.shapes)
    report = MetricReport(taus=tuple(args.tau), config={"pred_dir": str(args.pred), "gt_dir": str(args.gt)})
    for name in names:
        pred = read_normals(Path(args.pred) / f"{name}.normals")
        gt = read_normals(Path(args.gt) / f"{name}.normals")
        report.add(name, *_aligned(pred, gt, name))
    emit_report(report, args.format, args.output)
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(args.shape, args.n_points, args.noise, args.density, args.seed)
    cloud = synthesize(spec)
    name = args.name or spec.default_name
    out = Path(args.out_dir)
    if not out.is_dir():
        raise DataError(f"output directory {out} does not exist")
    write_xyz(cloud, out / f"{name}.xyz")
    write_normals(cloud.gt_normals, out / f"{name}.normals")
    return 0


def _split(text: str, conv=str) -> list:
    return [conv(s) for s in text.split(",") if s.strip()]


PATCH_VARIANTS = {
    "default": {},
    "no-geopatch": {"use_geodesic": False},
    "no-halfpatch": {"use_half_patch": False},
    "no-gaussianpatch": {"use_gaussian_agg": False},
}


def cmd_bench(args) -> int:
    frames = _split(args.grid_frames, int)
    ests = _split(args.grid_estimators)
    variants = _split(args.grid_patches)
    if not frames or not ests or not variants:
        raise ConfigError("bench grid is empty")
    bad = [v for v in variants if v not in PATCH_VARIANTS]
    if bad:
        raise ConfigError(f"unknown patch variants {bad}; choose from {sorted(PATCH_VARIANTS)}")
    base = inference_config(args)
    grid = []
    for e in ests:
        args.estimator = e
        est = _estimator(args)
        for f in frames:
            for v in variants:
                cfg = InferenceConfig(**{**vars(base), "n_frames": f, **PATCH_VARIANTS[v]})
                grid.append((e, est, f, v, cfg))
    shapes = _load_list(args, normals=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["shape", "estimator", "n_frames", "patches", "rmse_deg", "pgp5", "pgp10", "runtime_ms"])
    for s in shapes:
        for e, est, f, v, cfg in grid:
            t0 = time.perf_counter()
            n = infer(s, est, cfg)
            ms = 1000.0 * (time.perf_counter() - t0)
            w.writerow([s.name, e, f, v, repr(rmse(n, s.gt_normals)), repr(pgp(n, s.gt_normals, 5.0)),
                        repr(pgp(n, s.gt_normals, 10.0)), repr(ms)])
    atomic_write_text(args.output, buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="e3normals", description="Unoriented normal estimation for point clouds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate normals for one .xyz cloud")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--manifest", help="write a JSON run manifest here")
    _add_inference_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="train the point network")
    p.add_argument("--data", required=True, help="directory with <name>.xyz / <name>.normals")
    p.add_argument("--shapes", required=True, help="shape list file")
    p.add_argument("-o", "--output", required=True, help="parameter file to write")
    p.add_argument("--loss-csv", help="per-epoch loss history")
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr-max", type=float, default=2e-3)
    p.add_argument("--lr-min", type=float, default=2e-5)
    p.add_argument("--loss", default="gau", choices=("val", "gau", "half"))
    p.add_argument("--patch-size", type=int, default=1400)
    p.add_argument("--patches-per-epoch", type=int, default=None)
    p.add_argument("--fused-dim", type=int, default=128)
    p.add_argument("--gauss-sigma", type=float, default=None)
    p.add_argument("--geodesic-train", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score predicted normals against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted .normals")
    p.add_argument("--gt", required=True, help="directory of ground-truth .normals")
    p.add_argument("--shapes", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--tau", type=float, nargs="+", default=[5.0, 10.0])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic shape with analytic normals")
    p.add_argument("--shape", default="sphere", choices=SHAPES)
    p.add_argument("--n-points", type=int, default=5000)
    p.add_argument("--noise", type=float, default=0.0, help="std as a fraction of the bbox diagonal")
    p.add_argument("--density", default="uniform", choices=DENSITIES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="estimate and score over a config grid")
    p.add_argument("--data", required=True)
    p.add_argument("--shapes", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--grid-frames", default="8", help="comma list of frame counts")
    p.add_argument("--grid-estimators", default="jet", help="comma list of estimators")
    p.add_argument("--grid-patches", default="default", help=f"comma list from {sorted(PATCH_VARIANTS)}")
    _add_inference_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
