"""Command-line front end.

Configuration is a plain ``key=value`` file (``#`` starts a comment);
``--set key=value`` flags and dedicated options override it. Exit codes:
0 ok, 2 configuration error, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import serialization as ser
from .affinity import IsolatedNodeError, build_graph, diffuse_graph
from .agnn import AgnnParams, NoAffinitySignalError
from .baselines import ConnectivityError, kmeans_fit
from .core import DegenerateClusterError, extract_patches
from .experiments import ROTSIM_PARAMS, rotsim
from .goc import GocParams, build_model
from .imageio import ImageFormatError, read_image, write_pgm
from .metrics import psnr, ssim
from .restore import STRATEGIES, TASKS, DegradationOp, NumericFailure, RestoreConfig, bicubic_upsample, degrade, restore
from .synthetic import textured_image

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "MANIFOLD_RESTORE_THREADS"


class ConfigError(ValueError):
    pass


# key -> parser; every accepted config key is listed here
KEYS = {
    "seed": int,
    "task": str,
    "sigma": float,
    "strategy": str,
    "lambda": float,
    "outer_iters": int,
    "inner_iters": int,
    "ist_steps": int,
    "patch_h": int,
    "patch_w": int,
    "patch_stride": int,
    "train_stride": int,
    "remove_dc": lambda v: {"1": True, "true": True, "0": False, "false": False}[v.lower()],
    "agnn.c1": float,
    "agnn.c2": float,
    "agnn.kappa": int,
    "agnn.s": int,
    "agnn.min_size": int,
    "goc.C": int,
    "goc.c3": float,
    "goc.gamma": float,
    "goc.r": int,
    "goc.Kmax": int,
    "goc.Lmax": int,
    "goc.L": int,
    "goc.K": int,
    "kmeans.C": int,
    "geod.s": int,
    "geod.k": int,
}


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def get(self, key, default=None):
        return self.values.get(key, default)

    def dumps(self) -> str:
        return "".join(f"{k}={self.values[k]}\n" for k in sorted(self.values))

    def agnn_params(self) -> AgnnParams:
        d = AgnnParams()
        return AgnnParams(
            c1=self.get("agnn.c1", d.c1),
            c2=self.get("agnn.c2", d.c2),
            kappa=self.get("agnn.kappa", d.kappa),
            s=self.get("agnn.s", d.s),
            min_size=self.get("agnn.min_size", d.min_size),
        )

    def goc_params(self) -> GocParams:
        d = GocParams()
        L, K = self.get("goc.L"), self.get("goc.K")
        if (L is None) != (K is None):
            raise ConfigError("goc.L and goc.K must be given together")
        return GocParams(
            C=self.get("goc.C", d.C),
            c3=self.get("goc.c3", d.c3),
            Kmax=self.get("goc.Kmax", d.Kmax),
            Lmax=self.get("goc.Lmax", d.Lmax),
            gamma=self.get("goc.gamma", d.gamma),
            r=self.get("goc.r", d.r),
            fixed_LK=None if L is None else (L, K),
        )

    def restore_config(self, strategy: str | None = None) -> RestoreConfig:
        d = RestoreConfig()
        return RestoreConfig(
            strategy=strategy or self.get("strategy", d.strategy),
            lam=self.get("lambda", d.lam),
            outer_iters=self.get("outer_iters", d.outer_iters),
            inner_iters=self.get("inner_iters", d.inner_iters),
            ist_steps=self.get("ist_steps", d.ist_steps),
            patch=(self.get("patch_h", d.patch[0]), self.get("patch_w", d.patch[1]), self.get("patch_stride", d.patch[2])),
            train_stride=self.get("train_stride", d.train_stride),
            remove_dc=self.get("remove_dc", d.remove_dc),
            agnn=self.agnn_params(),
            goc=self.goc_params(),
            kmeans_C=self.get("kmeans.C", d.kmeans_C),
            geod_s=self.get("geod.s", d.geod_s),
            geod_k=self.get("geod.k", d.geod_k),
        )


def parse_pairs(lines, source: str = "config") -> dict:
    out = {}
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected key=value")
        k, v = (t.strip() for t in line.split("=", 1))
        if k not in KEYS:
            raise ConfigError(f"{source}:{no}: unknown key {k!r}")
        try:
            out[k] = KEYS[k](v)
        except (ValueError, KeyError):
            raise ConfigError(f"{source}:{no}: bad value {v!r} for {k}") from None
    return out


def load_config(path=None, overrides=(), extra: dict | None = None) -> RunConfig:
    vals = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        vals.update(parse_pairs(text.splitlines(), str(path)))
    vals.update(parse_pairs(overrides, "--set"))
    for k, v in (extra or {}).items():
        if v is not None:
            vals[k] = v
    if "strategy" in vals and vals["strategy"] not in STRATEGIES:
        raise ConfigError(f"unknown strategy {vals['strategy']!r}")
    if "task" in vals and vals["task"] not in TASKS:
        raise ConfigError(f"unknown task {vals['task']!r}")
    return RunConfig(vals)


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer")
    return n


def load_input(source: str) -> np.ndarray:
    """Image path, or ``synthetic[:seed]`` for the built-in textured test image."""
    if source.startswith("synthetic"):
        _, _, seed = source.partition(":")
        return textured_image(96, seed=int(seed or 0))
    return read_image(source)


def _cfg(args, **extra) -> RunConfig:
    return load_config(getattr(args, "config", None), getattr(args, "set", None) or (), extra)


def cmd_degrade(args) -> int:
    cfg = _cfg(args, task=args.task, sigma=args.sigma, seed=args.seed)
    task = cfg.get("task", "sr3")
    op = DegradationOp.for_task(task, cfg.get("sigma"))
    x = load_input(args.input)
    y = degrade(x, op, cfg.get("seed", 0))
    write_pgm(args.output, y)
    side = Path(str(args.output) + ".op.txt")
    side.write_text(f"task={task}\nsigma={op.noise_sigma!r}\nseed={cfg.get('seed', 0)}\n")
    return EXIT_OK


def _run_restore(x_ref, y, task, op, cfg: RunConfig, strategy, seed):
    t0 = time.perf_counter()
    xh = restore(y, op, cfg.restore_config(strategy), seed=seed)
    wall = time.perf_counter() - t0
    row = None
    if x_ref is not None:
        x_ref = op.crop(x_ref)
        row = (psnr(x_ref, xh), ssim(x_ref, xh), wall)
    return xh, row


def cmd_restore(args) -> int:
    cfg = _cfg(args, task=args.task, sigma=args.sigma, seed=args.seed, strategy=args.strategy)
    task = cfg.get("task", "sr3")
    op = DegradationOp.for_task(task, cfg.get("sigma"))
    seed = cfg.get("seed", 0)
    y = load_input(args.input)
    ref = load_input(args.reference) if args.reference else None
    strategy = cfg.get("strategy", "agnn")
    xh, row = _run_restore(ref, y, task, op, cfg, strategy, seed)
    write_pgm(args.output, xh)
    if args.dump_config:
        Path(args.dump_config).write_text(cfg.dumps())
    if row is not None:
        rec = (Path(args.reference).name if ":" not in args.reference else args.reference, strategy, task) + row
        if args.metrics:
            ser.write_metrics_csv(args.metrics, [rec])
        print(",".join(ser.METRICS_HEADER))
        print(",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in rec))
    return EXIT_OK


def cmd_rotsim(args) -> int:
    cfg = _cfg(args, seed=args.seed)
    d = ROTSIM_PARAMS
    params = AgnnParams(
        c1=cfg.get("agnn.c1", d.c1), c2=cfg.get("agnn.c2", d.c2), kappa=cfg.get("agnn.kappa", d.kappa), s=cfg.get("agnn.s", d.s), min_size=cfg.get("agnn.min_size", d.min_size)
    )
    lo, hi = args.classes
    if not 1 <= lo <= hi <= 10:
        raise ConfigError("--classes must satisfy 1 <= lo <= hi <= 10")
    with open(args.output, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("clusters", "agnn", "euclidean_knn", "kmeans"))
        for C in range(lo, hi + 1):
            r = rotsim(C, args.step, params, seed=cfg.get("seed", 0))
            w.writerow((C, f"{r.agnn:.4f}", f"{r.euclid:.4f}", f"{r.kmeans:.4f}"))
            if args.assignments:
                out = Path(args.assignments)
                out.mkdir(parents=True, exist_ok=True)
                with open(out / f"rotsim_{C}.csv", "w", newline="") as g:
                    aw = csv.writer(g)
                    aw.writerow(("method", "query_id", "index", "query_label", "label"))
                    for name, sets in (("agnn", r.agnn_sets), ("euclidean_knn", r.euclid_sets)):
                        for q, s in enumerate(sets):
                            for i in s:
                                aw.writerow((name, q, int(i), int(r.labels[q]), int(r.labels[i])))
                    for q, k in enumerate(r.kmeans_labels):
                        aw.writerow(("kmeans_cluster", q, int(k), int(r.labels[q]), -1))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _cfg(args, seed=args.seed)
    seed = cfg.get("seed", 0)
    strategies = [s for s in args.strategies.split(",") if s]
    tasks = [t for t in args.tasks.split(",") if t]
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    for t in tasks:
        if t not in TASKS:
            raise ConfigError(f"unknown task {t!r}")
    images = {source: load_input(source) for source in args.images}

    def cell(key):
        source, task, strategy = key
        op = DegradationOp.for_task(task, cfg.get("sigma"))
        x = op.crop(images[source])
        y = degrade(x, op, seed)
        _, (p, s, w) = _run_restore(x, y, task, op, cfg, strategy, seed)
        return (Path(source).name if ":" not in source else source, strategy, task, p, s, w)

    keys = [(i, t, s) for i in args.images for t in tasks for s in strategies]
    with ThreadPoolExecutor(max_workers=min(thread_cap(), max(1, len(keys)))) as ex:
        rows = list(ex.map(cell, keys))
    rows.sort(key=lambda r: r[:3])
    ser.write_metrics_csv(args.output, rows)
    return EXIT_OK


def cmd_graph_build(args) -> int:
    cfg = _cfg(args)
    p = cfg.agnn_params()
    img = load_input(args.input)
    train = extract_patches(img, cfg.get("patch_h", 6), cfg.get("patch_w", 6), cfg.get("train_stride", 1))
    g = build_graph(train, min(p.s, train.count - 1), p.c1)
    ser.write_graph(args.output, diffuse_graph(g).matrix if args.diffused else g.matrix)
    return EXIT_OK


def cmd_goc_build(args) -> int:
    cfg = _cfg(args, seed=args.seed)
    img = load_input(args.input)
    train = extract_patches(img, cfg.get("patch_h", 6), cfg.get("patch_w", 6), cfg.get("train_stride", 1))
    prefix = Path(args.output)
    if args.kmeans:
        km = kmeans_fit(train, min(cfg.get("kmeans.C", 64), train.count), seed=cfg.get("seed", 0))
        ser.write_clusters_csv(str(prefix) + ".clusters.csv", [np.flatnonzero(km.assignments == k) for k in range(km.n_clusters)])
        ser.write_bases(str(prefix) + ".kmn", km.bases, ser.KMEANS_MAGIC)
        return EXIT_OK
    p = cfg.goc_params()
    if p.C > train.count:
        raise ConfigError(f"goc.C={p.C} exceeds the {train.count} training patches")
    model = build_model(train, p, seed=cfg.get("seed", 0))
    ser.write_clusters_csv(str(prefix) + ".clusters.csv", [c.members for c in model.clusters])
    ser.write_bases(str(prefix) + ".goc", model.bases, ser.GOC_MAGIC)
    return EXIT_OK


def cmd_eval(args) -> int:
    ref = load_input(args.reference)
    rows = []
    for est_path in args.estimates:
        est = load_input(est_path)
        if est.shape != ref.shape:
            ref_c = ref[: est.shape[0], : est.shape[1]]
        else:
            ref_c = ref
        rows.append((Path(est_path).name, args.strategy, args.task, psnr(ref_c, est), ssim(ref_c, est), 0.0))
    if args.output:
        ser.write_metrics_csv(args.output, rows)
    else:
        print(",".join(ser.METRICS_HEADER))
        for r in rows:
            print(",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in r))
    return EXIT_OK


def _range(text: str):
    lo, _, hi = text.partition("..")
    try:
        return int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO..HI") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="manifold-restore", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        if seed:
            p.add_argument("--seed", type=int)

    p = sub.add_parser("degrade", help="blur/subsample/add noise to an image")
    common(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--sigma", type=float, help="noise std (overrides the task default)")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("restore", help="restore a degraded image")
    common(p)
    p.add_argument("input", help="observed (degraded) image")
    p.add_argument("output")
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--sigma", type=float)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--reference", help="ground-truth image for PSNR/SSIM")
    p.add_argument("--metrics", help="write the metrics row to this CSV")
    p.add_argument("--dump-config", help="write the effective configuration here")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("rotsim", help="rotated-patch clustering experiment")
    common(p)
    p.add_argument("output", help="CSV of correct-cluster rates")
    p.add_argument("--classes", type=_range, default=(3, 10), help="LO..HI cluster counts (default 3..10)")
    p.add_argument("--step", type=float, default=5.0, help="rotation step in degrees")
    p.add_argument("--assignments", help="directory for per-count assignment CSVs")
    p.set_defaults(func=cmd_rotsim)

    p = sub.add_parser("bench", help="strategies x images x tasks summary")
    common(p)
    p.add_argument("output")
    p.add_argument("images", nargs="*", help="image paths or synthetic[:seed]")
    p.add_argument("--strategies", default=",".join(STRATEGIES))
    p.add_argument("--tasks", default="sr3")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("graph-build", help="write the patch affinity graph (AFG1)")
    common(p, seed=False)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--diffused", action="store_true", help="write A* instead of A")
    p.set_defaults(func=cmd_graph_build)

    p = sub.add_parser("goc-build", help="write GOC (or K-means) clusters and bases")
    common(p)
    p.add_argument("input")
    p.add_argument("output", help="output prefix")
    p.add_argument("--kmeans", action="store_true", help="K-means partition (KMN1) instead of GOC")
    p.set_defaults(func=cmd_goc_build)

    p = sub.add_parser("eval", help="PSNR/SSIM of estimates against a reference")
    p.add_argument("reference")
    p.add_argument("estimates", nargs="+")
    p.add_argument("--output")
    p.add_argument("--strategy", default="")
    p.add_argument("--task", default="")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bicubic", help="bicubic upsampling baseline")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--scale", type=int, default=3)
    p.set_defaults(func=lambda a: write_pgm(a.output, bicubic_upsample(load_input(a.input), a.scale)) or EXIT_OK)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ImageFormatError, ser.FormatError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NumericFailure, IsolatedNodeError, NoAffinitySignalError, ConnectivityError, DegenerateClusterError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # remaining parameter validation errors
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
