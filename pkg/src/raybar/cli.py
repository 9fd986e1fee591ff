"""Command-line front end: render and bench subcommands."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import octree as octree_mod
from .distrib import RunConfig
from .errors import RaybarError
from .octree import build_octree
from .output import write_ppm, write_stats_json
from .quincunx import SamplingParams, plan_scanbars
from .renderer import render_sequential
from .runner import (RunStats, make_static_config, mean_unit_cost,
                     run_simulated)
from .scene import parse_scene
from .scenes import BUILTIN_SCENES, get_builtin, parse_anim
from .shading import ShadingParams

MODES = ("seq", "static", "static_lb", "dyn_scanbar", "dyn_window")
MEASURES = {"rays": "rays_generated", "intersections": "intersection_tests"}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", required=True,
                   help=f"scene file path or builtin: {', '.join(BUILTIN_SCENES)}")
    p.add_argument("--anim", help="camera track file (one camera per frame)")
    p.add_argument("-x", type=int, default=64, dest="hres")
    p.add_argument("-y", type=int, default=64, dest="yres")
    p.add_argument("--xstep", type=int, default=4)
    p.add_argument("--ystep", type=int, default=4)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--windows", type=int, default=16)
    p.add_argument("--strategy", default="forward",
                   choices=("forward", "backward", "random"))
    p.add_argument("--probes", type=int, default=5)
    p.add_argument("--measure", default="rays", choices=tuple(MEASURES))
    p.add_argument("--no-ambient-share", action="store_true")
    p.add_argument("--ambient-bounces", type=int, default=0)
    p.add_argument("--ambient-divisions", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--latency-ticks", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raybar",
        description="Distributed adaptive-sampling ray tracer")
    sub = parser.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("render", help="render one image or animation")
    _add_common(pr)
    pr.add_argument("--mode", default="seq", choices=MODES)
    pr.add_argument("--workers", type=int, default=1)
    pr.add_argument("--transport", default="sim", choices=("sim", "tcp"))
    pr.add_argument("--port", type=int, default=0)
    pr.add_argument("-o", dest="out", default="out.ppm")
    pr.add_argument("--stats", help="write JSON run stats to this path")

    pb = sub.add_parser("bench", help="speedup table over a worker matrix")
    _add_common(pb)
    pb.add_argument("--mode", default="dyn_scanbar",
                    choices=MODES[1:])
    pb.add_argument("--workers", default="1,2,4,8",
                    help="comma-separated worker counts")
    pb.add_argument("--window-counts",
                    help="comma-separated window counts (dyn_window)")
    pb.add_argument("--csv", help="write the bench table as CSV here")
    return parser


def _load_scene(args):
    name = args.scene
    path = Path(name)
    if not path.exists() and name in BUILTIN_SCENES:
        scene = get_builtin(name)
    else:
        scene = parse_scene(path.read_text())
    frames = None
    if args.anim:
        frames = parse_anim(Path(args.anim).read_text())
    return scene, frames


def _params(args):
    sparams = SamplingParams(args.hres, args.yres, args.xstep, args.ystep,
                             args.tolerance)
    shparams = ShadingParams(ambient_bounces=args.ambient_bounces,
                             ambient_divisions=args.ambient_divisions,
                             rng_seed=args.seed)
    return sparams, shparams


def _make_config(args, octree, sparams, shparams, mode, workers,
                 windows=None) -> RunConfig:
    share = not args.no_ambient_share
    if mode in ("static", "static_lb"):
        return make_static_config(octree, sparams, shparams, workers,
                                  load_balance=(mode == "static_lb"),
                                  probes=args.probes,
                                  measure=MEASURES[args.measure],
                                  share_ambient=share)
    if mode == "dyn_scanbar":
        return RunConfig("dyn_scanbar", sparams, shparams,
                         share_ambient=share)
    from .partition import plan_windows
    grid = plan_windows(sparams.hres, sparams.yres,
                        windows if windows is not None else args.windows)
    grid.strategy = args.strategy
    frames = getattr(args, "_frames", None)
    return RunConfig("dyn_window", sparams, shparams, share_ambient=share,
                     grid=grid, frames=frames)


def stats_dict(stats: RunStats) -> dict:
    return {
        "mode": stats.mode,
        "workers": stats.workers,
        "counters": stats.counters.as_dict(),
        "per_worker": {str(w): c.as_dict()
                       for w, c in stats.per_worker_counters.items()},
        "busy_ticks": {str(w): b for w, b in stats.busy.items()},
        "makespan_ticks": stats.makespan,
        "probe_ticks": stats.probe_ticks,
        "speedup": stats.speedup,
        "ambient_records": {str(w): len(k)
                            for w, k in stats.ambient_keys.items()},
        "records_relayed": stats.records_relayed,
        "transfers": [{"time": t.time, "donor": t.donor,
                       "recipient": t.recipient,
                       "scanbars": list(t.indices)}
                      for t in stats.transfers],
    }


def cmd_render(args) -> int:
    scene, frames = _load_scene(args)
    args._frames = frames
    sparams, shparams = _params(args)
    tree = build_octree(scene)
    if args.mode == "seq":
        result = render_sequential(tree, sparams, shparams)
        write_ppm(result.image, args.out)
        if args.stats:
            write_stats_json({"mode": "seq",
                              "counters": result.counters.as_dict(),
                              "per_scanbar_primary": result.per_scanbar_primary},
                             args.stats)
        return 0
    if args.workers < 1:
        raise RaybarError("--workers must be >= 1")
    config = _make_config(args, tree, sparams, shparams, args.mode,
                          args.workers)
    if args.transport == "tcp":
        from .tcp import run_tcp
        coord, _nodes, wall = run_tcp(tree, config, args.workers,
                                      port=args.port)
        write_ppm(coord.images[0], args.out)
        if args.stats:
            write_stats_json({"mode": args.mode, "workers": args.workers,
                              "wall_seconds": wall,
                              "counters": coord.counters.as_dict()},
                             args.stats)
        return 0
    stats = run_simulated(tree, config, args.workers,
                          latency=args.latency_ticks, seed=args.seed)
    base = args.out
    if frames is not None and len(stats.images) > 1:
        stem = Path(base)
        for f, img in enumerate(stats.images):
            write_ppm(img, stem.with_name(f"{stem.stem}_{f:03d}{stem.suffix}"))
    else:
        write_ppm(stats.image, base)
    if args.stats:
        write_stats_json(stats_dict(stats), args.stats)
    return 0


def cmd_bench(args) -> int:
    scene, frames = _load_scene(args)
    args._frames = frames
    sparams, shparams = _params(args)
    tree = build_octree(scene)
    worker_counts = [int(w) for w in str(args.workers).split(",")]
    if any(w < 1 for w in worker_counts):
        raise RaybarError("worker counts must be >= 1")
    window_counts = ([int(w) for w in args.window_counts.split(",")]
                     if args.window_counts else [args.windows])
    if args.mode != "dyn_window":
        window_counts = [None]
    unit = mean_unit_cost(tree, sparams, shparams)
    latency = max(args.latency_ticks, 0.0)

    rows = []
    for windows in window_counts:
        baselines: dict = {}
        for workers in sorted(set(worker_counts) | {1}):
            config = _make_config(args, tree, sparams, shparams, args.mode,
                                  workers, windows=windows)
            stats = run_simulated(tree, config, workers, latency=latency,
                                  seed=args.seed)
            if workers == 1:
                baselines[windows] = stats.makespan
            if workers in worker_counts:
                stats.with_baseline(baselines[windows])
                rows.append({
                    "mode": args.mode,
                    "workers": workers,
                    "windows": windows if windows is not None else "",
                    "rays": stats.counters.rays_total(),
                    "primary": stats.counters.primary,
                    "makespan": round(stats.makespan, 3),
                    "speedup": round(stats.speedup, 4),
                })

    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    table = out.getvalue()
    sys.stdout.write(table)
    sys.stdout.write(f"# mean unit cost {unit:.1f} ticks, "
                     f"latency {latency} ticks\n")
    if args.csv:
        Path(args.csv).write_text(table)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "render":
            return cmd_render(args)
        return cmd_bench(args)
    except (RaybarError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
