"""Drivers that assemble a coordinator, workers, and a transport into a run.

The simulated-transport drivers are fully deterministic: identical arguments
produce identical images, counters, event traces, and tick timelines.
Speedup is reported against a supplied baseline makespan (conventionally the
same mode's 1-worker makespan, so single-worker speedup is exactly 1.0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counters import TraceCounters
from .distrib import (ALL_MODES, COORDINATOR_ID, Coordinator, RunConfig,
                      WorkerNode, default_cost_model)
from .messages import Hello
from .octree import SceneOctree
from .partition import (CostEstimate, PartitionPlan, WindowGrid, equalize,
                        estimate_scanbar_cost, plan_windows,
                        uniform_partition)
from .quincunx import SamplingParams, plan_scanbars
from .renderer import RenderResult, render_sequential
from .scene import Scene
from .shading import ShadingParams
from .transport import SimTransport


@dataclass
class RunStats:
    mode: str
    workers: int
    images: list[np.ndarray]
    traced: list[np.ndarray]
    counters: TraceCounters
    unit_counters: dict
    unit_worker: dict
    per_worker_counters: dict[int, TraceCounters]
    busy: dict[int, float]
    makespan: float
    probe_ticks: float
    ambient_keys: dict[int, set]
    records_relayed: int
    transfers: list
    owner_updates: list
    trace: list | None
    speedup: float | None = None

    @property
    def image(self) -> np.ndarray:
        return self.images[0]

    def with_baseline(self, baseline_makespan: float) -> "RunStats":
        self.speedup = (baseline_makespan / self.makespan
                        if self.makespan > 0 else 1.0)
        return self


def probe_costs(octree: SceneOctree, sparams: SamplingParams,
                shparams: ShadingParams, probes: int, measure: str,
                camera=None) -> list[CostEstimate]:
    bars = plan_scanbars(sparams)
    return [estimate_scanbar_cost(bar, probes, measure, octree, sparams,
                                  shparams, shparams.rng_seed, camera=camera)
            for bar in bars]


def run_simulated(octree: SceneOctree, config: RunConfig, workers: int,
                  latency: float = 1.0, seed: int = 0,
                  record_trace: bool = False,
                  validate_wire: bool = False) -> RunStats:
    """Run one distributed render on the simulated transport."""
    if workers < 1:
        raise ValueError("need at least one worker")
    transport = SimTransport(latency=latency, seed=seed,
                             record_trace=record_trace,
                             validate_wire=validate_wire)
    ids = list(range(1, workers + 1))
    coord = Coordinator(config, ids)
    nodes = {w: WorkerNode(w, octree, config, peers=workers) for w in ids}
    transport.register(COORDINATOR_ID, coord)
    for w, node in nodes.items():
        transport.register(w, node)
        transport.send(w, COORDINATOR_ID, Hello(w), 0.0)
    transport.run()
    if not coord.finished:
        raise RuntimeError("run ended without completing all work units")
    for cov in coord.covered.values():
        if not cov.all():
            raise RuntimeError("result blocks did not cover the image")

    makespan = max((iv[1] for n in nodes.values()
                    for iv in n.busy_intervals), default=0.0)
    makespan = max(makespan, config.probe_ticks)
    n_frames = len(config.frames)
    return RunStats(
        mode=config.mode,
        workers=workers,
        images=[coord.images[f] for f in range(n_frames)],
        traced=[coord.traced[f] for f in range(n_frames)],
        counters=coord.counters,
        unit_counters=coord.unit_counters,
        unit_worker=dict(coord.unit_worker),
        per_worker_counters=_per_worker(coord),
        busy={w: sum(b - a for a, b in n.busy_intervals)
              for w, n in nodes.items()},
        makespan=makespan,
        probe_ticks=config.probe_ticks,
        ambient_keys={w: (set(n.cache.keys()) if n.cache is not None
                          else set())
                      for w, n in nodes.items()},
        records_relayed=coord.records_relayed,
        transfers=coord.transfers,
        owner_updates=coord.owner_updates,
        trace=transport.trace)


def _per_worker(coord: Coordinator) -> dict[int, TraceCounters]:
    out = {w: TraceCounters() for w in coord.workers}
    for key, counters in coord.unit_counters.items():
        out[coord.unit_worker[key]].merge(counters)
    return out


def make_static_config(octree: SceneOctree, sparams: SamplingParams,
                       shparams: ShadingParams, workers: int,
                       load_balance: bool, probes: int = 5,
                       measure: str = "rays_generated",
                       uniform: bool = False, share_ambient: bool = True,
                       cost_model=default_cost_model) -> RunConfig:
    """Build the static-mode config: probe costs, equalize (or uniform
    partition), and charge the probe ticks as a prefix.  Probes are
    independent pixel traces, so the workers run them in parallel and the
    prefix is the total probe cost divided by the worker count."""
    bars = plan_scanbars(sparams)
    mode = "static_lb" if load_balance else "static"
    if uniform:
        plan = uniform_partition(len(bars), workers)
        return RunConfig(mode, sparams, shparams, share_ambient=share_ambient,
                         cost_model=cost_model, plan=plan,
                         bar_costs=[1.0] * len(bars))
    estimates = probe_costs(octree, sparams, shparams, probes, measure)
    costs = [e.cost for e in estimates]
    plan = equalize(costs, workers)
    ticks = sum(e.rays_cost for e in estimates) / workers
    return RunConfig(mode, sparams, shparams, share_ambient=share_ambient,
                     cost_model=cost_model, plan=plan, bar_costs=costs,
                     probe_ticks=ticks)


def run_static(octree, sparams, shparams, workers, load_balance=False,
               latency=1.0, seed=0, **kw) -> RunStats:
    cfg = make_static_config(octree, sparams, shparams, workers,
                             load_balance,
                             **{k: v for k, v in kw.items()
                                if k in ("probes", "measure", "uniform",
                                         "share_ambient", "cost_model")})
    extra = {k: v for k, v in kw.items()
             if k in ("record_trace", "validate_wire")}
    return run_simulated(octree, cfg, workers, latency, seed, **extra)


def run_dyn_scanbar(octree, sparams, shparams, workers, latency=1.0, seed=0,
                    share_ambient=True, cost_model=default_cost_model,
                    **kw) -> RunStats:
    cfg = RunConfig("dyn_scanbar", sparams, shparams,
                    share_ambient=share_ambient, cost_model=cost_model)
    return run_simulated(octree, cfg, workers, latency, seed, **kw)


def run_dyn_window(octree, sparams, shparams, workers, windows=16,
                   strategy="forward", latency=1.0, seed=0,
                   share_ambient=True, frames=None,
                   cost_model=default_cost_model, **kw) -> RunStats:
    grid = plan_windows(sparams.hres, sparams.yres, windows)
    grid.strategy = strategy
    cfg = RunConfig("dyn_window", sparams, shparams,
                    share_ambient=share_ambient, cost_model=cost_model,
                    grid=grid, frames=frames)
    return run_simulated(octree, cfg, workers, latency, seed, **kw)


def sequential_ticks(result: RenderResult,
                     cost_model=default_cost_model) -> float:
    """Total compute ticks of a sequential render under the cost model."""
    return cost_model(result.counters)


def mean_unit_cost(octree, sparams, shparams,
                   cost_model=default_cost_model) -> float:
    """Mean per-scanbar cost of a reset-mode sequential render, used to set
    the simulated latency relative to the work quantum."""
    result = render_sequential(octree, sparams, shparams)
    bars = plan_scanbars(sparams)
    return cost_model(result.counters) / max(1, len(bars))
