"""Static partition planning: scanbar cost probes, equalization, windows."""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass

import numpy as np

from .counters import TraceCounters
from .octree import SceneOctree
from .quincunx import SamplingParams, Scanbar
from .shading import Shader, ShadingParams, pixel_seed

MEASURES = ("rays_generated", "intersection_tests")


@dataclass
class CostEstimate:
    scanbar: int
    measure: str
    probe_count: int
    cost: float
    rays_cost: float = 0.0         # always in rays, for probe tick accounting


def estimate_scanbar_cost(bar: Scanbar, probe_count: int, measure: str,
                          octree: SceneOctree, sparams: SamplingParams,
                          shparams: ShadingParams, rng_seed: int,
                          camera=None) -> CostEstimate:
    """Cost probe: trace `probe_count` primary rays through random pixels of
    the scanbar with full shading recursion.  The ambient cache is disabled so
    estimates do not depend on rendering order."""
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    rng = random.Random(pixel_seed(rng_seed, 0, bar.index, 0x9e3779))
    counters = TraceCounters()
    shader = Shader(octree, shparams, counters, ambient=None)
    tracer = shader.make_tracer(sparams.hres, sparams.yres, camera=camera)
    for _ in range(probe_count):
        x = rng.randrange(sparams.hres)
        y = rng.randrange(bar.y0, bar.y1 + 1)
        tracer(x, y)
    cost = (counters.rays_total() if measure == "rays_generated"
            else counters.intersection_tests)
    return CostEstimate(bar.index, measure, probe_count, float(cost),
                        float(counters.rays_total()))


@dataclass
class PartitionPlan:
    p: int
    boundaries: list[int]          # p+1 scanbar indices, 0 .. scanbar count
    costs: list[float]             # per-partition summed cost

    def partitions(self) -> list[range]:
        return [range(self.boundaries[i], self.boundaries[i + 1])
                for i in range(self.p)]

    def max_cost(self) -> float:
        return max(self.costs)

    def validate(self, n: int) -> None:
        b = self.boundaries
        if len(b) != self.p + 1 or b[0] != 0 or b[-1] != n:
            raise ValueError("boundaries must run 0 .. scanbar count")
        if any(b[i] >= b[i + 1] for i in range(self.p)):
            raise ValueError("partitions must be non-empty and increasing")


def _plan_costs(costs, bounds) -> list[float]:
    return [float(sum(costs[bounds[i]:bounds[i + 1]]))
            for i in range(len(bounds) - 1)]


def uniform_partition(n: int, p: int) -> PartitionPlan:
    if p < 1 or p > n:
        raise ValueError("need 1 <= p <= scanbar count")
    bounds = [round(i * n / p) for i in range(p + 1)]
    for i in range(1, p + 1):           # enforce non-empty partitions
        bounds[i] = max(bounds[i], bounds[i - 1] + 1)
    bounds[p] = n
    return PartitionPlan(p, bounds, [0.0] * p)


def _greedy_bounds(prefix, n, p, capacity):
    """Pack partitions left to right, each taking the longest run whose cost
    stays within `capacity` while leaving one scanbar per remaining
    partition.  Returns the boundary list, or None if the capacity is too
    small to cover everything."""
    limit_slack = 1e-12 * (1.0 + abs(capacity))
    bounds = [0]
    for j in range(p):
        start = bounds[-1]
        hi = n - (p - j - 1)
        end = bisect.bisect_right(prefix, prefix[start] + capacity
                                  + limit_slack, start + 1, hi + 1) - 1
        if end < start + 1:
            return None
        bounds.append(end)
    return bounds if bounds[-1] == n else None


def equalize(costs, p: int) -> PartitionPlan:
    """Iterative equalization of partition boundaries.

    The bottleneck capacity is bisected over the achievable contiguous-run
    sums, re-flowing all boundaries greedily at each trial, until the
    smallest feasible bottleneck is found.  A final boundary-sliding pass
    then smooths the secondary imbalance (sum of squared partition costs)
    without raising the bottleneck."""
    n = len(costs)
    if p < 1 or p > n:
        raise ValueError("need 1 <= p <= number of scanbars")
    costs = [float(c) for c in costs]
    if any(c < 0 for c in costs):
        raise ValueError("costs must be >= 0")

    prefix = [0.0]
    for c in costs:
        prefix.append(prefix[-1] + c)

    # Candidate bottlenecks are the sums of contiguous scanbar runs; the
    # optimum max partition cost is always one of them.
    candidates = sorted({prefix[j] - prefix[i]
                         for i in range(n) for j in range(i + 1, n + 1)})
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _greedy_bounds(prefix, n, p, candidates[mid]) is None:
            lo = mid + 1
        else:
            hi = mid
    bounds = _greedy_bounds(prefix, n, p, candidates[lo])

    def objective(b):
        cs = _plan_costs(costs, b)
        return (max(cs), sum(c * c for c in cs))

    best = objective(bounds)
    for _ in range(10 * n):
        improved = False
        for i in range(1, p):
            for step in (-1, 1):
                cand = list(bounds)
                cand[i] += step
                if not cand[i - 1] < cand[i] < cand[i + 1]:
                    continue
                obj = objective(cand)
                if obj < best:
                    bounds, best = cand, obj
                    improved = True
        if not improved:
            break
    return PartitionPlan(p, bounds, _plan_costs(costs, bounds))


@dataclass(frozen=True)
class Window:
    index: int
    row: int
    col: int
    x0: int
    y0: int
    width: int
    height: int


@dataclass
class WindowGrid:
    rows: int
    cols: int
    windows: list[Window]
    strategy: str = "forward"
    seed: int = 0


def plan_windows(hres: int, yres: int, target: int) -> WindowGrid:
    """Uniform window tiling: a near-square grid of round(sqrt(target)) rows
    and columns; the last row/column absorbs the division remainder."""
    if not 1 <= target <= hres * yres:
        raise ValueError("window target must lie in [1, pixel count]")
    side = max(1, round(math.sqrt(target)))
    cols = min(side, hres)
    rows = min(side, yres)
    base_w = hres // cols
    base_h = yres // rows
    windows = []
    for r in range(rows):
        y0 = r * base_h
        h = (yres - y0) if r == rows - 1 else base_h
        for c in range(cols):
            x0 = c * base_w
            w = (hres - x0) if c == cols - 1 else base_w
            windows.append(Window(len(windows), r, c, x0, y0, w, h))
    return WindowGrid(rows, cols, windows)


def select_next_window(pool: list[Window], strategy: str,
                       rng: random.Random) -> Window | None:
    """Remove and return the next window per the selection strategy."""
    if not pool:
        return None
    if strategy == "forward":
        w = min(pool, key=lambda w: (w.row, w.col))
    elif strategy == "backward":
        w = max(pool, key=lambda w: (w.row, w.col))
    elif strategy == "random":
        w = pool[rng.randrange(len(pool))]
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    pool.remove(w)
    return w
