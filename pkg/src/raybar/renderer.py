"""Sequential rendering paths and the per-scanbar work-unit machinery.

The scanbar unit here is the exact unit the distributed workers execute, so
the reset-mode sequential render and any distributed scanbar run perform the
same per-unit operations in the same per-unit order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambient import AmbientCache
from .counters import TraceCounters
from .octree import SceneOctree
from .quincunx import (SamplingParams, Scanbar, ScanlineColors,
                       fill_scanbar_interior, plan_scanbars, render_scanline,
                       responsibility_rows, trace_scanline_reset,
                       unit_block_range)
from .shading import Shader, ShadingParams


def fresh_cache(octree: SceneOctree, owner: int = 0) -> AmbientCache:
    # Shading points can land on unbounded planes well outside the geometry
    # bounds, so the cache root cube is padded generously beyond the scene's.
    half = 4.0 * octree.root.half + 1.0
    return AmbientCache(octree.root.center, half, owner=owner)


@dataclass
class ScanbarUnit:
    """One scanbar's rendering state: its own counters, shader, and rows."""
    k: int
    bars: list[Scanbar]
    sparams: SamplingParams
    counters: TraceCounters
    tracer: object
    lines: dict[int, ScanlineColors] = field(default_factory=dict)
    interior: list[ScanlineColors] = field(default_factory=list)
    filled: bool = False

    @staticmethod
    def create(k, bars, sparams, octree, shparams, ambient, frame=0,
               record_sink=None, camera=None):
        counters = TraceCounters()
        shader = Shader(octree, shparams, counters, ambient, record_sink)
        tracer = shader.make_tracer(sparams.hres, sparams.yres, frame,
                                    camera=camera)
        return ScanbarUnit(k, bars, sparams, counters, tracer)

    def trace_boundaries(self):
        """Trace this scanbar's responsibility scanlines, each from a fresh
        density vector.  Returns them in trace order."""
        out = []
        for y in responsibility_rows(self.k, self.bars):
            sc = trace_scanline_reset(y, self.sparams, self.tracer)
            self.lines[y] = sc
            out.append(sc)
        return out

    def fill(self, top: ScanlineColors, bottom: ScanlineColors):
        self.interior = fill_scanbar_interior(self.bars[self.k], top, bottom,
                                              self.sparams, self.tracer)
        self.filled = True
        return self.interior

    def block_rows(self) -> tuple[int, list[ScanlineColors]]:
        """(first row, rows) this unit reports; tiles the image across units."""
        lo, hi = unit_block_range(self.k, self.bars)
        by_y = dict(self.lines)
        for sc in self.interior:
            by_y[sc.y] = sc
        return lo, [by_y[y] for y in range(lo, hi + 1)]


@dataclass
class RenderResult:
    image: np.ndarray                 # (yres, hres, 3) float32
    traced: np.ndarray                # (yres, hres) bool
    counters: TraceCounters
    per_scanbar_primary: list[int]
    per_scanbar_rays: list[int]
    per_scanbar_tests: list[int]


def _blank(sparams: SamplingParams):
    image = np.zeros((sparams.yres, sparams.hres, 3), dtype=np.float32)
    traced = np.zeros((sparams.yres, sparams.hres), dtype=bool)
    return image, traced


def _write_row(image, traced, sc: ScanlineColors):
    image[sc.y] = sc.colors
    traced[sc.y] = sc.traced


def render_sequential(octree: SceneOctree, sparams: SamplingParams,
                      shparams: ShadingParams, frame: int = 0,
                      ambient: AmbientCache | None = None,
                      ambient_scope: str = "unit",
                      camera=None) -> RenderResult:
    """Reset-mode sequential render: per-scanbar density reset and per-unit
    ambient scope (unless a persistent cache is supplied with scope
    'persistent').  This is the mode distributed scanbar runs reproduce
    exactly."""
    bars = plan_scanbars(sparams)
    image, traced = _blank(sparams)
    units: list[ScanbarUnit] = []
    lines: dict[int, ScanlineColors] = {}

    def unit_cache(k):
        if ambient_scope == "persistent":
            return ambient if ambient is not None else _persistent
        return fresh_cache(octree)

    _persistent = fresh_cache(octree)

    def fill_unit(k):
        u = units[k]
        bar = bars[k]
        u.fill(lines[bar.y0], lines[bar.y1])
        for sc in u.interior:
            _write_row(image, traced, sc)

    for k in range(len(bars)):
        unit = ScanbarUnit.create(k, bars, sparams, octree, shparams,
                                  unit_cache(k), frame, camera=camera)
        units.append(unit)
        for sc in unit.trace_boundaries():
            lines[sc.y] = sc
            _write_row(image, traced, sc)
        if k >= 1:
            fill_unit(k - 1)
    fill_unit(len(bars) - 1)

    counters = TraceCounters()
    for u in units:
        counters.merge(u.counters)
    return RenderResult(
        image, traced, counters,
        [u.counters.primary for u in units],
        [u.counters.rays_total() for u in units],
        [u.counters.intersection_tests for u in units])


def render_sequential_carried(octree: SceneOctree, sparams: SamplingParams,
                              shparams: ShadingParams, frame: int = 0,
                              ambient: AmbientCache | None = None,
                              camera=None) -> RenderResult:
    """Classic single-process render: the shared scanline is computed once and
    the density vector is carried across the whole image top to bottom."""
    bars = plan_scanbars(sparams)
    image, traced = _blank(sparams)
    cache = ambient if ambient is not None else fresh_cache(octree)
    counters = TraceCounters()
    shader = Shader(octree, shparams, counters, cache)
    tracer = shader.make_tracer(sparams.hres, sparams.yres, frame,
                                camera=camera)
    density = sparams.fresh_density()

    per_primary, per_rays, per_tests = [], [], []
    prev_bottom: ScanlineColors | None = None
    for bar in bars:
        snap = counters.copy()
        if prev_bottom is None:
            top = render_scanline(bar.y0, sparams, density, tracer)
            _write_row(image, traced, top)
        else:
            top = prev_bottom
        bottom = render_scanline(bar.y1, sparams, density, tracer)
        _write_row(image, traced, bottom)
        for sc in fill_scanbar_interior(bar, top, bottom, sparams, tracer):
            _write_row(image, traced, sc)
        prev_bottom = bottom
        d = counters.delta_since(snap)
        per_primary.append(d.primary)
        per_rays.append(d.rays_total())
        per_tests.append(d.intersection_tests)
    return RenderResult(image, traced, counters, per_primary, per_rays,
                        per_tests)


def local_sampling_params(w: int, h: int, sparams: SamplingParams) -> SamplingParams | None:
    """Sampling params for a standalone w-by-h block, steps clamped to fit.
    None means the block is degenerate (a single row or column): trace all."""
    if w < 2 or h < 2:
        return None
    return SamplingParams(
        hres=w, yres=h,
        xstep=min(sparams.xstep, w - 1),
        ystep=min(sparams.ystep, h - 1),
        tolerance=sparams.tolerance,
        initial_density=sparams.initial_density)


def render_block(w: int, h: int, sparams: SamplingParams, tracer):
    """Standalone quincunx render of a w-by-h block with local lattice and a
    tracer already mapped to global pixel coordinates."""
    colors = np.zeros((h, w, 3), dtype=np.float32)
    traced = np.zeros((h, w), dtype=bool)
    local = local_sampling_params(w, h, sparams)
    if local is None:
        for y in range(h):
            for x in range(w):
                colors[y, x] = tracer(x, y)
                traced[y, x] = True
        return colors, traced
    bars = plan_scanbars(local)
    lines: dict[int, ScanlineColors] = {}
    for k, bar in enumerate(bars):
        if k == 0:
            lines[bar.y0] = trace_scanline_reset(bar.y0, local, tracer)
        lines[bar.y1] = trace_scanline_reset(bar.y1, local, tracer)
    for sc in lines.values():
        colors[sc.y] = sc.colors
        traced[sc.y] = sc.traced
    for bar in bars:
        for sc in fill_scanbar_interior(bar, lines[bar.y0], lines[bar.y1],
                                        local, tracer):
            colors[sc.y] = sc.colors
            traced[sc.y] = sc.traced
    return colors, traced
