"""Quincunx adaptive sampling: scanbars, scanlines, and recursive fill.

A scanline traces a lattice of sample-boundary pixels (shifted by half a step
on odd rows, giving the quincunx pattern) and fills each sample interior by a
recursive trace-or-interpolate rule driven by the ray density state.  Scanbar
interiors are filled by the same recursion applied vertically per column.

In reset mode every boundary scanline starts from a fresh density vector and
ambient state is scoped per scanbar, which makes each scanbar's traced-pixel
set and colors a pure function of the scene and parameters.  That is what
lets distributed runs reproduce the sequential result bit for bit regardless
of which worker renders which scanbar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SamplingParams:
    hres: int
    yres: int
    xstep: int = 4
    ystep: int = 4
    tolerance: float = 0.05
    initial_density: float = 0.0

    def __post_init__(self):
        if self.xstep < 1 or self.ystep < 1:
            raise ValueError("xstep and ystep must be >= 1")
        if not self.xstep < self.hres:
            raise ValueError("xstep must be < hres")
        if not self.ystep < self.yres:
            raise ValueError("ystep must be < yres")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if not 0.0 <= self.initial_density <= 1.0:
            raise ValueError("initial_density must lie in [0, 1]")

    def density_entries(self) -> int:
        return math.ceil((self.hres - 1) / self.xstep)

    def fresh_density(self) -> np.ndarray:
        return np.full(self.density_entries(), self.initial_density)


@dataclass(frozen=True)
class Scanbar:
    index: int
    y0: int
    y1: int
    shares_first_scanline: bool


@dataclass
class ScanlineColors:
    y: int
    colors: np.ndarray                # (hres, 3) float32
    traced: np.ndarray                # (hres,) bool

    @staticmethod
    def blank(y: int, hres: int) -> "ScanlineColors":
        return ScanlineColors(y, np.zeros((hres, 3), dtype=np.float32),
                              np.zeros(hres, dtype=bool))


def plan_scanbars(params: SamplingParams) -> list[Scanbar]:
    count = math.ceil((params.yres - 1) / params.ystep)
    bars = []
    for k in range(count):
        y0 = k * params.ystep
        y1 = min((k + 1) * params.ystep, params.yres - 1)
        bars.append(Scanbar(k, y0, y1, shares_first_scanline=k > 0))
    return bars


def colordiff(a, b) -> float:
    """Per-channel relative color difference, max over channels."""
    diff = 0.0
    for c in range(3):
        ac = float(a[c])
        bc = float(b[c])
        diff = max(diff, abs(ac - bc) / max(1.0, max(ac, bc)))
    return diff


def _lerp(a, b, f: float) -> np.ndarray:
    return (a.astype(np.float64)
            + (b.astype(np.float64) - a.astype(np.float64)) * f
            ).astype(np.float32)


def fill_segment(lo: int, hi: int, density: float, get, put, trace_at,
                 tolerance: float) -> float | None:
    """Recursive trace-or-interpolate fill of positions strictly between
    lo and hi.  Returns the segment's resulting density (1 traced, 0
    interpolated) or None when there is nothing to fill."""
    if hi - lo <= 1:
        return None
    c = (lo + hi) // 2
    if colordiff(get(lo), get(hi)) > tolerance or density > 0.0:
        trace_at(c)
        result = 1.0
    else:
        put(c, _lerp(get(lo), get(hi), (c - lo) / (hi - lo)))
        result = 0.0
    # Sub-segments inherit half of the density passed in, not the result.
    fill_segment(lo, c, density / 2.0, get, put, trace_at, tolerance)
    fill_segment(c, hi, density / 2.0, get, put, trace_at, tolerance)
    return result


def boundary_positions(y: int, params: SamplingParams) -> list[int]:
    """Always-traced lattice pixels of scanline y.  Odd scanlines shift the
    interior boundaries right by half a step; pixels 0 and hres-1 are traced
    on every scanline."""
    hres, xstep = params.hres, params.xstep
    if y % 2 == 0:
        xs = set(range(0, hres - 1, xstep))
    else:
        shift = xstep // 2
        xs = {0} | set(range(shift, hres - 1, xstep))
    xs.add(hres - 1)
    return sorted(xs)


def render_scanline(y: int, params: SamplingParams, density: np.ndarray,
                    tracer) -> ScanlineColors:
    """Trace the lattice pixels of scanline y and fill sample interiors,
    updating the density vector with each sample's top-level result."""
    sc = ScanlineColors.blank(y, params.hres)

    def trace(x: int) -> None:
        sc.colors[x] = tracer(x, y)
        sc.traced[x] = True

    def put(x: int, col: np.ndarray) -> None:
        sc.colors[x] = col

    bpos = boundary_positions(y, params)
    for x in bpos:
        trace(x)
    for xl, xr in zip(bpos, bpos[1:]):
        si = xl // params.xstep
        res = fill_segment(xl, xr, float(density[si]),
                           lambda i: sc.colors[i], put, trace,
                           params.tolerance)
        if res is not None:
            density[si] = res
    return sc


def trace_scanline_reset(y: int, params: SamplingParams, tracer) -> ScanlineColors:
    """Scanline traced from a fresh density vector (reset-mode protocol)."""
    return render_scanline(y, params, params.fresh_density(), tracer)


def fill_scanbar_interior(bar: Scanbar, top: ScanlineColors,
                          bottom: ScanlineColors, params: SamplingParams,
                          tracer) -> list[ScanlineColors]:
    """Vertical per-column fill of the scanbar's interior scanlines."""
    if top.y != bar.y0 or bottom.y != bar.y1:
        raise ValueError("boundary scanlines do not match the scanbar")
    height = bar.y1 - bar.y0
    if height <= 1:
        return []
    rows = [top] + [ScanlineColors.blank(bar.y0 + i, params.hres)
                    for i in range(1, height)] + [bottom]

    for x in range(params.hres):
        def get(i):
            return rows[i].colors[x]

        def put(i, col):
            rows[i].colors[x] = col

        def trace(i):
            rows[i].colors[x] = tracer(x, bar.y0 + i)
            rows[i].traced[x] = True

        fill_segment(0, height, params.initial_density, get, put, trace,
                     params.tolerance)
    return rows[1:-1]


# ---------------------------------------------------------------------------
# Boundary-scanline responsibility under the reset-mode protocol.
#
# Each boundary scanline is traced exactly once image-wide.  Scanbar 0's
# owner traces both of its scanlines (the first scanbar of the image renders
# its own last scanline and ships it to the next scanbar's owner); every
# later scanbar's owner traces its own first scanline, and the last scanbar's
# owner also traces the final image row.

def responsibility_rows(k: int, bars: list[Scanbar]) -> list[int]:
    rows = []
    if k == 0:
        rows.append(bars[0].y0)
        rows.append(bars[0].y1)
    else:
        if k >= 2:
            rows.append(bars[k].y0)
        if k == len(bars) - 1:
            rows.append(bars[k].y1)
    return rows


def consumer_scanbar(y: int, bars: list[Scanbar]) -> int | None:
    """Scanbar (other than the tracer's own) that consumes scanline y."""
    if len(bars) > 1 and y == bars[1].y0:
        return 1
    for k in range(2, len(bars)):
        if y == bars[k].y0:
            return k - 1
    return None


def unit_block_range(k: int, bars: list[Scanbar]) -> tuple[int, int]:
    """Inclusive row range scanbar k's owner reports in its ResultBlock.
    Unions of these ranges tile the image exactly."""
    bar = bars[k]
    lo = bar.y0 if (k == 0 or k >= 2) else bar.y0 + 1
    hi = bar.y1 if (k == 0 or k == len(bars) - 1) else bar.y1 - 1
    return lo, hi
