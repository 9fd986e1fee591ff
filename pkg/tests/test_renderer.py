"""Sequential render paths and the scanbar work unit."""

import numpy as np
import pytest

from raybar.quincunx import SamplingParams, plan_scanbars
from raybar.renderer import (ScanbarUnit, fresh_cache, local_sampling_params,
                             render_block, render_sequential,
                             render_sequential_carried)
from raybar.shading import ShadingParams


def sparams():
    return SamplingParams(hres=32, yres=32, xstep=4, ystep=3, tolerance=0.05)


def shparams():
    return ShadingParams(ambient_bounces=0, rng_seed=0)


def test_reset_mode_is_deterministic(box_octree):
    a = render_sequential(box_octree, sparams(), shparams())
    b = render_sequential(box_octree, sparams(), shparams())
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.traced, b.traced)
    assert a.counters == b.counters


def test_reset_and_carried_modes_agree_on_traced_pixels(box_octree):
    # Both modes fully define every pixel and trace at least the lattice.
    reset = render_sequential(box_octree, sparams(), shparams())
    carried = render_sequential_carried(box_octree, sparams(), shparams())
    assert reset.image.shape == carried.image.shape
    # Colors agree exactly wherever both modes traced the pixel.
    both = reset.traced & carried.traced
    assert both.any()
    assert np.array_equal(reset.image[both], carried.image[both])


def test_per_scanbar_counters_sum_to_total(box_octree):
    result = render_sequential(box_octree, sparams(), shparams())
    assert sum(result.per_scanbar_primary) == result.counters.primary
    assert sum(result.per_scanbar_rays) == result.counters.rays_total()
    assert sum(result.per_scanbar_tests) == result.counters.intersection_tests


def test_image_is_float32_and_finite(box_octree):
    result = render_sequential(box_octree, sparams(), shparams())
    assert result.image.dtype == np.float32
    assert np.isfinite(result.image).all()
    assert (result.image >= 0).all()


def test_scanbar_unit_block_rows_tile(box_octree):
    params = sparams()
    bars = plan_scanbars(params)
    seen = []
    lines = {}
    units = []
    for k in range(len(bars)):
        unit = ScanbarUnit.create(k, bars, params, box_octree, shparams(),
                                  fresh_cache(box_octree))
        units.append(unit)
        for sc in unit.trace_boundaries():
            lines[sc.y] = sc
    for k, unit in enumerate(units):
        unit.fill(lines[bars[k].y0], lines[bars[k].y1])
        lo, rows = unit.block_rows()
        seen.extend(range(lo, lo + len(rows)))
    assert sorted(seen) == list(range(params.yres))


def test_local_sampling_params_clamp():
    params = sparams()
    local = local_sampling_params(6, 4, params)
    assert local.xstep == 4 and local.ystep == 3
    tight = local_sampling_params(3, 3, params)
    assert tight.xstep == 2 and tight.ystep == 2
    assert local_sampling_params(1, 5, params) is None
    assert local_sampling_params(5, 1, params) is None


def test_render_block_degenerate_traces_all(box_octree):
    shader_params = shparams()
    from raybar.shading import Shader
    from raybar.counters import TraceCounters
    shader = Shader(box_octree, shader_params, TraceCounters())
    tracer = shader.make_tracer(32, 32)
    colors, traced = render_block(5, 1, sparams(), tracer)
    assert traced.all()
    assert colors.shape == (1, 5, 3)


def test_render_block_covers_window(box_octree):
    from raybar.shading import Shader
    from raybar.counters import TraceCounters
    shader = Shader(box_octree, shparams(), TraceCounters())
    tracer = shader.make_tracer(32, 32)
    colors, traced = render_block(16, 12, sparams(), tracer)
    assert colors.shape == (12, 16, 3)
    assert traced.any()
    assert np.isfinite(colors).all()


def test_fresh_cache_covers_shading_points(box_octree):
    cache = fresh_cache(box_octree)
    # The cache cube must comfortably contain the box scene's walls.
    assert cache._root.half >= 4.0 * box_octree.root.half
