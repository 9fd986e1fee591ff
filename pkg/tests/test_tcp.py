"""TCP transport equivalence with the simulated transport."""

import numpy as np

from raybar.distrib import RunConfig
from raybar.quincunx import SamplingParams
from raybar.renderer import render_sequential
from raybar.runner import run_dyn_scanbar, run_dyn_window
from raybar.shading import ShadingParams
from raybar.tcp import run_tcp, zero_cost


def sparams():
    return SamplingParams(hres=32, yres=32, xstep=4, ystep=3, tolerance=0.05)


def shparams():
    return ShadingParams(ambient_bounces=0, rng_seed=0)


def test_tcp_scanbar_image_matches_sim_and_sequential(box_octree):
    cfg = RunConfig("dyn_scanbar", sparams(), shparams(),
                    share_ambient=False)
    coord, nodes, wall = run_tcp(box_octree, cfg, workers=2)
    assert coord.finished and wall >= 0.0
    sim = run_dyn_scanbar(box_octree, sparams(), shparams(), 2, latency=1.0,
                          seed=0, share_ambient=False)
    seq = render_sequential(box_octree, sparams(), shparams())
    assert np.array_equal(coord.images[0], sim.image)
    assert np.array_equal(coord.images[0], seq.image)
    assert coord.counters.primary == seq.counters.primary


def test_tcp_window_mode_completes(box_octree):
    from raybar.partition import plan_windows
    grid = plan_windows(32, 32, 4)
    cfg = RunConfig("dyn_window", sparams(), shparams(), share_ambient=False,
                    grid=grid)
    coord, _nodes, _wall = run_tcp(box_octree, cfg, workers=2)
    assert coord.finished
    sim = run_dyn_window(box_octree, sparams(), shparams(), 2, windows=4,
                         latency=1.0, seed=0, share_ambient=False)
    assert np.array_equal(coord.images[0], sim.image)


def test_tcp_ambient_sharing_consistent_at_shutdown(box_octree):
    cfg = RunConfig("dyn_scanbar", sparams(),
                    ShadingParams(ambient_bounces=1, ambient_divisions=4,
                                  rng_seed=0))
    coord, nodes, _wall = run_tcp(box_octree, cfg, workers=2)
    assert coord.finished
    keysets = [n.cache.keys() for n in nodes.values()]
    assert keysets[0] == keysets[1]
    assert len(keysets[0]) > 0


def test_zero_cost_model():
    assert zero_cost(None) == 0.0
