"""Shared fixtures: scenes and octrees are built once per session."""

import numpy as np
import pytest

from raybar.octree import build_octree
from raybar.quincunx import SamplingParams
from raybar.scenes import build_box, build_empty, build_peaks
from raybar.shading import ShadingParams


@pytest.fixture(scope="session")
def box_octree():
    return build_octree(build_box())


@pytest.fixture(scope="session")
def peaks_octree():
    return build_octree(build_peaks())


@pytest.fixture(scope="session")
def empty_octree():
    return build_octree(build_empty())


@pytest.fixture
def small_sparams():
    return SamplingParams(hres=32, yres=32, xstep=4, ystep=3, tolerance=0.05)


@pytest.fixture
def shparams():
    return ShadingParams(ambient_bounces=0, rng_seed=0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    """Show one PASS/FAIL line per acceptance criterion after the run."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_rays(n: int, seed: int = 0):
    """Unit-direction rays with origins in a cube around the test scenes."""
    rng = np.random.default_rng(seed)
    origins = rng.uniform(-4.0, 4.0, size=(n, 3))
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs
