"""Bundled test scenes and the .anim camera-track format.

Three desk-scale scenes:
- box: a closed room with two matte spheres and a ceiling light; bounced
  light makes it the ambient-cache workout.
- peaks: stacked mirror slabs under a cloud of small occluders; per-pixel
  cost rises sharply toward the top of the frame, so the per-scanbar cost
  profile is strongly skewed.  Used for the partitioning and load-balancing
  benchmarks.
- empty: no geometry, no lights.
"""

from __future__ import annotations

import numpy as np

from .errors import SceneParseError
from .scene import Camera, Scene, SceneBuilder, _vec

BUILTIN_SCENES = ("box", "peaks", "empty")


def build_box() -> Scene:
    b = SceneBuilder()
    white = b.add_material((0.75, 0.75, 0.75), 0.0, (0, 0, 0))
    red = b.add_material((0.75, 0.15, 0.15), 0.0, (0, 0, 0))
    green = b.add_material((0.15, 0.75, 0.15), 0.0, (0, 0, 0))
    blue = b.add_material((0.3, 0.35, 0.8), 0.0, (0, 0, 0))
    shiny = b.add_material((0.6, 0.6, 0.6), 0.35, (0, 0, 0))
    b.add_plane((0, -1, 0), (0, 1, 0), white)      # floor
    b.add_plane((0, 1, 0), (0, -1, 0), white)      # ceiling
    b.add_plane((0, 0, 2), (0, 0, -1), white)      # back
    b.add_plane((-1.5, 0, 0), (1, 0, 0), red)      # left
    b.add_plane((1.5, 0, 0), (-1, 0, 0), green)    # right
    b.add_sphere((-0.6, -0.6, 1.0), 0.4, blue)
    b.add_sphere((0.6, -0.65, 0.6), 0.35, shiny)
    b.add_light((0, 0.85, 0.5), (6, 6, 6))
    b.set_camera((0, 0, -4), (0, 0, 1), (0, 1, 0), 40)
    return b.build()


def build_peaks() -> Scene:
    b = SceneBuilder()
    mirror = b.add_material((0.8, 0.8, 0.85), 0.7, (0, 0, 0))
    grey = b.add_material((0.5, 0.5, 0.5), 0.0, (0, 0, 0))
    # Horizontal mirror slabs, thicker and denser toward the top of the
    # frame: rows crossing a slab pay for a specular bounce plus shadow rays
    # to four lights, so the per-scanbar cost profile is strongly skewed.
    bands = [(2.7, 0.5), (2.0, 0.4), (1.35, 0.35), (0.8, 0.3),
             (0.1, 0.25), (-1.0, 0.2), (-2.3, 0.2)]
    for yc, hh in bands:
        x0, x1, z = -3.2, 3.2, 1.0
        v = [(x0, yc - hh, z), (x1, yc - hh, z),
             (x1, yc + hh, z), (x0, yc + hh, z)]
        b.add_triangle(v[0], v[1], v[2], mirror)
        b.add_triangle(v[0], v[2], v[3], mirror)
    # A fixed cloud of small occluders between the slabs and the overhead
    # lights keeps shadow rays expensive and spatially varied.
    rng = np.random.default_rng(7)
    for _ in range(30):
        b.add_sphere((rng.uniform(-1.6, 1.6), rng.uniform(3.4, 3.9),
                      rng.uniform(-1.2, 0.2)), 0.09, grey)
    for lx, ly in ((-2, 4.6), (0, 5.0), (2, 4.6), (0, -4)):
        b.add_light((lx, ly, -2), (25, 25, 25))
    b.set_camera((0, 0, -5), (0, 0, 1), (0, 1, 0), 55)
    return b.build()


def build_empty() -> Scene:
    return SceneBuilder().build()


def get_builtin(name: str) -> Scene:
    if name == "box":
        return build_box()
    if name == "peaks":
        return build_peaks()
    if name == "empty":
        return build_empty()
    raise ValueError(f"unknown builtin scene {name!r}; "
                     f"choose from {BUILTIN_SCENES}")


def parse_anim(text: str) -> list[Camera]:
    """One camera per frame: `camera ex ey ez lx ly lz ux uy uz fov`."""
    frames: list[Camera] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] != "camera" or len(fields) != 11:
            raise SceneParseError(
                line_no, "animation frames must be "
                         "'camera ex ey ez lx ly lz ux uy uz fov'")
        try:
            v = [float(a) for a in fields[1:]]
        except ValueError as exc:
            raise SceneParseError(line_no, f"bad numeric field: {exc}") from None
        frames.append(Camera(_vec(*v[0:3]), _vec(*v[3:6]), _vec(*v[6:9]),
                             v[9]))
    if not frames:
        raise SceneParseError(0, "animation file has no frames")
    return frames
