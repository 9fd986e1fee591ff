"""Scene representation and the line-based scene file format.

Geometry is stored structure-of-arrays (type codes + a flat parameter table)
so the intersection kernels can run over it directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SceneParseError, SceneValidationError
from .kernels import PLANE, SPHERE, TRIANGLE

_UNIT_EPS = 1e-9


def _vec(*xs) -> np.ndarray:
    return np.array(xs, dtype=np.float64)


def normalize(v: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(v @ v))
    if n == 0.0:
        raise SceneValidationError("zero-length vector cannot be normalized")
    return v / n


@dataclass
class Material:
    albedo: np.ndarray
    specularity: float
    emission: np.ndarray

    def validate(self) -> None:
        if np.any(self.albedo < 0) or np.any(self.albedo > 1):
            raise SceneValidationError("albedo channels must lie in [0, 1]")
        if not 0.0 <= self.specularity <= 1.0:
            raise SceneValidationError("specularity must lie in [0, 1]")
        if np.any(self.emission < 0):
            raise SceneValidationError("emission channels must be >= 0")


@dataclass
class Light:
    position: np.ndarray
    intensity: np.ndarray


@dataclass
class Camera:
    eye: np.ndarray
    look: np.ndarray
    up: np.ndarray
    fov_deg: float

    def basis(self):
        forward = normalize(self.look - self.eye)
        right = normalize(np.cross(forward, self.up))
        upv = np.cross(right, forward)
        return forward, right, upv

    def ray_through(self, x: int, y: int, hres: int, yres: int):
        """Primary-ray origin/direction through pixel center (x, y)."""
        forward, right, upv = self.basis()
        half = math.tan(math.radians(self.fov_deg) / 2.0)
        aspect = hres / yres
        px = (2.0 * (x + 0.5) / hres - 1.0) * half * aspect
        py = (1.0 - 2.0 * (y + 0.5) / yres) * half
        return self.eye.copy(), normalize(forward + px * right + py * upv)


DEFAULT_CAMERA = Camera(_vec(0, 0, -5), _vec(0, 0, 0), _vec(0, 1, 0), 45.0)

_DATA_WIDTH = 9


@dataclass
class Scene:
    types: np.ndarray          # int8 type codes
    data: np.ndarray           # (n, 9) float64 primitive parameters
    mat_index: np.ndarray      # int32 per object
    materials: list[Material]
    lights: list[Light]
    camera: Camera
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray

    @property
    def nobjects(self) -> int:
        return len(self.types)

    def normal_at(self, obj: int, point: np.ndarray, ray_dir: np.ndarray) -> np.ndarray:
        """Face-forward unit normal of object `obj` at `point`."""
        ty = self.types[obj]
        d = self.data[obj]
        if ty == SPHERE:
            n = normalize(point - d[0:3])
        elif ty == PLANE:
            n = d[3:6].copy()
        else:
            n = normalize(np.cross(d[3:6] - d[0:3], d[6:9] - d[0:3]))
        if float(n @ ray_dir) > 0.0:
            n = -n
        return n


class SceneBuilder:
    def __init__(self):
        self._types: list[int] = []
        self._data: list[np.ndarray] = []
        self._mats: list[int] = []
        self.materials: list[Material] = []
        self.lights: list[Light] = []
        self.camera: Camera | None = None

    def add_material(self, albedo, specularity, emission) -> int:
        m = Material(_vec(*albedo), float(specularity), _vec(*emission))
        m.validate()
        self.materials.append(m)
        return len(self.materials) - 1

    def _add(self, ty: int, params: np.ndarray, mat: int) -> None:
        row = np.zeros(_DATA_WIDTH)
        row[: len(params)] = params
        self._types.append(ty)
        self._data.append(row)
        self._mats.append(int(mat))

    def add_sphere(self, center, radius, mat: int) -> None:
        if radius <= 0:
            raise SceneValidationError("sphere radius must be > 0")
        self._add(SPHERE, _vec(*center, radius), mat)

    def add_plane(self, point, normal, mat: int) -> None:
        n = normalize(_vec(*normal))
        self._add(PLANE, np.concatenate([_vec(*point), n]), mat)

    def add_triangle(self, v0, v1, v2, mat: int) -> None:
        self._add(TRIANGLE, _vec(*v0, *v1, *v2), mat)

    def add_light(self, position, intensity) -> None:
        self.lights.append(Light(_vec(*position), _vec(*intensity)))

    def set_camera(self, eye, look, up, fov_deg) -> None:
        self.camera = Camera(_vec(*eye), _vec(*look), _vec(*up), float(fov_deg))

    def build(self) -> Scene:
        n = len(self._types)
        types = np.array(self._types, dtype=np.int8)
        data = (np.stack(self._data) if n else np.zeros((0, _DATA_WIDTH)))
        mats = np.array(self._mats, dtype=np.int32)
        for i in range(n):
            if not 0 <= mats[i] < len(self.materials):
                raise SceneValidationError(
                    f"object {i} references material {mats[i]} "
                    f"but only {len(self.materials)} materials are defined")
        lo, hi = _bounds(types, data)
        return Scene(types, data, mats, self.materials, self.lights,
                     self.camera or DEFAULT_CAMERA, lo, hi)


def _bounds(types: np.ndarray, data: np.ndarray):
    """Axis-aligned bounds over bounded primitives (planes are unbounded)."""
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for i in range(len(types)):
        d = data[i]
        if types[i] == SPHERE:
            lo = np.minimum(lo, d[0:3] - d[3])
            hi = np.maximum(hi, d[0:3] + d[3])
        elif types[i] == TRIANGLE:
            verts = d[0:9].reshape(3, 3)
            lo = np.minimum(lo, verts.min(axis=0))
            hi = np.maximum(hi, verts.max(axis=0))
    if not np.all(np.isfinite(lo)):
        # Empty scene (or planes only): unit cube centered at the origin.
        lo = _vec(-0.5, -0.5, -0.5)
        hi = _vec(0.5, 0.5, 0.5)
    return lo, hi


def parse_scene(text: str) -> Scene:
    """Parse the whitespace-separated, one-entity-per-line scene format."""
    b = SceneBuilder()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind, args = fields[0], fields[1:]
        try:
            vals = [float(a) for a in args]
        except ValueError as exc:
            raise SceneParseError(line_no, f"bad numeric field: {exc}") from None
        try:
            if kind == "material":
                _expect(line_no, kind, vals, 8)
                if int(vals[0]) != len(b.materials):
                    raise SceneParseError(
                        line_no, f"material id {int(vals[0])} out of order "
                                 f"(expected {len(b.materials)})")
                b.add_material(vals[1:4], vals[4], vals[5:8])
            elif kind == "sphere":
                _expect(line_no, kind, vals, 5)
                b.add_sphere(vals[0:3], vals[3], int(vals[4]))
            elif kind == "plane":
                _expect(line_no, kind, vals, 7)
                b.add_plane(vals[0:3], vals[3:6], int(vals[6]))
            elif kind == "triangle":
                _expect(line_no, kind, vals, 10)
                b.add_triangle(vals[0:3], vals[3:6], vals[6:9], int(vals[9]))
            elif kind == "light":
                _expect(line_no, kind, vals, 6)
                b.add_light(vals[0:3], vals[3:6])
            elif kind == "camera":
                _expect(line_no, kind, vals, 10)
                b.set_camera(vals[0:3], vals[3:6], vals[6:9], vals[9])
            else:
                raise SceneParseError(line_no, f"unknown entity '{kind}'")
        except SceneValidationError as exc:
            raise SceneValidationError(f"line {line_no}: {exc}") from None
    return b.build()


def _expect(line_no: int, kind: str, vals: list, want: int) -> None:
    if len(vals) != want:
        raise SceneParseError(
            line_no, f"'{kind}' takes {want} numeric fields, got {len(vals)}")
