"""Radiance evaluation: direct lighting, mirror recursion, cached indirect.

Pixel RNG streams are seeded from hash(seed, frame, x, y) so a pixel's color
is independent of evaluation order, which distributed bit-equality relies on.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .ambient import AmbientRecord, AmbientCache, MAX_RADIUS, MIN_RADIUS
from .counters import TraceCounters
from .octree import SceneOctree

_M64 = (1 << 64) - 1
_SHADOW_EPS = 1e-6


@dataclass
class ShadingParams:
    max_specular_depth: int = 3
    ambient_divisions: int = 16
    ambient_error_tolerance: float = 1.0
    ambient_bounces: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_specular_depth < 0:
            raise ValueError("max_specular_depth must be >= 0")
        if self.ambient_divisions < 1:
            raise ValueError("ambient_divisions must be >= 1")
        if self.ambient_error_tolerance <= 0:
            raise ValueError("ambient_error_tolerance must be > 0")
        if self.ambient_bounces < 0:
            raise ValueError("ambient_bounces must be >= 0")


def _splitmix(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def pixel_seed(seed: int, frame: int, x: int, y: int) -> int:
    h = seed & _M64
    for v in (frame, x, y):
        h = _splitmix((h ^ (v & _M64)) & _M64)
    return h


def _onb(n: np.ndarray):
    a = np.zeros(3)
    a[int(np.argmin(np.abs(n)))] = 1.0
    t = np.cross(a, n)
    t = t / math.sqrt(float(t @ t))
    b = np.cross(n, t)
    return t, b


class Shader:
    """Per-render shading context bound to one ambient cache and counter set."""

    def __init__(self, octree: SceneOctree, params: ShadingParams,
                 counters: TraceCounters, ambient: AmbientCache | None = None,
                 record_sink: list | None = None):
        self.octree = octree
        self.scene = octree.scene
        self.params = params
        self.counters = counters
        self.ambient = ambient
        self.record_sink = record_sink

    def make_tracer(self, hres: int, yres: int, frame: int = 0, camera=None):
        """Pixel tracer f(x, y) -> float32 rgb for the quincunx sampler."""
        camera = camera if camera is not None else self.scene.camera

        def trace(x: int, y: int) -> np.ndarray:
            rng = random.Random(pixel_seed(self.params.rng_seed, frame, x, y))
            o, d = camera.ray_through(x, y, hres, yres)
            col, _ = self._shade(o, d, "primary", 0,
                                 self.params.ambient_bounces, rng)
            return col.astype(np.float32)

        return trace

    def shade(self, origin, direction, kind, depth, bounces, rng):
        col, _ = self._shade(np.asarray(origin, dtype=np.float64),
                             np.asarray(direction, dtype=np.float64),
                             kind, depth, bounces, rng)
        return col

    def _shade(self, origin, direction, kind, depth, bounces, rng):
        self.counters.count_ray(kind)
        hit = self.octree.intersect(origin, direction, self.counters)
        if hit is None:
            return np.zeros(3), math.inf
        mat = self.scene.materials[self.scene.mat_index[hit.obj]]
        col = mat.emission.copy()
        col += mat.albedo * self._direct(hit.point, hit.normal)
        if mat.specularity > 0.0 and depth < self.params.max_specular_depth:
            refl = direction - 2.0 * float(direction @ hit.normal) * hit.normal
            sub, _ = self._shade(hit.point, refl, "specular", depth + 1,
                                 bounces, rng)
            col += mat.specularity * sub
        if bounces > 0:
            col += mat.albedo * self.indirect(hit.point, hit.normal, depth,
                                              bounces, rng)
        return col, hit.distance

    def _direct(self, point, normal):
        total = np.zeros(3)
        for light in self.scene.lights:
            toward = light.position - point
            d2 = float(toward @ toward)
            if d2 == 0.0:
                continue
            dist = math.sqrt(d2)
            ldir = toward / dist
            cos = float(normal @ ldir)
            if cos <= 0.0:
                continue
            self.counters.count_ray("shadow")
            occ = self.octree.intersect(point, ldir, self.counters)
            if occ is not None and occ.distance < dist - _SHADOW_EPS:
                continue
            total += cos / (math.pi * d2) * light.intensity
        return total

    def indirect(self, point, normal, depth, bounces, rng):
        """Cached hemisphere gather of indirect illumination."""
        if bounces <= 0:
            return np.zeros(3)
        if self.ambient is not None:
            cached = self.ambient.lookup(point, normal,
                                         self.params.ambient_error_tolerance)
            if cached is not None:
                return cached
        n = self.params.ambient_divisions
        t, b = _onb(normal)
        acc = np.zeros(3)
        inv_dist_sum = 0.0
        hits = 0
        for j in range(n):
            u1 = (j + rng.random()) / n
            u2 = rng.random()
            r = math.sqrt(u1)
            phi = 2.0 * math.pi * u2
            local = (r * math.cos(phi), r * math.sin(phi), math.sqrt(1.0 - u1))
            d = local[0] * t + local[1] * b + local[2] * normal
            col, dist = self._shade(point, d, "ambient", depth + 1,
                                    bounces - 1, rng)
            acc += col
            if math.isfinite(dist):
                hits += 1
                inv_dist_sum += 1.0 / dist
        value = acc / n
        if self.ambient is not None:
            radius = (hits / inv_dist_sum) if inv_dist_sum > 0 else MAX_RADIUS
            radius = min(max(radius, MIN_RADIUS), MAX_RADIUS)
            rec = AmbientRecord.make(point, normal, value, radius,
                                     self.ambient.owner,
                                     self.ambient.next_sequence())
            self.ambient.insert(rec)
            if self.record_sink is not None:
                self.record_sink.append(rec)
        return value
