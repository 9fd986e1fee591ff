"""Scene octree: spatial index and instrumented ray intersection.

Bounded primitives (spheres, triangles) are indexed in the tree; an object is
inserted into every child cube it overlaps.  Planes are unbounded and live in
a separate always-tested list.  A per-ray tested mask ensures each primitive
is tested at most once per ray, which keeps counter totals meaningful.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import kernels
from .counters import TraceCounters
from .kernels import PLANE, SPHERE, TRIANGLE
from .scene import Scene

# Incremented by every build_octree call; reset_build_count() for tests.
build_count = 0


def reset_build_count() -> None:
    global build_count
    build_count = 0


@dataclass
class Hit:
    point: np.ndarray
    normal: np.ndarray
    obj: int
    distance: float


@dataclass
class _Node:
    center: np.ndarray
    half: float
    depth: int
    indices: np.ndarray | None = None        # leaf payload
    children: list | None = None             # 8 children when internal

    @property
    def is_leaf(self) -> bool:
        return self.children is None


_OCTANT_SIGNS = np.array(
    [[x, y, z] for z in (-1, 1) for y in (-1, 1) for x in (-1, 1)],
    dtype=np.float64)


def _sphere_overlaps_cube(c, r, cube_c, half) -> bool:
    d = np.maximum(np.abs(c - cube_c) - half, 0.0)
    return float(d @ d) <= r * r


def _plane_overlaps_cube(p, n, cube_c, half) -> bool:
    dist = float(n @ (cube_c - p))
    extent = half * (abs(n[0]) + abs(n[1]) + abs(n[2]))
    return abs(dist) <= extent


def _tri_overlaps_cube(verts, cube_c, half) -> bool:
    """Separating axis test between a triangle and an axis-aligned cube."""
    v = verts - cube_c
    # Box face normals.
    for ax in range(3):
        if v[:, ax].min() > half or v[:, ax].max() < -half:
            return False
    e = np.array([v[1] - v[0], v[2] - v[1], v[0] - v[2]])
    n = np.cross(e[0], e[1])
    # Triangle plane.
    d = float(n @ v[0])
    extent = half * (abs(n[0]) + abs(n[1]) + abs(n[2]))
    if abs(d) > extent:
        return False
    # 9 edge cross-product axes.
    for i in range(3):
        for ax in range(3):
            axis = np.zeros(3)
            axis[ax] = 1.0
            a = np.cross(e[i], axis)
            proj = v @ a
            ra = half * (abs(a[0]) + abs(a[1]) + abs(a[2]))
            if proj.min() > ra or proj.max() < -ra:
                return False
    return True


@dataclass
class _FlatTree:
    """Array form of the node tree consumed by the traversal kernels.

    `child0[n]` is the index of node n's first child (its 8 children are
    contiguous) or -1 for a leaf; leaves slice `leaf_idx` via
    `leaf_start`/`leaf_count`.
    """
    centers: np.ndarray
    halves: np.ndarray
    child0: np.ndarray
    leaf_start: np.ndarray
    leaf_count: np.ndarray
    leaf_idx: np.ndarray


def _flatten(root: _Node) -> _FlatTree:
    # Breadth-first numbering keeps each node's 8 children contiguous.
    nodes: list[_Node] = []
    queue = deque([root])
    while queue:
        n = queue.popleft()
        nodes.append(n)
        if not n.is_leaf:
            queue.extend(n.children)
    count = len(nodes)
    centers = np.empty((count, 3), dtype=np.float64)
    halves = np.empty(count, dtype=np.float64)
    child0 = np.full(count, -1, dtype=np.int64)
    leaf_start = np.zeros(count, dtype=np.int64)
    leaf_count = np.zeros(count, dtype=np.int64)
    ids = {id(n): k for k, n in enumerate(nodes)}
    chunks: list[np.ndarray] = []
    pos = 0
    for k, n in enumerate(nodes):
        centers[k] = n.center
        halves[k] = n.half
        if n.is_leaf:
            leaf_start[k] = pos
            leaf_count[k] = n.indices.size
            chunks.append(n.indices)
            pos += n.indices.size
        else:
            child0[k] = ids[id(n.children[0])]
    leaf_idx = (np.concatenate(chunks) if chunks
                else np.empty(0, dtype=np.int64))
    return _FlatTree(centers, halves, child0, leaf_start, leaf_count, leaf_idx)


@dataclass
class SceneOctree:
    scene: Scene
    root: _Node
    unbounded: np.ndarray      # plane indices, always tested
    max_depth: int
    leaf_capacity: int
    flat: _FlatTree

    def intersect(self, origin: np.ndarray, direction: np.ndarray,
                  counters: TraceCounters) -> Hit | None:
        """Nearest positive-distance hit, counting every primitive test."""
        scene = self.scene
        tested = np.zeros(scene.nobjects, dtype=np.bool_)
        f = self.flat
        best_t, best_i, n = kernels.trace_nearest(
            origin, direction, scene.types, scene.data, self.unbounded,
            f.centers, f.halves, f.child0, f.leaf_start, f.leaf_count,
            f.leaf_idx, tested)
        counters.intersection_tests += n
        if best_i < 0:
            return None
        point = origin + best_t * direction
        normal = scene.normal_at(best_i, point, direction)
        return Hit(point, normal, int(best_i), float(best_t))

    def depth(self) -> int:
        def go(n):
            if n.is_leaf:
                return n.depth
            return max(go(c) for c in n.children)
        return go(self.root)

    def leaves(self):
        stack = [self.root]
        while stack:
            n = stack.pop()
            if n.is_leaf:
                yield n
            else:
                stack.extend(n.children)


def _overlaps(scene: Scene, i: int, cube_c, half) -> bool:
    d = scene.data[i]
    ty = scene.types[i]
    if ty == SPHERE:
        return _sphere_overlaps_cube(d[0:3], d[3], cube_c, half)
    if ty == TRIANGLE:
        return _tri_overlaps_cube(d[0:9].reshape(3, 3), cube_c, half)
    return _plane_overlaps_cube(d[0:3], d[3:6], cube_c, half)


def build_octree(scene: Scene, max_depth: int = 8,
                 leaf_capacity: int = 4) -> SceneOctree:
    if max_depth < 1 or leaf_capacity < 1:
        raise ValueError("max_depth and leaf_capacity must be >= 1")
    global build_count
    build_count += 1

    bounded = [i for i in range(scene.nobjects) if scene.types[i] != PLANE]
    unbounded = np.array(
        [i for i in range(scene.nobjects) if scene.types[i] == PLANE],
        dtype=np.int64)

    center = (scene.bounds_lo + scene.bounds_hi) / 2.0
    half = float(np.max(scene.bounds_hi - scene.bounds_lo)) / 2.0
    half = max(half, 0.5) * (1.0 + 1e-9)

    def subdivide(node: _Node, idxs: list[int]) -> None:
        if len(idxs) <= leaf_capacity or node.depth >= max_depth:
            node.indices = np.array(sorted(idxs), dtype=np.int64)
            return
        node.children = []
        ch = node.half / 2.0
        for signs in _OCTANT_SIGNS:
            cc = node.center + signs * ch
            child = _Node(cc, ch, node.depth + 1)
            sub = [i for i in idxs if _overlaps(scene, i, cc, ch)]
            node.children.append(child)
            subdivide(child, sub)

    root = _Node(np.asarray(center, dtype=np.float64), half, 0)
    subdivide(root, bounded)
    return SceneOctree(scene, root, unbounded, max_depth, leaf_capacity,
                       _flatten(root))
