"""Pure-numpy intersection kernels (fallback path).

Arithmetic is written component-wise in the same order as the numba kernels so
both backends produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

T_EPS = 1e-6
DENOM_EPS = 1e-12

SPHERE = 0
PLANE = 1
TRIANGLE = 2


def intersect_subset(o, d, types, data, idxs, tested):
    """Nearest hit of ray (o, d) against the primitives listed in `idxs`.

    Primitives already flagged in `tested` are skipped; fresh ones are flagged.
    Returns (t, object_index, tests_performed) with t = inf on miss.
    """
    if idxs.size == 0:
        return np.inf, -1, 0
    fresh = idxs[~tested[idxs]]
    n = fresh.size
    if n == 0:
        return np.inf, -1, 0
    tested[fresh] = True

    ox, oy, oz = o[0], o[1], o[2]
    dx, dy, dz = d[0], d[1], d[2]
    t = np.full(n, np.inf)
    ty = types[fresh]
    dat = data[fresh]

    m = ty == SPHERE
    if m.any():
        s = dat[m]
        ocx = ox - s[:, 0]
        ocy = oy - s[:, 1]
        ocz = oz - s[:, 2]
        b = ocx * dx + ocy * dy + ocz * dz
        c = ocx * ocx + ocy * ocy + ocz * ocz - s[:, 3] * s[:, 3]
        disc = b * b - c
        ts = np.full(s.shape[0], np.inf)
        hitm = disc >= 0.0
        if hitm.any():
            sq = np.sqrt(disc[hitm])
            t0 = -b[hitm] - sq
            t1 = -b[hitm] + sq
            pick = np.where(t0 > T_EPS, t0, np.where(t1 > T_EPS, t1, np.inf))
            ts[hitm] = pick
        t[m] = ts

    m = ty == PLANE
    if m.any():
        p = dat[m]
        denom = p[:, 3] * dx + p[:, 4] * dy + p[:, 5] * dz
        num = ((p[:, 0] - ox) * p[:, 3] + (p[:, 1] - oy) * p[:, 4]
               + (p[:, 2] - oz) * p[:, 5])
        with np.errstate(divide="ignore", invalid="ignore"):
            tp = np.where(np.abs(denom) > DENOM_EPS, num / denom, np.inf)
        t[m] = np.where(tp > T_EPS, tp, np.inf)

    m = ty == TRIANGLE
    if m.any():
        v = dat[m]
        e1x = v[:, 3] - v[:, 0]
        e1y = v[:, 4] - v[:, 1]
        e1z = v[:, 5] - v[:, 2]
        e2x = v[:, 6] - v[:, 0]
        e2y = v[:, 7] - v[:, 1]
        e2z = v[:, 8] - v[:, 2]
        px = dy * e2z - dz * e2y
        py = dz * e2x - dx * e2z
        pz = dx * e2y - dy * e2x
        det = e1x * px + e1y * py + e1z * pz
        tx = ox - v[:, 0]
        ty_ = oy - v[:, 1]
        tz = oz - v[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(np.abs(det) > DENOM_EPS, 1.0 / det, 0.0)
        u = (tx * px + ty_ * py + tz * pz) * inv
        qx = ty_ * e1z - tz * e1y
        qy = tz * e1x - tx * e1z
        qz = tx * e1y - ty_ * e1x
        w = (dx * qx + dy * qy + dz * qz) * inv
        tt = (e2x * qx + e2y * qy + e2z * qz) * inv
        ok = ((np.abs(det) > DENOM_EPS) & (u >= 0.0) & (w >= 0.0)
              & (u + w <= 1.0) & (tt > T_EPS))
        t[m] = np.where(ok, tt, np.inf)

    k = int(np.argmin(t))
    best = t[k]
    if not np.isfinite(best):
        return np.inf, -1, n
    return float(best), int(fresh[k]), n


def _slab(cx, cy, cz, half, ox, oy, oz, ix, iy, iz):
    """Entry/exit parameters of a ray against an axis-aligned cube.
    Returns (inf, -inf) when the ray misses a parallel slab."""
    t0 = -np.inf
    t1 = np.inf
    for c, o, inv in ((cx, ox, ix), (cy, oy, iy), (cz, oz, iz)):
        if inv == np.inf or inv == -np.inf:
            if abs(o - c) > half:
                return np.inf, -np.inf
            continue
        lo = (c - half - o) * inv
        hi = (c + half - o) * inv
        if lo > hi:
            lo, hi = hi, lo
        if lo > t0:
            t0 = lo
        if hi < t1:
            t1 = hi
    return t0, t1


def trace_nearest(o, d, types, data, planes, centers, halves, child0,
                  leaf_start, leaf_count, leaf_idx, tested):
    """Nearest hit via flattened-octree traversal.

    Unbounded primitives in `planes` are always tested first; bounded ones
    are reached through the node arrays.  Children are visited in ascending
    entry-parameter order (ties by octant index) with best-t pruning.
    Returns (t, object_index, tests_performed).
    """
    best_t, best_i, ntests = intersect_subset(o, d, types, data, planes,
                                              tested)
    ox, oy, oz = float(o[0]), float(o[1]), float(o[2])
    dx, dy, dz = float(d[0]), float(d[1]), float(d[2])
    ix = 1.0 / dx if dx != 0.0 else np.inf
    iy = 1.0 / dy if dy != 0.0 else np.inf
    iz = 1.0 / dz if dz != 0.0 else np.inf

    t0, t1 = _slab(centers[0, 0], centers[0, 1], centers[0, 2], halves[0],
                   ox, oy, oz, ix, iy, iz)
    if t1 < T_EPS or t0 > best_t:
        return best_t, best_i, ntests
    stack = [(0, t0)]
    while stack:
        nid, t0 = stack.pop()
        if t0 > best_t:
            continue
        c0 = child0[nid]
        if c0 < 0:
            s = leaf_start[nid]
            idxs = leaf_idx[s:s + leaf_count[nid]]
            t, i, n = intersect_subset(o, d, types, data, idxs, tested)
            ntests += n
            if t < best_t:
                best_t, best_i = t, i
            continue
        near = []
        for j in range(8):
            c = c0 + j
            e0, e1 = _slab(centers[c, 0], centers[c, 1], centers[c, 2],
                           halves[c], ox, oy, oz, ix, iy, iz)
            if e1 >= T_EPS and e0 <= best_t:
                near.append((e0, j, c))
        near.sort()
        for e0, _j, c in reversed(near):
            stack.append((c, e0))
    return best_t, best_i, ntests
