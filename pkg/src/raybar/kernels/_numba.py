"""Numba-jitted intersection kernels (hot path).

Component arithmetic matches kernels._numpy order-for-order so the two
backends are bit-identical.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from ._numpy import DENOM_EPS, PLANE, SPHERE, T_EPS, TRIANGLE


@nb.njit(cache=True, fastmath=False)
def _intersect_loop(ox, oy, oz, dx, dy, dz, types, data, idxs, tested):
    best_t = np.inf
    best_i = -1
    ntests = 0
    for k in range(idxs.shape[0]):
        i = idxs[k]
        if tested[i]:
            continue
        tested[i] = True
        ntests += 1
        ty = types[i]
        tt = np.inf
        if ty == SPHERE:
            ocx = ox - data[i, 0]
            ocy = oy - data[i, 1]
            ocz = oz - data[i, 2]
            b = ocx * dx + ocy * dy + ocz * dz
            c = ocx * ocx + ocy * ocy + ocz * ocz - data[i, 3] * data[i, 3]
            disc = b * b - c
            if disc >= 0.0:
                sq = math.sqrt(disc)
                t0 = -b - sq
                t1 = -b + sq
                if t0 > T_EPS:
                    tt = t0
                elif t1 > T_EPS:
                    tt = t1
        elif ty == PLANE:
            denom = data[i, 3] * dx + data[i, 4] * dy + data[i, 5] * dz
            if abs(denom) > DENOM_EPS:
                num = ((data[i, 0] - ox) * data[i, 3]
                       + (data[i, 1] - oy) * data[i, 4]
                       + (data[i, 2] - oz) * data[i, 5])
                tp = num / denom
                if tp > T_EPS:
                    tt = tp
        else:
            e1x = data[i, 3] - data[i, 0]
            e1y = data[i, 4] - data[i, 1]
            e1z = data[i, 5] - data[i, 2]
            e2x = data[i, 6] - data[i, 0]
            e2y = data[i, 7] - data[i, 1]
            e2z = data[i, 8] - data[i, 2]
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            if abs(det) > DENOM_EPS:
                tx = ox - data[i, 0]
                ty_ = oy - data[i, 1]
                tz = oz - data[i, 2]
                inv = 1.0 / det
                u = (tx * px + ty_ * py + tz * pz) * inv
                qx = ty_ * e1z - tz * e1y
                qy = tz * e1x - tx * e1z
                qz = tx * e1y - ty_ * e1x
                w = (dx * qx + dy * qy + dz * qz) * inv
                t3 = (e2x * qx + e2y * qy + e2z * qz) * inv
                if u >= 0.0 and w >= 0.0 and u + w <= 1.0 and t3 > T_EPS:
                    tt = t3
        if tt < best_t:
            best_t = tt
            best_i = i
    return best_t, best_i, ntests


def intersect_subset(o, d, types, data, idxs, tested):
    t, i, n = _intersect_loop(o[0], o[1], o[2], d[0], d[1], d[2],
                              types, data, idxs, tested)
    if not np.isfinite(t):
        return np.inf, -1, n
    return float(t), int(i), n


@nb.njit(cache=True, fastmath=False)
def _slab(cx, cy, cz, half, ox, oy, oz, ix, iy, iz):
    t0 = -np.inf
    t1 = np.inf
    for ax in range(3):
        if ax == 0:
            c, o, inv = cx, ox, ix
        elif ax == 1:
            c, o, inv = cy, oy, iy
        else:
            c, o, inv = cz, oz, iz
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


@nb.njit(cache=True, fastmath=False)
def _trace_loop(ox, oy, oz, dx, dy, dz, types, data, planes, centers, halves,
                child0, leaf_start, leaf_count, leaf_idx, tested):
    best_t, best_i, ntests = _intersect_loop(ox, oy, oz, dx, dy, dz,
                                             types, data, planes, tested)
    ix = 1.0 / dx if dx != 0.0 else np.inf
    iy = 1.0 / dy if dy != 0.0 else np.inf
    iz = 1.0 / dz if dz != 0.0 else np.inf

    t0, t1 = _slab(centers[0, 0], centers[0, 1], centers[0, 2], halves[0],
                   ox, oy, oz, ix, iy, iz)
    if t1 < T_EPS or t0 > best_t:
        return best_t, best_i, ntests

    stack_node = np.empty(256, dtype=np.int64)
    stack_t = np.empty(256, dtype=np.float64)
    stack_node[0] = 0
    stack_t[0] = t0
    sp = 1
    ce0 = np.empty(8, dtype=np.float64)
    cj = np.empty(8, dtype=np.int64)
    while sp > 0:
        sp -= 1
        nid = stack_node[sp]
        t0 = stack_t[sp]
        if t0 > best_t:
            continue
        c0 = child0[nid]
        if c0 < 0:
            s = leaf_start[nid]
            idxs = leaf_idx[s:s + leaf_count[nid]]
            t, i, n = _intersect_loop(ox, oy, oz, dx, dy, dz, types, data,
                                      idxs, tested)
            ntests += n
            if t < best_t:
                best_t = t
                best_i = i
            continue
        m = 0
        for j in range(8):
            c = c0 + j
            e0, e1 = _slab(centers[c, 0], centers[c, 1], centers[c, 2],
                           halves[c], ox, oy, oz, ix, iy, iz)
            if e1 >= T_EPS and e0 <= best_t:
                # Insertion sort keyed on (entry t, octant index).
                k = m
                while k > 0 and (ce0[k - 1] > e0
                                 or (ce0[k - 1] == e0 and cj[k - 1] > j)):
                    ce0[k] = ce0[k - 1]
                    cj[k] = cj[k - 1]
                    k -= 1
                ce0[k] = e0
                cj[k] = j
                m += 1
        for k in range(m - 1, -1, -1):
            stack_node[sp] = c0 + cj[k]
            stack_t[sp] = ce0[k]
            sp += 1
    return best_t, best_i, ntests


def trace_nearest(o, d, types, data, planes, centers, halves, child0,
                  leaf_start, leaf_count, leaf_idx, tested):
    t, i, n = _trace_loop(float(o[0]), float(o[1]), float(o[2]),
                          float(d[0]), float(d[1]), float(d[2]),
                          types, data, planes, centers, halves, child0,
                          leaf_start, leaf_count, leaf_idx, tested)
    if not np.isfinite(t):
        return np.inf, -1, n
    return float(t), int(i), n
