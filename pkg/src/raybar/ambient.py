"""Octree-indexed cache of local ambient (indirect illumination) values.

The cache is a grow-only set keyed by (origin_worker, sequence): records are
never evicted or updated, so merging broadcast batches is idempotent and
order-independent.  Record fields are rounded through float32 on creation so
the 64-byte wire encoding round-trips bit-exactly and every worker holds
identical values.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolError

log = logging.getLogger(__name__)

RECORD_SIZE = 64
_PACK = struct.Struct("<3f3f3ffIQ")   # 52 bytes + 12 zero padding

MIN_RADIUS = 0.05
MAX_RADIUS = 10.0
NORMAL_AGREEMENT = 0.9
_WEIGHT_EPS = 1e-6


def _f32(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float32).astype(np.float64)


@dataclass(frozen=True)
class AmbientRecord:
    position: np.ndarray
    normal: np.ndarray
    value: np.ndarray
    radius: float
    origin_worker: int
    sequence: int

    @staticmethod
    def make(position, normal, value, radius, origin_worker, sequence):
        if radius <= 0:
            raise ValueError("record radius must be > 0")
        return AmbientRecord(
            _f32(position), _f32(normal), _f32(value),
            float(np.float32(radius)), int(origin_worker), int(sequence))

    @property
    def key(self) -> tuple[int, int]:
        return (self.origin_worker, self.sequence)

    def encode(self) -> bytes:
        raw = _PACK.pack(*self.position, *self.normal, *self.value,
                         self.radius, self.origin_worker, self.sequence)
        return raw + b"\x00" * (RECORD_SIZE - len(raw))


def decode_record(buf: bytes) -> AmbientRecord:
    if len(buf) != RECORD_SIZE:
        raise ProtocolError(
            f"ambient record must be {RECORD_SIZE} bytes, got {len(buf)}")
    vals = _PACK.unpack(buf[:_PACK.size])
    floats = vals[:10]
    if any(math.isnan(v) for v in floats):
        raise ProtocolError("ambient record contains NaN fields")
    radius = float(vals[9])
    if radius <= 0:
        raise ProtocolError("ambient record radius must be > 0")
    return AmbientRecord(
        np.array(vals[0:3]), np.array(vals[3:6]), np.array(vals[6:9]),
        radius, int(vals[10]), int(vals[11]))


encode_record = AmbientRecord.encode


class _Node:
    __slots__ = ("center", "half", "records", "children")

    def __init__(self, center: np.ndarray, half: float):
        self.center = center
        self.half = half
        self.records: list[AmbientRecord] = []
        self.children: dict[int, "_Node"] = {}


class AmbientCache:
    """Grow-only ambient store mirroring the scene octree's root cube."""

    def __init__(self, root_center, root_half: float, owner: int = 0):
        self._root = _Node(np.asarray(root_center, dtype=np.float64),
                           float(root_half))
        self.owner = int(owner)
        self._next_seq = 0
        self._keys: set[tuple[int, int]] = set()

    def __len__(self) -> int:
        return len(self._keys)

    def keys(self) -> set[tuple[int, int]]:
        return set(self._keys)

    def records(self):
        stack = [self._root]
        while stack:
            n = stack.pop()
            yield from n.records
            stack.extend(n.children.values())

    def next_sequence(self) -> int:
        seq = self._next_seq
        self._next_seq += 1
        return seq

    def insert(self, record: AmbientRecord) -> bool:
        """Insert; returns False when the (worker, sequence) key is a duplicate."""
        if record.key in self._keys:
            return False
        self._keys.add(record.key)
        node = self._root
        p = record.position
        if np.any(np.abs(p - node.center) > node.half):
            log.debug("ambient record %s outside root cube; kept at root",
                      record.key)
            node.records.append(record)
            return True
        while node.half / 2.0 >= record.radius:
            ch = node.half / 2.0
            oct_i = ((1 if p[0] > node.center[0] else 0)
                     | (2 if p[1] > node.center[1] else 0)
                     | (4 if p[2] > node.center[2] else 0))
            child = node.children.get(oct_i)
            if child is None:
                signs = np.array([1.0 if oct_i & (1 << ax) else -1.0
                                  for ax in range(3)])
                child = _Node(node.center + signs * ch, ch)
                node.children[oct_i] = child
            node = child
        node.records.append(record)
        return True

    def lookup(self, point, normal, error_tolerance: float):
        """Distance/normal-weighted mean of qualifying records, or None."""
        point = np.asarray(point, dtype=np.float64)
        normal = np.asarray(normal, dtype=np.float64)
        contrib: list[tuple[tuple[int, int], float, np.ndarray]] = []
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node is not self._root:
                # Non-root records have radius <= node.half, so a node whose
                # cube is farther than half * tolerance cannot contribute.
                d = np.maximum(np.abs(point - node.center) - node.half, 0.0)
                if math.sqrt(float(d @ d)) > node.half * error_tolerance:
                    continue
            for rec in node.records:
                dist = float(np.linalg.norm(point - rec.position))
                ndot = float(normal @ rec.normal)
                if dist < rec.radius * error_tolerance and ndot > NORMAL_AGREEMENT:
                    w = 1.0 / (dist / rec.radius
                               + math.sqrt(max(0.0, 1.0 - ndot)) + _WEIGHT_EPS)
                    contrib.append((rec.key, w, rec.value))
            stack.extend(node.children.values())
        if not contrib:
            return None
        # Sum in canonical key order so results are independent of the order
        # records were merged in (broadcast merges are unordered).
        contrib.sort(key=lambda c: c[0])
        wsum = 0.0
        vsum = np.zeros(3)
        for _, w, v in contrib:
            wsum += w
            vsum = vsum + w * v
        return vsum / wsum

    def node_of(self, record: AmbientRecord):
        """(center, half) of the node holding `record` (placement oracle hook)."""
        stack = [self._root]
        while stack:
            n = stack.pop()
            if any(r.key == record.key for r in n.records):
                return n.center.copy(), n.half
            stack.extend(n.children.values())
        return None
