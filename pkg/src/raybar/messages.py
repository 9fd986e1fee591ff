"""Coordinator/worker message types and their binary wire format.

Frame layout: u32 little-endian payload length, u8 message tag, payload.
All integers little-endian; floats IEEE-754 little-endian; pixel colors are
3 x f32.  Tag 13 (Relay) is transport-internal: it lets the star-topology TCP
transport carry worker-to-worker messages through the coordinator.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .ambient import RECORD_SIZE
from .counters import TraceCounters
from .errors import ProtocolError


@dataclass(frozen=True)
class Hello:
    worker_id: int
    capabilities: str = ""


@dataclass(frozen=True)
class AssignScanbars:
    indices: tuple[int, ...]


@dataclass(frozen=True)
class AssignWindow:
    window_index: int
    x0: int
    y0: int
    width: int
    height: int
    frame: int


@dataclass(frozen=True)
class RequestWork:
    worker_id: int


@dataclass(frozen=True)
class TransferHalfDemand:
    target_worker: int


@dataclass(frozen=True)
class TransferredScanbars:
    indices: tuple[int, ...]
    from_worker: int


@dataclass
class ScanlineChunk:
    y: int
    x0: int
    colors: np.ndarray                 # (n, 3) float32

    def __eq__(self, other):
        return (isinstance(other, ScanlineChunk) and self.y == other.y
                and self.x0 == other.x0
                and np.array_equal(self.colors, other.colors))


@dataclass(frozen=True)
class ScanlineOwnerUpdate:
    y: int
    new_owner: int


@dataclass(frozen=True)
class AmbientBatch:
    records: bytes                     # count x 64-byte encoded records

    @property
    def count(self) -> int:
        return len(self.records) // RECORD_SIZE


@dataclass
class ResultBlock:
    unit_kind: str                     # "scanbar" | "window"
    unit_id: int
    frame: int
    x0: int
    y0: int
    width: int
    height: int
    counters: TraceCounters
    pixels: np.ndarray                 # (height, width, 3) float32
    traced: np.ndarray                 # (height, width) uint8

    def __eq__(self, other):
        return (isinstance(other, ResultBlock)
                and (self.unit_kind, self.unit_id, self.frame, self.x0,
                     self.y0, self.width, self.height, self.counters)
                == (other.unit_kind, other.unit_id, other.frame, other.x0,
                    other.y0, other.width, other.height, other.counters)
                and np.array_equal(self.pixels, other.pixels)
                and np.array_equal(self.traced, other.traced))


@dataclass(frozen=True)
class FrameAdvance:
    frame: int


@dataclass(frozen=True)
class Shutdown:
    pass


@dataclass(frozen=True)
class Relay:
    dst: int
    frame_bytes: bytes


TAGS = {
    Hello: 1, AssignScanbars: 2, AssignWindow: 3, RequestWork: 4,
    TransferHalfDemand: 5, TransferredScanbars: 6, ScanlineChunk: 7,
    ScanlineOwnerUpdate: 8, AmbientBatch: 9, ResultBlock: 10,
    FrameAdvance: 11, Shutdown: 12, Relay: 13,
}
_BY_TAG = {v: k for k, v in TAGS.items()}

_KINDS = ("scanbar", "window")
_HEAD = struct.Struct("<IB")


def _encode_payload(msg) -> bytes:
    if isinstance(msg, Hello):
        cap = msg.capabilities.encode("utf-8")
        return struct.pack("<IH", msg.worker_id, len(cap)) + cap
    if isinstance(msg, AssignScanbars):
        return struct.pack(f"<I{len(msg.indices)}I", len(msg.indices),
                           *msg.indices)
    if isinstance(msg, AssignWindow):
        return struct.pack("<6I", msg.window_index, msg.x0, msg.y0,
                           msg.width, msg.height, msg.frame)
    if isinstance(msg, RequestWork):
        return struct.pack("<I", msg.worker_id)
    if isinstance(msg, TransferHalfDemand):
        return struct.pack("<I", msg.target_worker)
    if isinstance(msg, TransferredScanbars):
        return struct.pack(f"<II{len(msg.indices)}I", msg.from_worker,
                           len(msg.indices), *msg.indices)
    if isinstance(msg, ScanlineChunk):
        colors = np.ascontiguousarray(msg.colors, dtype="<f4")
        return struct.pack("<III", msg.y, msg.x0,
                           colors.shape[0]) + colors.tobytes()
    if isinstance(msg, ScanlineOwnerUpdate):
        return struct.pack("<II", msg.y, msg.new_owner)
    if isinstance(msg, AmbientBatch):
        if len(msg.records) % RECORD_SIZE:
            raise ProtocolError("ambient batch not a whole number of records")
        return struct.pack("<I", msg.count) + msg.records
    if isinstance(msg, ResultBlock):
        c = msg.counters
        head = struct.pack("<BII4I5Q", _KINDS.index(msg.unit_kind),
                           msg.unit_id, msg.frame, msg.x0, msg.y0,
                           msg.width, msg.height, c.primary, c.shadow,
                           c.specular, c.ambient, c.intersection_tests)
        pixels = np.ascontiguousarray(msg.pixels, dtype="<f4")
        traced = np.ascontiguousarray(msg.traced, dtype=np.uint8)
        return head + pixels.tobytes() + traced.tobytes()
    if isinstance(msg, FrameAdvance):
        return struct.pack("<I", msg.frame)
    if isinstance(msg, Shutdown):
        return b""
    if isinstance(msg, Relay):
        return struct.pack("<I", msg.dst) + msg.frame_bytes
    raise ProtocolError(f"cannot encode message type {type(msg).__name__}")


def encode_message(msg) -> bytes:
    payload = _encode_payload(msg)
    return _HEAD.pack(len(payload), TAGS[type(msg)]) + payload


def _need(buf: bytes, n: int):
    if len(buf) < n:
        raise ProtocolError("truncated message payload")


def _decode_payload(tag: int, p: bytes):
    cls = _BY_TAG.get(tag)
    if cls is None:
        raise ProtocolError(f"unknown message tag {tag}")
    if cls is Hello:
        _need(p, 6)
        wid, ln = struct.unpack_from("<IH", p)
        _need(p, 6 + ln)
        return Hello(wid, p[6:6 + ln].decode("utf-8"))
    if cls is AssignScanbars:
        _need(p, 4)
        (n,) = struct.unpack_from("<I", p)
        _need(p, 4 + 4 * n)
        return AssignScanbars(struct.unpack_from(f"<{n}I", p, 4))
    if cls is AssignWindow:
        _need(p, 24)
        return AssignWindow(*struct.unpack_from("<6I", p))
    if cls is RequestWork:
        _need(p, 4)
        return RequestWork(*struct.unpack_from("<I", p))
    if cls is TransferHalfDemand:
        _need(p, 4)
        return TransferHalfDemand(*struct.unpack_from("<I", p))
    if cls is TransferredScanbars:
        _need(p, 8)
        frm, n = struct.unpack_from("<II", p)
        _need(p, 8 + 4 * n)
        return TransferredScanbars(struct.unpack_from(f"<{n}I", p, 8), frm)
    if cls is ScanlineChunk:
        _need(p, 12)
        y, x0, n = struct.unpack_from("<III", p)
        _need(p, 12 + 12 * n)
        colors = np.frombuffer(p, dtype="<f4", count=3 * n,
                               offset=12).reshape(n, 3).copy()
        if np.isnan(colors).any():
            raise ProtocolError("scanline chunk contains NaN colors")
        return ScanlineChunk(y, x0, colors)
    if cls is ScanlineOwnerUpdate:
        _need(p, 8)
        return ScanlineOwnerUpdate(*struct.unpack_from("<II", p))
    if cls is AmbientBatch:
        _need(p, 4)
        (n,) = struct.unpack_from("<I", p)
        _need(p, 4 + n * RECORD_SIZE)
        return AmbientBatch(p[4:4 + n * RECORD_SIZE])
    if cls is ResultBlock:
        head = struct.Struct("<BII4I5Q")
        _need(p, head.size)
        (kind, uid, frame, x0, y0, w, h, pr, sh, sp, am,
         it) = head.unpack_from(p)
        if kind >= len(_KINDS):
            raise ProtocolError(f"bad result-block kind {kind}")
        npx = w * h
        _need(p, head.size + 12 * npx + npx)
        pixels = np.frombuffer(p, dtype="<f4", count=3 * npx,
                               offset=head.size).reshape(h, w, 3).copy()
        traced = np.frombuffer(p, dtype=np.uint8, count=npx,
                               offset=head.size + 12 * npx).reshape(h, w).copy()
        return ResultBlock(_KINDS[kind], uid, frame, x0, y0, w, h,
                           TraceCounters(pr, sh, sp, am, it), pixels, traced)
    if cls is FrameAdvance:
        _need(p, 4)
        return FrameAdvance(*struct.unpack_from("<I", p))
    if cls is Shutdown:
        return Shutdown()
    if cls is Relay:
        _need(p, 4)
        (dst,) = struct.unpack_from("<I", p)
        return Relay(dst, p[4:])
    raise ProtocolError(f"unknown message tag {tag}")


def decode_message(frame: bytes):
    """Decode one full frame (length + tag + payload) into a message."""
    if len(frame) < _HEAD.size:
        raise ProtocolError("truncated frame header")
    length, tag = _HEAD.unpack_from(frame)
    if len(frame) != _HEAD.size + length:
        raise ProtocolError("frame length mismatch")
    return _decode_payload(tag, frame[_HEAD.size:])
