"""Deterministic discrete-event message transport.

Entities (a coordinator and workers) exchange messages through a simulated
network.  Delivery order is a deterministic function of send time, a seeded
per-message jitter, and a global sequence number, with FIFO order preserved
per sender-receiver pair.  Entity handlers return further (dst, msg,
send_time) triples, which keeps the whole protocol single-threaded and
replayable tick for tick.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

from .errors import ProtocolError
from .messages import decode_message, encode_message


@dataclass(order=True)
class _Event:
    deliver_time: float
    jitter: float
    seq: int
    src: int = field(compare=False)
    dst: int = field(compare=False)
    msg: object = field(compare=False)


@dataclass
class TraceEntry:
    time: float
    src: int
    dst: int
    msg_type: str


class SimTransport:
    """Seeded discrete-event network with per-pair FIFO delivery."""

    def __init__(self, latency: float = 1.0, seed: int = 0,
                 record_trace: bool = False, validate_wire: bool = False):
        if latency < 0:
            raise ValueError("latency must be >= 0")
        self.latency = latency
        self._rng = random.Random(seed)
        self._heap: list[_Event] = []
        self._seq = 0
        self._entities: dict[int, object] = {}
        self._last_key: dict[tuple[int, int], tuple[float, float, int]] = {}
        self.now = 0.0
        self.delivered = 0
        self.trace: list[TraceEntry] | None = [] if record_trace else None
        self.validate_wire = validate_wire

    def register(self, entity_id: int, entity) -> None:
        if entity_id in self._entities:
            raise ValueError(f"entity {entity_id} already registered")
        self._entities[entity_id] = entity

    def send(self, src: int, dst: int, msg, send_time: float) -> None:
        if dst not in self._entities:
            raise ProtocolError(f"send to unknown entity {dst}")
        if self.validate_wire and not type(msg).__name__ == "NextUnit":
            msg = decode_message(encode_message(msg))
        deliver = send_time + self.latency
        jitter = self._rng.random()
        self._seq += 1
        key = (deliver, jitter, self._seq)
        # FIFO per (src, dst): never deliver before the pair's previous key.
        prev = self._last_key.get((src, dst))
        if prev is not None and key < prev:
            key = (prev[0], prev[1], self._seq)
        self._last_key[(src, dst)] = key
        heapq.heappush(self._heap,
                       _Event(key[0], key[1], key[2], src, dst, msg))

    def run(self, max_events: int = 10_000_000) -> float:
        """Deliver events until the queue drains; returns the final time."""
        while self._heap:
            if self.delivered >= max_events:
                raise ProtocolError("event budget exhausted; likely livelock")
            ev = heapq.heappop(self._heap)
            self.now = max(self.now, ev.deliver_time)
            self.delivered += 1
            if self.trace is not None:
                self.trace.append(TraceEntry(self.now, ev.src, ev.dst,
                                             type(ev.msg).__name__))
            out = self._entities[ev.dst].handle(ev.src, ev.msg, self.now)
            for dst, msg, send_time in out or ():
                self.send(ev.dst, dst, msg, send_time)
        return self.now
