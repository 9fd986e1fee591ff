"""Coordinator/worker protocol: all four distribution modes plus animation.

Entities communicate only through messages, so the same logic runs over the
simulated transport and the TCP transport.  Scanline chunks are routed via
the coordinator, which keeps a copy of every chunk it sees; when scanbars
move between workers it re-forwards the stored chunks to the new owner, so
routing stays correct across load-balancing transfers.

Worker compute time is tracked in ticks (default: rays traced).  Workers
process queued scanbars in phases: boundary tracing happens as soon as a
scanbar is dequeued and never waits on the network; interior fills run once
the needed boundary scanlines have arrived.  That makes the protocol
deadlock-free for any assignment order.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .ambient import AmbientCache, RECORD_SIZE, decode_record
from .counters import TraceCounters
from .errors import ProtocolError
from .messages import (AmbientBatch, AssignScanbars, AssignWindow, Hello,
                       FrameAdvance, RequestWork, ResultBlock, ScanlineChunk,
                       ScanlineOwnerUpdate, Shutdown, TransferHalfDemand,
                       TransferredScanbars)
from .partition import PartitionPlan, Window, WindowGrid, select_next_window
from .quincunx import (SamplingParams, Scanbar, ScanlineColors,
                       consumer_scanbar, plan_scanbars, responsibility_rows,
                       trace_scanline_reset)
from .renderer import ScanbarUnit, fresh_cache, render_block
from .shading import Shader, ShadingParams

COORDINATOR_ID = 0
FLUSH_BATCH = 16

SCANBAR_MODES = ("static", "static_lb", "dyn_scanbar")
ALL_MODES = SCANBAR_MODES + ("dyn_window",)


@dataclass(frozen=True)
class NextUnit:
    """Worker self-message chaining its work queue (never on the wire)."""


def default_cost_model(delta: TraceCounters) -> float:
    return float(delta.rays_total())


def needed_lines(k: int, bars: list[Scanbar]) -> list[int]:
    """Boundary scanlines scanbar k's owner must receive from other units."""
    need = []
    if k == 1:
        need.append(bars[1].y0)
    if 1 <= k < len(bars) - 1:
        need.append(bars[k].y1)
    return need


@dataclass
class RunConfig:
    mode: str
    sparams: SamplingParams
    shparams: ShadingParams
    share_ambient: bool = True
    cost_model: object = default_cost_model
    plan: PartitionPlan | None = None          # static modes
    bar_costs: list[float] | None = None       # static_lb donor selection
    grid: WindowGrid | None = None             # window mode
    frames: list | None = None                 # per-frame cameras (None = scene)
    probe_ticks: float = 0.0                   # serial estimation prefix

    def __post_init__(self):
        if self.mode not in ALL_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode in ("static", "static_lb") and self.plan is None:
            raise ValueError("static modes need a partition plan")
        if self.mode == "dyn_window" and self.grid is None:
            raise ValueError("window mode needs a window grid")
        if self.frames is None:
            self.frames = [None]


def _line_chunks(sc: ScanlineColors, xstep: int) -> list[ScanlineChunk]:
    return [ScanlineChunk(sc.y, x0, sc.colors[x0:x0 + xstep].copy())
            for x0 in range(0, len(sc.colors), xstep)]


class _LineAssembler:
    """Accumulates xstep-pixel chunks into complete scanlines."""

    def __init__(self, hres: int):
        self.hres = hres
        self._partial: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def add(self, chunk: ScanlineChunk) -> ScanlineColors | None:
        colors, have = self._partial.setdefault(
            chunk.y, (np.zeros((self.hres, 3), dtype=np.float32),
                      np.zeros(self.hres, dtype=bool)))
        n = chunk.colors.shape[0]
        colors[chunk.x0:chunk.x0 + n] = chunk.colors
        have[chunk.x0:chunk.x0 + n] = True
        if have.all():
            del self._partial[chunk.y]
            return ScanlineColors(chunk.y, colors,
                                  np.zeros(self.hres, dtype=bool))
        return None


class WorkerNode:
    """One rendering worker driven entirely by messages."""

    def __init__(self, worker_id: int, octree, config: RunConfig,
                 peers: int):
        self.id = worker_id
        self.octree = octree
        self.config = config
        self.peers = peers
        self.bars = (plan_scanbars(config.sparams)
                     if config.mode in SCANBAR_MODES else [])
        self.queue: deque = deque()          # scanbar indices or AssignWindow
        self.owned: set[int] = set()         # scanbar indices currently held
        self.units: dict[int, ScanbarUnit] = {}
        self.parked: set[int] = set()
        self.lines: dict[int, ScanlineColors] = {}
        self.assembler = _LineAssembler(config.sparams.hres)
        self.cache: AmbientCache | None = (
            fresh_cache(octree, owner=worker_id)
            if config.share_ambient else None)
        self.pending_records: list = []
        self.mailbox: list = []
        self.busy_until = 0.0
        self.busy_intervals: list[tuple[float, float]] = []
        self.completed_units = 0
        self.units_started = 0
        self._next_scheduled = False
        self._requested = False
        self.done = False

    # -- helpers ----------------------------------------------------------

    def _merge_mailbox(self) -> None:
        if self.cache is not None:
            for rec in self.mailbox:
                self.cache.insert(rec)
        self.mailbox.clear()

    def _unit_cache(self) -> AmbientCache:
        if self.cache is not None:
            return self.cache
        return fresh_cache(self.octree, owner=self.id)

    def _sink(self):
        return self.pending_records if (self.cache is not None
                                        and self.peers > 1) else None

    def _flush(self, t: float, outs: list) -> None:
        while self.pending_records:
            batch = self.pending_records[:FLUSH_BATCH]
            del self.pending_records[:FLUSH_BATCH]
            payload = b"".join(r.encode() for r in batch)
            outs.append((COORDINATOR_ID, AmbientBatch(payload), t))

    def _schedule_next(self, t: float, outs: list) -> None:
        if self.queue and not self._next_scheduled:
            self._next_scheduled = True
            outs.append((self.id, NextUnit(), t))
        elif (not self.queue and not self._requested
              and self.config.mode in ("static_lb", "dyn_scanbar",
                                       "dyn_window")):
            self._requested = True
            outs.append((COORDINATOR_ID, RequestWork(self.id), t))

    def _ready(self, k: int) -> bool:
        bar = self.bars[k]
        return bar.y0 in self.lines and bar.y1 in self.lines

    # -- compute phases ---------------------------------------------------

    def _trace_phase(self, k: int, now: float, outs: list) -> None:
        cfg = self.config
        start = max(self.busy_until, now)
        self._merge_mailbox()
        unit = ScanbarUnit.create(k, self.bars, cfg.sparams, self.octree,
                                  cfg.shparams, self._unit_cache(),
                                  record_sink=self._sink(),
                                  camera=cfg.frames[0])
        self.units[k] = unit
        self.units_started += 1
        t = start
        for y in responsibility_rows(k, self.bars):
            snap = unit.counters.copy()
            sc = trace_scanline_reset(y, cfg.sparams, unit.tracer)
            unit.lines[y] = sc
            self.lines[y] = sc
            t += cfg.cost_model(unit.counters.delta_since(snap))
            consumer = consumer_scanbar(y, self.bars)
            if consumer is not None and consumer not in self.owned:
                for chunk in _line_chunks(sc, cfg.sparams.xstep):
                    outs.append((COORDINATOR_ID, chunk, t))
        self._flush(t, outs)
        self.busy_until = t
        if t > start:
            self.busy_intervals.append((start, t))
        if self._ready(k):
            self._fill_phase(k, t, outs)
        else:
            self.parked.add(k)
        # Lines traced just now may complete earlier parked scanbars too.
        for j in sorted(self.parked):
            if self._ready(j):
                self._fill_phase(j, self.busy_until, outs)

    def _fill_phase(self, k: int, now: float, outs: list) -> None:
        cfg = self.config
        unit = self.units.pop(k)
        self.parked.discard(k)
        start = max(self.busy_until, now)
        self._merge_mailbox()
        bar = self.bars[k]
        snap = unit.counters.copy()
        unit.fill(self.lines[bar.y0], self.lines[bar.y1])
        t = start + cfg.cost_model(unit.counters.delta_since(snap))
        self._flush(t, outs)
        lo, rows = unit.block_rows()
        pixels = np.stack([sc.colors for sc in rows])
        traced = np.stack([sc.traced for sc in rows]).astype(np.uint8)
        outs.append((COORDINATOR_ID,
                     ResultBlock("scanbar", k, 0, 0, lo, cfg.sparams.hres,
                                 len(rows), unit.counters, pixels, traced),
                     t))
        self.busy_until = t
        if t > start:
            self.busy_intervals.append((start, t))
        self.completed_units += 1

    def _window_phase(self, msg: AssignWindow, now: float, outs: list) -> None:
        cfg = self.config
        start = max(self.busy_until, now)
        self._merge_mailbox()
        counters = TraceCounters()
        shader = Shader(self.octree, cfg.shparams, counters,
                        self._unit_cache(), record_sink=self._sink())
        tracer = shader.make_tracer(cfg.sparams.hres, cfg.sparams.yres,
                                    frame=msg.frame,
                                    camera=cfg.frames[msg.frame])

        def local_tracer(x, y):
            return tracer(msg.x0 + x, msg.y0 + y)

        colors, traced = render_block(msg.width, msg.height, cfg.sparams,
                                      local_tracer)
        t = start + cfg.cost_model(counters)
        self._flush(t, outs)
        outs.append((COORDINATOR_ID,
                     ResultBlock("window", msg.window_index, msg.frame,
                                 msg.x0, msg.y0, msg.width, msg.height,
                                 counters, colors, traced.astype(np.uint8)),
                     t))
        self.busy_until = t
        if t > start:
            self.busy_intervals.append((start, t))
        self.completed_units += 1
        self.units_started += 1

    # -- message handling -------------------------------------------------

    def handle(self, src: int, msg, now: float) -> list:
        outs: list = []
        if isinstance(msg, (AssignScanbars, TransferredScanbars)):
            self._requested = False
            for k in msg.indices:
                self.queue.append(k)
                self.owned.add(k)
            self._schedule_next(now, outs)
        elif isinstance(msg, AssignWindow):
            self._requested = False
            self.queue.append(msg)
            self._schedule_next(now, outs)
        elif isinstance(msg, NextUnit):
            self._next_scheduled = False
            if self.queue:
                item = self.queue.popleft()
                if isinstance(item, AssignWindow):
                    self._window_phase(item, now, outs)
                else:
                    self._trace_phase(item, now, outs)
            self._schedule_next(self.busy_until, outs)
        elif isinstance(msg, ScanlineChunk):
            if msg.y not in self.lines:
                sc = self.assembler.add(msg)
                if sc is not None:
                    self.lines[sc.y] = sc
                    for k in sorted(self.parked):
                        if self._ready(k):
                            self._fill_phase(k, now, outs)
        elif isinstance(msg, TransferHalfDemand):
            outs.extend(self._donate(now))
        elif isinstance(msg, AmbientBatch):
            data = msg.records
            for off in range(0, len(data), RECORD_SIZE):
                self.mailbox.append(decode_record(data[off:off + RECORD_SIZE]))
        elif isinstance(msg, ScanlineOwnerUpdate):
            pass                        # routing is coordinator-side
        elif isinstance(msg, FrameAdvance):
            pass                        # frame index travels in AssignWindow
        elif isinstance(msg, Shutdown):
            self._merge_mailbox()
            self.done = True
        else:
            raise ProtocolError(
                f"worker got unexpected {type(msg).__name__}")
        return outs

    def _donate(self, now: float) -> list:
        """Give away half of the unstarted queued scanbars (tail first)."""
        unstarted = [k for k in self.queue if not isinstance(k, AssignWindow)]
        n_move = len(unstarted) // 2
        moved = tuple(unstarted[len(unstarted) - n_move:])
        for k in moved:
            self.queue.remove(k)
            self.owned.discard(k)
        outs = [(COORDINATOR_ID, TransferredScanbars(moved, self.id), now)]
        # Ship any boundary lines the moved scanbars were waiting on that we
        # already hold; the coordinator re-routes them to the new owner.
        sent = set()
        for k in moved:
            for y in needed_lines(k, self.bars):
                if y in self.lines and y not in sent:
                    sent.add(y)
                    for chunk in _line_chunks(self.lines[y],
                                              self.config.sparams.xstep):
                        outs.append((COORDINATOR_ID, chunk, now))
        return outs


@dataclass
class TransferEvent:
    time: float
    donor: int
    recipient: int
    indices: tuple[int, ...]


class Coordinator:
    """Single logical activity: assigns work, routes scanlines and ambient
    batches, assembles result blocks, and shuts the run down."""

    def __init__(self, config: RunConfig, worker_ids: list[int]):
        self.config = config
        self.workers = list(worker_ids)
        self.bars = (plan_scanbars(config.sparams)
                     if config.mode in SCANBAR_MODES else [])
        self.hellos: set[int] = set()
        self.owner: dict[int, int] = {}
        self.holding: dict[int, set[int]] = {w: set() for w in worker_ids}
        self.completed_bars: dict[int, set[int]] = {w: set()
                                                    for w in worker_ids}
        self.last_completed: dict[int, int] = {}
        self.chunk_store: dict[int, list[ScanlineChunk]] = {}
        self.forwarded: set[tuple[int, int]] = set()    # (y, worker)
        self.pool: list[int] = []                        # dyn_scanbar
        self.window_pool: list[Window] = []
        self.frame = 0
        self.pending: list[int] = []
        self.in_flight: dict[int, int] = {}              # donor -> recipient
        self.failed_donors: dict[int, set[int]] = {}
        self.transfers: list[TransferEvent] = []
        self.owner_updates: list[ScanlineOwnerUpdate] = []
        self.records_relayed = 0
        self.completed: set = set()
        self.images: dict[int, np.ndarray] = {}
        self.traced: dict[int, np.ndarray] = {}
        self.covered: dict[int, np.ndarray] = {}
        self.counters = TraceCounters()
        self.unit_counters: dict = {}
        self.unit_worker: dict = {}
        self.last_result_time = 0.0
        self.finished = False
        import random as _random
        self._rng = _random.Random(config.shparams.rng_seed)
        n_frames = len(config.frames)
        for f in range(n_frames):
            self.images[f] = np.zeros(
                (config.sparams.yres, config.sparams.hres, 3),
                dtype=np.float32)
            self.traced[f] = np.zeros(
                (config.sparams.yres, config.sparams.hres), dtype=bool)
            self.covered[f] = np.zeros(
                (config.sparams.yres, config.sparams.hres), dtype=bool)
        if config.mode in SCANBAR_MODES:
            self.total_units = len(self.bars)
        else:
            self.total_units = len(config.grid.windows) * n_frames

    # -- assignment -------------------------------------------------------

    def _start(self, now: float) -> list:
        t = now + self.config.probe_ticks
        outs = []
        mode = self.config.mode
        if mode in ("static", "static_lb"):
            plan = self.config.plan
            for i, part in enumerate(plan.partitions()):
                w = self.workers[i % len(self.workers)]
                indices = tuple(part)
                for k in indices:
                    self.owner[k] = w
                    self.holding[w].add(k)
                outs.append((w, AssignScanbars(indices), t))
        elif mode == "dyn_scanbar":
            count = len(self.bars)
            self.pool = list(range(count))
            stride = max(1, count // len(self.workers))
            for i, w in enumerate(self.workers):
                if not self.pool:
                    self.pending.append(w)
                    continue
                want = i * stride
                if want not in self.pool:
                    want = min(self.pool)
                outs.extend(self._grant_bar(w, want, t))
        else:
            self.window_pool = list(self.config.grid.windows)
            for w in self.workers:
                outs.extend(self._grant_window(w, t))
        return outs

    def _grant_bar(self, w: int, k: int, t: float) -> list:
        self.pool.remove(k)
        self.owner[k] = w
        self.holding[w].add(k)
        outs = [(w, AssignScanbars((k,)), t)]
        if k >= 1 and self.owner.get(k - 1) not in (None, w):
            upd = ScanlineOwnerUpdate(self.bars[k].y0, w)
            self.owner_updates.append(upd)
            outs.append((self.owner[k - 1], upd, t))
        outs.extend(self._forward_stored(k, w, t))
        return outs

    def _forward_stored(self, k: int, w: int, t: float) -> list:
        outs = []
        for y in needed_lines(k, self.bars):
            if (y, w) in self.forwarded:
                continue
            chunks = self.chunk_store.get(y, ())
            if chunks:
                self.forwarded.add((y, w))
                for chunk in chunks:
                    outs.append((w, chunk, t))
        return outs

    def _grant_window(self, w: int, t: float) -> list:
        outs = []
        if not self.window_pool and self.frame + 1 < len(self.config.frames):
            self.frame += 1
            self.window_pool = list(self.config.grid.windows)
            for peer in self.workers:
                outs.append((peer, FrameAdvance(self.frame), t))
        win = select_next_window(self.window_pool, self.config.grid.strategy,
                                 self._rng)
        if win is None:
            if w not in self.pending:
                self.pending.append(w)
            return outs
        outs.append((w, AssignWindow(win.index, win.x0, win.y0, win.width,
                                     win.height, self.frame), t))
        return outs

    # -- load balancing ---------------------------------------------------

    def _bar_cost(self, k: int) -> float:
        costs = self.config.bar_costs
        return 1.0 if costs is None else float(costs[k])

    def _remaining(self, w: int) -> set[int]:
        return self.holding[w] - self.completed_bars[w]

    def _try_transfers(self, now: float) -> list:
        outs = []
        for w in list(self.pending):
            failed = self.failed_donors.setdefault(w, set())
            candidates = [d for d in self.workers
                          if d != w and d not in self.in_flight
                          and d not in failed
                          and len(self._remaining(d)) >= 2]
            if not candidates:
                continue
            donor = max(candidates,
                        key=lambda d: (sum(self._bar_cost(k)
                                           for k in self._remaining(d)), -d))
            self.pending.remove(w)
            self.in_flight[donor] = w
            outs.append((donor, TransferHalfDemand(w), now))
        return outs

    def _apply_transfer(self, donor: int, msg: TransferredScanbars,
                        now: float) -> list:
        recipient = self.in_flight.pop(donor, None)
        outs = []
        if recipient is None:
            raise ProtocolError("unsolicited scanbar transfer")
        if not msg.indices:
            self.failed_donors.setdefault(recipient, set()).add(donor)
            if recipient not in self.pending:
                self.pending.append(recipient)
            outs.extend(self._try_transfers(now))
            return outs
        self.transfers.append(TransferEvent(now, donor, recipient,
                                            msg.indices))
        for k in msg.indices:
            self.holding[donor].discard(k)
            self.holding[recipient].add(k)
            self.owner[k] = recipient
        outs.append((recipient, TransferredScanbars(msg.indices, donor), now))
        first = min(msg.indices)
        upd = ScanlineOwnerUpdate(self.bars[first].y0, recipient)
        self.owner_updates.append(upd)
        outs.append((donor, upd, now))
        for k in msg.indices:
            outs.extend(self._forward_stored(k, recipient, now))
        return outs

    # -- message handling -------------------------------------------------

    def handle(self, src: int, msg, now: float) -> list:
        outs: list = []
        if isinstance(msg, Hello):
            self.hellos.add(msg.worker_id)
            if self.hellos == set(self.workers):
                outs.extend(self._start(now))
        elif isinstance(msg, ScanlineChunk):
            self.chunk_store.setdefault(msg.y, []).append(msg)
            c = consumer_scanbar(msg.y, self.bars)
            if c is not None and c in self.owner and self.owner[c] != src:
                outs.append((self.owner[c], msg, now))
                self.forwarded.add((msg.y, self.owner[c]))
        elif isinstance(msg, RequestWork):
            w = msg.worker_id
            if self.config.mode == "dyn_scanbar":
                if self.pool:
                    prefer = self.last_completed.get(w, -2) + 1
                    k = prefer if prefer in self.pool else min(self.pool)
                    outs.extend(self._grant_bar(w, k, now))
                elif w not in self.pending:
                    self.pending.append(w)
            elif self.config.mode == "dyn_window":
                outs.extend(self._grant_window(w, now))
            elif self.config.mode == "static_lb":
                if w not in self.pending:
                    self.pending.append(w)
                outs.extend(self._try_transfers(now))
        elif isinstance(msg, TransferredScanbars):
            outs.extend(self._apply_transfer(src, msg, now))
        elif isinstance(msg, AmbientBatch):
            self.records_relayed += msg.count
            for w in self.workers:
                if w != src:
                    outs.append((w, msg, now))
        elif isinstance(msg, ResultBlock):
            outs.extend(self._apply_result(src, msg, now))
        elif isinstance(msg, Shutdown):
            pass
        else:
            raise ProtocolError(
                f"coordinator got unexpected {type(msg).__name__}")
        return outs

    def _apply_result(self, src: int, msg: ResultBlock, now: float) -> list:
        key = (msg.unit_kind, msg.frame, msg.unit_id)
        if key in self.completed:
            raise ProtocolError(f"duplicate result for unit {key}")
        self.completed.add(key)
        img = self.images[msg.frame]
        cov = self.covered[msg.frame]
        ys, xs = slice(msg.y0, msg.y0 + msg.height), slice(
            msg.x0, msg.x0 + msg.width)
        if cov[ys, xs].any():
            raise ProtocolError(f"result block overlap at unit {key}")
        img[ys, xs] = msg.pixels
        cov[ys, xs] = True
        self.traced[msg.frame][ys, xs] = msg.traced.astype(bool)
        self.counters.merge(msg.counters)
        self.unit_counters[key] = msg.counters
        self.unit_worker[key] = src
        self.last_result_time = now
        outs = []
        if msg.unit_kind == "scanbar":
            self.completed_bars[src].add(msg.unit_id)
            self.last_completed[src] = msg.unit_id
        if self.config.mode == "static_lb":
            self.failed_donors.clear()
            outs.extend(self._try_transfers(now))
        if len(self.completed) == self.total_units:
            self.finished = True
            for w in self.workers:
                outs.append((w, Shutdown(), now))
        return outs
