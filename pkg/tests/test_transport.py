"""Simulated-transport delivery semantics."""

import pytest

from raybar.errors import ProtocolError
from raybar.messages import RequestWork
from raybar.transport import SimTransport


class Recorder:
    def __init__(self):
        self.got = []

    def handle(self, src, msg, now):
        self.got.append((src, msg, now))
        return []


class Echo:
    """Replies to every message, optionally forever (for budget tests)."""

    def __init__(self, forever=False):
        self.forever = forever
        self.count = 0

    def handle(self, src, msg, now):
        self.count += 1
        if self.forever:
            return [(src, msg, now)]
        return []


def test_fifo_per_sender_receiver_pair():
    for seed in range(20):
        tr = SimTransport(latency=1.0, seed=seed)
        sink = Recorder()
        tr.register(0, sink)
        tr.register(1, Recorder())
        for i in range(50):
            tr.send(1, 0, RequestWork(i), 0.0)
        tr.run()
        assert [m.worker_id for _, m, _ in sink.got] == list(range(50))


def test_identical_seeds_identical_traces():
    def run(seed):
        tr = SimTransport(latency=0.5, seed=seed, record_trace=True)
        a, b = Echo(forever=False), Recorder()
        tr.register(0, b)
        tr.register(1, a)
        for i in range(20):
            tr.send(1, 0, RequestWork(i), i * 0.1)
        tr.run()
        return [(e.time, e.src, e.dst, e.msg_type) for e in tr.trace]

    assert run(3) == run(3)
    # Different jitter seeds may interleave cross-pair deliveries differently,
    # but each run is internally deterministic.
    assert run(4) == run(4)


def test_latency_applied():
    tr = SimTransport(latency=2.5, seed=0)
    sink = Recorder()
    tr.register(0, sink)
    tr.register(1, Recorder())
    tr.send(1, 0, RequestWork(1), 10.0)
    tr.run()
    assert sink.got[0][2] == 12.5


def test_send_to_unknown_entity_rejected():
    tr = SimTransport()
    tr.register(0, Recorder())
    with pytest.raises(ProtocolError):
        tr.send(0, 9, RequestWork(1), 0.0)


def test_duplicate_registration_rejected():
    tr = SimTransport()
    tr.register(0, Recorder())
    with pytest.raises(ValueError):
        tr.register(0, Recorder())


def test_negative_latency_rejected():
    with pytest.raises(ValueError):
        SimTransport(latency=-1.0)


def test_event_budget_stops_livelock():
    tr = SimTransport(latency=0.0, seed=0)
    tr.register(0, Echo(forever=True))
    tr.register(1, Echo(forever=True))
    tr.send(0, 1, RequestWork(0), 0.0)
    with pytest.raises(ProtocolError):
        tr.run(max_events=1000)


def test_wire_validation_round_trips_messages():
    tr = SimTransport(latency=1.0, seed=0, validate_wire=True)
    sink = Recorder()
    tr.register(0, sink)
    tr.register(1, Recorder())
    tr.send(1, 0, RequestWork(5), 0.0)
    tr.run()
    assert sink.got[0][1] == RequestWork(5)
