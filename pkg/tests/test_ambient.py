"""Ambient cache: wire encoding, octree placement, and lookup semantics."""

import numpy as np
import pytest

from raybar.ambient import (AmbientCache, AmbientRecord, MAX_RADIUS,
                            RECORD_SIZE, decode_record)
from raybar.errors import ProtocolError


def make_record(seq=0, pos=(0.25, 0.25, 0.25), radius=0.3, worker=1,
                value=(0.2, 0.4, 0.6), normal=(0, 1, 0)):
    return AmbientRecord.make(pos, normal, value, radius, worker, seq)


def test_encode_is_64_bytes():
    assert len(make_record().encode()) == RECORD_SIZE


def test_decode_encode_identity():
    rec = make_record(seq=7, pos=(1.5, -2.25, 0.125), radius=0.75, worker=3)
    back = decode_record(rec.encode())
    assert back.key == rec.key
    assert back.radius == rec.radius
    assert np.array_equal(back.position, rec.position)
    assert np.array_equal(back.normal, rec.normal)
    assert np.array_equal(back.value, rec.value)
    assert back.encode() == rec.encode()


def test_decode_rejects_bad_input():
    with pytest.raises(ProtocolError):
        decode_record(b"\x00" * 10)
    good = bytearray(make_record().encode())
    nan = np.array([np.nan], dtype=np.float32).tobytes()
    bad = bytes(nan + good[4:])
    with pytest.raises(ProtocolError):
        decode_record(bad)
    zero_radius = bytearray(make_record().encode())
    zero_radius[36:40] = np.array([0.0], dtype=np.float32).tobytes()
    with pytest.raises(ProtocolError):
        decode_record(bytes(zero_radius))


def test_record_requires_positive_radius():
    with pytest.raises(ValueError):
        make_record(radius=0.0)


def test_insert_placement_matches_radius_rule():
    # A record lands in the smallest node whose child half-size would drop
    # below its radius; verify against a hand computation on a half=4 cube.
    cache = AmbientCache((0, 0, 0), 4.0)
    rec = make_record(pos=(1.0, 1.0, 1.0), radius=0.6)
    cache.insert(rec)
    center, half = cache.node_of(rec)
    # halves divide 4 -> 2 -> 1; 1/2 = 0.5 < 0.6 stops at half=1.
    assert half == 1.0
    assert np.allclose(center, [1.0, 1.0, 1.0])
    assert np.all(np.abs(rec.position - center) <= half)


def test_insert_outside_root_cube_kept_at_root():
    cache = AmbientCache((0, 0, 0), 1.0)
    rec = make_record(pos=(5.0, 0.0, 0.0), radius=0.1)
    assert cache.insert(rec)
    _, half = cache.node_of(rec)
    assert half == 1.0


def test_duplicate_keys_are_ignored():
    cache = AmbientCache((0, 0, 0), 4.0)
    assert cache.insert(make_record(seq=1))
    assert not cache.insert(make_record(seq=1, value=(9, 9, 9)))
    assert len(cache) == 1


def test_lookup_requires_distance_and_normal_agreement():
    cache = AmbientCache((0, 0, 0), 4.0)
    cache.insert(make_record(pos=(0, 0, 0), radius=0.5, normal=(0, 1, 0),
                             value=(1, 2, 3)))
    hit = cache.lookup((0.01, 0, 0), (0, 1, 0), error_tolerance=1.0)
    assert hit is not None and np.allclose(hit, [1, 2, 3], atol=1e-6)
    assert cache.lookup((2.0, 0, 0), (0, 1, 0), 1.0) is None
    assert cache.lookup((0.01, 0, 0), (1, 0, 0), 1.0) is None


def test_lookup_weighted_mean_independent_of_merge_order():
    recs = [make_record(seq=i, worker=w, pos=(0.02 * i, 0, 0), radius=1.0,
                        value=(i, 0, 0))
            for w in (1, 2) for i in range(4)]
    a = AmbientCache((0, 0, 0), 4.0)
    b = AmbientCache((0, 0, 0), 4.0)
    for r in recs:
        a.insert(r)
    for r in reversed(recs):
        b.insert(r)
    pa = a.lookup((0, 0, 0), (0, 1, 0), 1.0)
    pb = b.lookup((0, 0, 0), (0, 1, 0), 1.0)
    assert pa is not None
    assert np.array_equal(pa, pb)


def test_sequence_counter_monotonic():
    cache = AmbientCache((0, 0, 0), 1.0, owner=4)
    assert [cache.next_sequence() for _ in range(3)] == [0, 1, 2]
    assert cache.owner == 4


def test_records_iterates_everything():
    cache = AmbientCache((0, 0, 0), 4.0)
    for i in range(5):
        cache.insert(make_record(seq=i, radius=0.05 + 0.3 * i))
    assert {r.key for r in cache.records()} == cache.keys()


def test_radius_clamped_by_decode_roundtrip():
    rec = make_record(radius=MAX_RADIUS)
    assert decode_record(rec.encode()).radius == MAX_RADIUS
