"""Seed-stream derivation used everywhere randomness appears."""

from rankci.seeding import child_seed, stream


def test_stream_is_deterministic():
    assert stream(1).integers(0, 1000, 5).tolist() == stream(1).integers(0, 1000, 5).tolist()


def test_stream_path_separates_streams():
    a = stream(1, 0).integers(0, 10**9, 4).tolist()
    b = stream(1, 1).integers(0, 10**9, 4).tolist()
    c = stream(2, 0).integers(0, 10**9, 4).tolist()
    assert a != b
    assert a != c


def test_path_is_not_flattened_into_the_seed():
    # (1, 2) as a path differs from seed 1 with path () or seed 12
    assert stream(1, 2).integers(0, 10**9, 4).tolist() != stream(12).integers(0, 10**9, 4).tolist()


def test_child_seed_is_deterministic_and_in_range():
    a = child_seed(7, 1, 2, 3)
    b = child_seed(7, 1, 2, 3)
    assert a == b
    assert 0 <= a < 2**63
    assert child_seed(7, 1, 2, 4) != a
