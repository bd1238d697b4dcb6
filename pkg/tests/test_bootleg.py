import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sheetmidi import bootleg as bs
from sheetmidi.errors import (BadMagicError, CorruptFeatureError, InvalidArgumentError, TruncatedFeatureError,
                              UnsupportedVersionError)


def column(rows):
    c = np.zeros(62, dtype=np.uint8)
    c[list(rows)] = 1
    return c


columns = st.lists(st.integers(0, 61), max_size=10).map(column)


def test_staff_geometry():
    assert bs.LEFT_ROWS == 28 and bs.RIGHT_ROWS == 34 and bs.NUM_ROWS == 62
    assert bs.global_row("left", bs.diatonic_index("A", 0)) == 0
    assert bs.global_row("right", bs.diatonic_index("C", 8)) == 61
    assert bs.global_row("left", bs.diatonic_index("G", 4)) == 27
    assert bs.global_row("right", bs.diatonic_index("E", 3)) == 28
    assert bs.global_row("left", bs.diatonic_index("A", 4)) is None


def test_global_row_is_bijection():
    rows = [bs.global_row("left", d) for d in range(5, 33)] + [bs.global_row("right", d) for d in range(23, 57)]
    assert sorted(rows) == list(range(62))


@pytest.mark.parametrize("rows, word", [
    ((), 0),
    ((0,), 1),
    ((22, 23, 32, 33), sum(1 << i for i in (22, 23, 32, 33))),
])
def test_encode_column(rows, word):
    assert bs.encode_column(column(rows)) == word


def test_encode_matches_bit_loop():
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = (rng.random(62) < 0.3).astype(np.uint8)
        expected = 0
        for i in range(62):
            if c[i]:
                expected += 2 ** i
        assert bs.encode_column(c) == expected


def test_encode_rejects_bad_length():
    with pytest.raises(InvalidArgumentError):
        bs.encode_column(np.zeros(61))


def test_decode_column():
    assert not bs.decode_column(0).any()
    top = bs.decode_column(2 ** 61)
    assert top[61] == 1 and top.sum() == 1
    with pytest.raises(CorruptFeatureError):
        bs.decode_column(2 ** 62)


@settings(max_examples=200)
@given(columns)
def test_column_roundtrip(c):
    word = bs.encode_column(c)
    assert word >> 62 == 0
    assert np.array_equal(bs.decode_column(word), c)


def test_serialize_layout():
    assert bs.serialize(bs.BootlegScore(np.zeros((0, 62)))) == b"BSCR\x01\x00\x00\x00" + b"\x00" * 4
    data = bs.serialize(bs.BootlegScore(column([0])[None, :]))
    assert len(data) == 20
    assert data[12:20] == bytes([1, 0, 0, 0, 0, 0, 0, 0])
    assert data[8:12] == bytes([1, 0, 0, 0])


def test_hundred_columns_is_812_bytes():
    score = bs.BootlegScore(np.ones((100, 62), dtype=np.uint8))
    assert len(bs.serialize(score)) == 812


@settings(max_examples=100)
@given(st.lists(columns, max_size=40))
def test_serialize_roundtrip(cols):
    score = bs.BootlegScore(np.array(cols).reshape(-1, 62))
    data = bs.serialize(score)
    assert len(data) == 12 + 8 * score.width
    assert bs.deserialize(data) == score


def test_deserialize_errors():
    good = bs.serialize(bs.BootlegScore(np.ones((3, 62), dtype=np.uint8)))
    with pytest.raises(BadMagicError):
        bs.deserialize(b"XXXX" + good[4:])
    with pytest.raises(UnsupportedVersionError):
        bs.deserialize(good[:4] + b"\x02" + good[5:])
    truncated = good[:8] + (5).to_bytes(4, "little") + good[12:]
    with pytest.raises(TruncatedFeatureError):
        bs.deserialize(truncated)
    with pytest.raises(TruncatedFeatureError):
        bs.deserialize(b"BSC")
    high = good[:12] + (1 << 63).to_bytes(8, "little") + good[20:]
    with pytest.raises(CorruptFeatureError):
        bs.deserialize(high)


def test_score_validation():
    with pytest.raises(InvalidArgumentError):
        bs.BootlegScore(np.zeros((2, 61)))
    with pytest.raises(InvalidArgumentError):
        bs.BootlegScore(np.full((2, 62), 2))
    s = bs.BootlegScore(np.zeros((2, 62)))
    with pytest.raises(ValueError):
        s.columns[0, 0] = 1
