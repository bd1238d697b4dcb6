import time

import numpy as np
import pytest

from sheetmidi import bootleg as bs
from sheetmidi.align import (AlignmentResult, TimeInterval, column_cost, columns_to_interval, cost_matrix,
                             subsequence_dtw)
from sheetmidi.errors import InvalidArgumentError
from sheetmidi.midi import MidiBootleg

from . import oracles


def col(*rows):
    c = np.zeros(bs.NUM_ROWS, dtype=np.uint8)
    c[list(rows)] = 1
    return c


def random_columns(rng, n, density=0.06, empty=0.2):
    cols = (rng.random((n, bs.NUM_ROWS)) < density).astype(np.uint8)
    cols[rng.random(n) < empty] = 0
    return cols


def test_cost_examples():
    assert column_cost(col(1, 2, 3, 4), col(1, 2, 3, 4)) == -1.0
    assert column_cost(col(1, 2), col(5, 6)) == 0.0
    assert column_cost(col(22, 23, 32, 33), col(33, 40)) == -0.25
    assert column_cost(col(), col()) == 0.0
    assert column_cost(col(), col(3)) == 0.0


def test_cost_symmetric_and_bounded():
    rng = np.random.default_rng(0)
    for _ in range(300):
        q, r = random_columns(rng, 2, density=0.1)
        c = column_cost(q, r)
        assert -1.0 <= c <= 0.0
        assert c == column_cost(r, q) == oracles.col_cost(q, r)
        if q.any():
            assert column_cost(q, q) == -1.0


def test_slice_match():
    rng = np.random.default_rng(1)
    R = random_columns(rng, 80, density=0.1, empty=0.0)
    R[R.sum(axis=1) == 0, 0] = 1
    res = subsequence_dtw(R[30:40], R)
    assert (res.ref_start_col, res.ref_end_col) == (30, 39)
    assert res.total_cost == pytest.approx(-10.0)
    assert res.path == tuple((i, 30 + i) for i in range(10))


def test_self_alignment():
    rng = np.random.default_rng(2)
    # every column nonempty: skipping an empty row via (2,1) would otherwise score -2
    R = random_columns(rng, 40, density=0.1, empty=0.0)
    R[R.sum(axis=1) == 0, 0] = 1
    res = subsequence_dtw(R, R)
    assert (res.ref_start_col, res.ref_end_col) == (0, 39)
    assert res.total_cost == pytest.approx(-float((R.sum(axis=1) > 0).sum()))


def test_accepts_bootleg_scores():
    rng = np.random.default_rng(3)
    R = random_columns(rng, 20)
    a = subsequence_dtw(bs.BootlegScore(R[5:10]), bs.BootlegScore(R))
    b = subsequence_dtw(R[5:10], R)
    assert a == b


def check_path(res, nq, nr):
    steps = {(1, 1), (1, 2), (2, 1)}
    assert res.path[0][0] == 0 and res.path[-1] == (nq - 1, res.ref_end_col)
    assert res.path[0][1] == res.ref_start_col
    for (a, b), (c, d) in zip(res.path, res.path[1:]):
        assert (c - a, d - b) in steps
    assert all(0 <= j < nr for _, j in res.path)


def test_matches_bruteforce():
    rng = np.random.default_rng(4)
    done = 0
    while done < 200:
        nq = int(rng.integers(1, 13))
        nr = int(rng.integers(1, 26))
        Q = random_columns(rng, nq, density=0.08)
        R = random_columns(rng, nr, density=0.08)
        ref = oracles.dtw_bruteforce(Q, R)
        if not np.isfinite(ref):
            with pytest.raises(InvalidArgumentError):
                subsequence_dtw(Q, R)
            continue
        res = subsequence_dtw(Q, R)
        assert res.total_cost == ref
        assert oracles.path_cost(Q, R, res.path) == ref
        check_path(res, nq, nr)
        done += 1


def test_trailing_zero_columns_do_not_change_optimum():
    rng = np.random.default_rng(5)
    for _ in range(20):
        R = random_columns(rng, 30)
        Q = R[8:16].copy()
        a = subsequence_dtw(Q, R)
        b = subsequence_dtw(Q, np.vstack([R, np.zeros((15, bs.NUM_ROWS), np.uint8)]))
        assert a.total_cost == b.total_cost
        assert (a.ref_start_col, a.ref_end_col) == (b.ref_start_col, b.ref_end_col)


def test_empty_inputs():
    with pytest.raises(InvalidArgumentError):
        subsequence_dtw(np.zeros((0, 62)), np.zeros((5, 62)))
    with pytest.raises(InvalidArgumentError):
        subsequence_dtw(np.zeros((3, 62)), np.zeros((0, 62)))


def test_runtime_600_by_9000():
    rng = np.random.default_rng(6)
    Q = random_columns(rng, 600)
    R = random_columns(rng, 9000)
    subsequence_dtw(Q[:10], R[:100])  # warm up
    best = min(_timed(Q, R) for _ in range(3))
    assert best <= 0.1


def _timed(Q, R):
    t0 = time.perf_counter()
    subsequence_dtw(Q, R)
    return time.perf_counter() - t0


def midi_with(times):
    n = len(times)
    return MidiBootleg(bs.BootlegScore(np.zeros((3 * n, 62), np.uint8)), tuple(times),
                       tuple(c // 3 for c in range(3 * n)))


def result(a, b):
    return AlignmentResult(a, b, (), 0.0)


def test_interval_examples():
    m = midi_with([float(i) for i in range(6)])
    assert columns_to_interval(result(0, 5), m) == TimeInterval(0.0, 2.0)
    m = midi_with([0.5 * i for i in range(12)])
    assert columns_to_interval(result(21, 23), m) == TimeInterval(3.5, 4.0)
    assert columns_to_interval(result(30, 35), m) == TimeInterval(5.0, 5.5)


def test_custom_step_set_matches_bruteforce():
    rng = np.random.default_rng(7)
    steps, weights = ((1, 1), (1, 0), (0, 1)), (2.0, 1.0, 1.0)
    for _ in range(60):
        Q = random_columns(rng, int(rng.integers(1, 6)), density=0.1)
        R = random_columns(rng, int(rng.integers(1, 8)), density=0.1)
        res = subsequence_dtw(Q, R, steps, weights)
        ref = oracles.dtw_bruteforce(Q, R, steps, weights)
        assert res.total_cost == ref
        assert oracles.path_cost(Q, R, res.path, steps, weights) == ref


def test_cost_matrix_agrees_with_column_cost():
    rng = np.random.default_rng(8)
    Q, R = random_columns(rng, 6), random_columns(rng, 9)
    C = cost_matrix(Q, R)
    assert all(C[i, j] == column_cost(Q[i], R[j]) for i in range(6) for j in range(9))
