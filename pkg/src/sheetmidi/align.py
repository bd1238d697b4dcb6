"""Subsequence DTW between a query bootleg score and a MIDI bootleg score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bootleg as bs
from .errors import InvalidArgumentError
from .midi import MidiBootleg

DEFAULT_STEPS = ((1, 1), (1, 2), (2, 1))
DEFAULT_WEIGHTS = (1.0, 1.0, 2.0)


@dataclass(frozen=True)
class TimeInterval:
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class AlignmentResult:
    ref_start_col: int
    ref_end_col: int
    path: tuple[tuple[int, int], ...]
    total_cost: float
    interval: TimeInterval | None = None


def column_cost(q, r) -> float:
    q = np.asarray(q, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    norm = max(q.sum(), r.sum())
    if norm == 0:
        return 0.0
    return -float(q @ r) / norm


def cost_matrix(query: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """(Q, R) matrix of normalized negative inner products between columns."""
    q = np.asarray(query, dtype=np.float32)
    r = np.asarray(ref, dtype=np.float32)
    inner = (q @ r.T).astype(np.float64)
    norm = np.maximum(q.sum(axis=1)[:, None], r.sum(axis=1)[None, :]).astype(np.float64)
    out = np.zeros_like(inner)
    np.divide(-inner, norm, out=out, where=norm > 0)
    return out


def _columns(x) -> np.ndarray:
    return x.columns if isinstance(x, bs.BootlegScore) else np.asarray(x)


def subsequence_dtw(query, ref, steps=DEFAULT_STEPS, weights=DEFAULT_WEIGHTS) -> AlignmentResult:
    """Align the whole query against the best-matching stretch of the reference.

    The first query column may start at any reference column and the path may
    end at any reference column. Each step (dq, dr) adds weight * cost of the
    cell it lands on. Ties prefer earlier steps, then the smallest end column.
    """
    Q, R = _columns(query), _columns(ref)
    if len(Q) == 0 or len(R) == 0:
        raise InvalidArgumentError("query and reference must be nonempty")
    if len(steps) != len(weights):
        raise InvalidArgumentError("steps and weights differ in length")
    if any(dq < 0 or dr < 0 or dq + dr == 0 for dq, dr in steps):
        raise InvalidArgumentError(f"invalid step set {steps}")
    Qf = Q.astype(np.float32)
    Rt = np.ascontiguousarray(R.T, dtype=np.float32)
    q_count = Q.sum(axis=1).astype(np.float64)
    r_count = R.sum(axis=1).astype(np.float64)
    nq, nr = len(Q), len(R)
    block = max(1, (1 << 22) // nr)
    inner = None

    def cost_row(i):
        nonlocal inner
        if i % block == 0:
            inner = Qf[i:i + block] @ Rt  # small integers, exact in float32
        if q_count[i] == 0:
            return np.zeros(nr)
        return np.negative(inner[i % block]) / np.maximum(r_count, q_count[i])

    def cost_cell(i, j):
        norm = max(q_count[i], r_count[j])
        return 0.0 if norm == 0 else -float(Qf[i] @ Rt[:, j]) / norm

    forward = [(dq, dr, w) for (dq, dr), w in zip(steps, weights) if dq > 0]
    horizontal = [(dr, w) for (dq, dr), w in zip(steps, weights) if dq == 0]
    D = np.empty((nq, nr))
    tmp = np.empty(nr)
    for i in range(nq):
        c = cost_row(i)
        best = D[i]
        if i == 0:
            best[:] = c
        else:
            best.fill(np.inf)
            for dq, dr, w in forward:
                if dq > i or dr >= nr:
                    continue
                t = tmp[:nr - dr]
                if w == 1:
                    np.add(D[i - dq, :nr - dr], c[dr:], out=t)
                else:
                    np.multiply(c[dr:], w, out=t)
                    t += D[i - dq, :nr - dr]
                np.minimum(best[dr:], t, out=best[dr:])
        for j in range(nr) if horizontal else ():
            for dr, w in horizontal:
                if j >= dr:
                    best[j] = min(best[j], best[j - dr] + w * c[j])
    end = int(np.argmin(D[-1]))
    if not np.isfinite(D[-1, end]):
        raise InvalidArgumentError("no admissible path under the given step set")

    # Backpointers are recovered by re-evaluating each step in order: the first
    # one that reproduces D exactly is the one the tie rule would have kept.
    path = [(nq - 1, end)]
    i, j = nq - 1, end
    while True:
        c = cost_cell(i, j)
        if i == 0 and D[0, j] == c:
            break
        for (dq, dr), w in zip(steps, weights):
            pi, pj = i - dq, j - dr
            if pi >= 0 and pj >= 0 and D[pi, pj] + w * c == D[i, j]:
                break
        else:
            raise AssertionError("backtrace lost the optimal path")
        i, j = pi, pj
        path.append((i, j))
    path.reverse()
    return AlignmentResult(path[0][1], end, tuple(path), float(D[-1, end]))


def columns_to_interval(result: AlignmentResult, midi: MidiBootleg) -> TimeInterval:
    """Matched reference columns -> [first event time, time of the event after the last]."""
    first = midi.col_to_event[result.ref_start_col]
    last = midi.col_to_event[result.ref_end_col]
    times = midi.event_times
    end = times[last + 1] if last + 1 < len(times) else times[last]
    return TimeInterval(times[first], end)


def align(query, midi: MidiBootleg, steps=DEFAULT_STEPS, weights=DEFAULT_WEIGHTS) -> AlignmentResult:
    res = subsequence_dtw(query, midi.score, steps, weights)
    return AlignmentResult(res.ref_start_col, res.ref_end_col, res.path, res.total_cost,
                           columns_to_interval(res, midi))
