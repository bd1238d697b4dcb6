"""Query bootleg projection: staff estimation, grand-staff pairing and note placement."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bootleg as bs
from . import cv
from .detect import BarlineFeatures, NoteheadBox, StaffFeatureTensor

RIGHT = "right"
LEFT = "left"
# global row of each hand's bottom staff line: E4 (treble) and G2 (bass)
BOTTOM_LINE_ROW = {RIGHT: 35, LEFT: 13}


@dataclass(frozen=True)
class LocalStaffEstimate:
    notehead: int  # index into the notehead list
    staff_row: int  # image row of the staff's top line
    spacing: float
    response: float
    reliable: bool = True


@dataclass(frozen=True)
class GlobalStaff:
    centroid_row: float
    members: tuple[int, ...]
    hand: str | None = None


@dataclass(frozen=True)
class GrandStaff:
    right: GlobalStaff
    left: GlobalStaff


@dataclass(frozen=True)
class PlacedNote:
    notehead: int
    bbox: tuple[int, int, int, int]
    row: int
    grand_staff: int
    hand: str


@dataclass(frozen=True)
class QueryBootleg:
    score: bs.BootlegScore
    col_to_group: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...] = field(default=())  # notehead indices per column group
    num_grand_staves: int = 0


def _argmax_in_rows(tensor: StaffFeatureTensor, col: int, lo, hi):
    """Best (spacing index, top-line row, value) with the top line in rows lo[k]..hi[k] per spacing."""
    act = tensor.activations
    best = (-1, -1, 0.0)
    H = act.shape[1]
    for k in range(act.shape[0]):
        a, b = max(0, int(lo[k])), min(H - 1, int(hi[k]))
        if a > b:
            continue
        seg = act[k, a:b + 1, col]
        h = int(seg.argmax())
        if seg[h] > best[2]:
            best = (k, a + h, float(seg[h]))
    return best


def estimate_local_staves(noteheads: list[NoteheadBox], tensor: StaffFeatureTensor,
                          context_rows: int = 40) -> list[LocalStaffEstimate]:
    """Per-notehead argmax of the comb activations near the notehead.

    The context window is centered on the notehead and applies to the staff's
    middle line, so noteheads on ledger lines above or below a staff still see it.
    """
    mid = np.rint(2 * tensor.spacings)
    out = []
    for i, nh in enumerate(noteheads):
        r, c = nh.center
        col = tensor.column_of(c)
        k, h, v = _argmax_in_rows(tensor, col, r - context_rows - mid, r + context_rows - mid)
        if v <= 0:
            out.append(LocalStaffEstimate(i, int(round(r)), float(tensor.spacings[0]), 0.0, reliable=False))
        else:
            out.append(LocalStaffEstimate(i, h, float(tensor.spacings[k]), v))
    return out


def cluster_staves(estimates: list[LocalStaffEstimate], min_distance: float = 40.0) -> list[GlobalStaff]:
    """Grow k until two k-means centroids of the staff rows come closer than ``min_distance``."""
    reliable = [e for e in estimates if e.reliable]
    if not reliable:
        return []
    rows = np.array([e.staff_row for e in reliable], dtype=np.float64)
    best = cv.kmeans(rows, 1)
    for k in range(2, len(np.unique(rows)) + 1):
        # seed from the previous solution plus the worst-fit row
        prev = best[0]
        worst = rows[np.abs(rows[:, None] - prev[None, :]).min(axis=1).argmax()]
        centroids, assign = cv.kmeans(rows, k, init=np.sort(np.append(prev, worst)))
        if np.diff(centroids).min() < min_distance:
            break
        best = centroids, assign
    centroids, assign = best
    return [GlobalStaff(float(c), tuple(reliable[i].notehead for i in np.flatnonzero(assign == j)))
            for j, c in enumerate(centroids)]


def nearest_staff(row: float, staves: list[GlobalStaff]) -> int:
    return int(np.argmin([abs(row - s.centroid_row) for s in staves]))


def refine_local_estimates(noteheads: list[NoteheadBox], staves: list[GlobalStaff], tensor: StaffFeatureTensor,
                           estimates: list[LocalStaffEstimate], narrow_context: int = 15):
    """Re-run the local argmax within ``narrow_context`` rows of each notehead's nearest global staff.

    Returns (estimates, staff index per notehead). The nearest staff is judged
    by the notehead's own row against each staff's middle line.
    """
    refined, owner = [], []
    for est in estimates:
        nh = noteheads[est.notehead]
        r, c = nh.center
        j = int(np.argmin([abs(r - (s.centroid_row + 2 * est.spacing)) for s in staves]))
        g = staves[j].centroid_row
        k, h, v = _argmax_in_rows(tensor, tensor.column_of(c),
                                  np.full(len(tensor.spacings), g - narrow_context),
                                  np.full(len(tensor.spacings), g + narrow_context))
        if v <= 0:
            refined.append(LocalStaffEstimate(est.notehead, int(round(g)), est.spacing, 0.0, reliable=False))
        else:
            refined.append(LocalStaffEstimate(est.notehead, h, float(tensor.spacings[k]), v))
        owner.append(j)
    return refined, owner


def assign_without_refinement(staves: list[GlobalStaff], estimates: list[LocalStaffEstimate]) -> list[int]:
    return [nearest_staff(e.staff_row, staves) for e in estimates]


def pairing_score(pairs, centroids, rowsum: np.ndarray) -> float:
    if not pairs:
        return -math.inf
    vals = []
    for a, b in pairs:
        lo = max(0, int(math.floor(centroids[a])))
        hi = min(len(rowsum) - 1, int(math.ceil(centroids[b])))
        vals.append(float(np.median(rowsum[lo:hi + 1])) if hi >= lo else 0.0)
    return float(np.mean(vals))


def group_grand_staves(staves: list[GlobalStaff], barline: BarlineFeatures) -> list[GrandStaff]:
    """Pair staves as (0,1),(2,3),... or (1,2),(3,4),... whichever has more bar-line evidence."""
    if len(staves) < 2:
        return []
    centroids = [s.centroid_row for s in staves]
    n = len(staves)
    even = [(i, i + 1) for i in range(0, n - 1, 2)]
    odd = [(i, i + 1) for i in range(1, n - 1, 2)]
    pairs = even if pairing_score(even, centroids, barline.rowsum) >= pairing_score(odd, centroids, barline.rowsum) else odd
    return [GrandStaff(_with_hand(staves[a], RIGHT), _with_hand(staves[b], LEFT)) for a, b in pairs]


def _with_hand(staff: GlobalStaff, hand: str) -> GlobalStaff:
    return GlobalStaff(staff.centroid_row, staff.members, hand)


def staff_position(center_row: float, staff_row: float, spacing: float) -> int:
    """Half-spaces above the bottom staff line; exact .5 ties round toward the staff middle."""
    p = (staff_row + 4 * spacing - center_row) / (spacing / 2)
    lo = math.floor(p)
    frac = p - lo
    if frac > 0.5:
        return lo + 1
    if frac < 0.5:
        return lo
    return lo + 1 if lo + 1 <= 4 else lo


def note_to_staff_position(center_row: float, estimate: LocalStaffEstimate, hand: str) -> int:
    row = BOTTOM_LINE_ROW[hand] + staff_position(center_row, estimate.staff_row, estimate.spacing)
    lo, hi = bs.hand_rows(hand)
    return int(min(max(row, lo), hi))


def place_notes(noteheads: list[NoteheadBox], estimates: list[LocalStaffEstimate], owner: list[int],
                staves: list[GlobalStaff], grand: list[GrandStaff]) -> list[PlacedNote]:
    role = {}
    for g, gs in enumerate(grand):
        role[gs.right.centroid_row] = (g, RIGHT)
        role[gs.left.centroid_row] = (g, LEFT)
    placed = []
    for est, j in zip(estimates, owner):
        if not est.reliable or staves[j].centroid_row not in role:
            continue
        g, hand = role[staves[j].centroid_row]
        nh = noteheads[est.notehead]
        placed.append(PlacedNote(est.notehead, nh.bbox, note_to_staff_position(nh.center[0], est, hand), g, hand))
    return placed


def build_query_bootleg(placed: list[PlacedNote], num_grand_staves: int | None = None,
                        filler_repetition: bool = False) -> QueryBootleg:
    """One column per group of horizontally overlapping noteheads, grand staves top to bottom."""
    if num_grand_staves is None:
        num_grand_staves = 1 + max((p.grand_staff for p in placed), default=-1)
    columns, groups = [], []
    for g in range(num_grand_staves):
        notes = sorted((p for p in placed if p.grand_staff == g), key=lambda p: (p.bbox[1], p.bbox[3]))
        current, right_edge = [], -1
        for p in notes:
            if current and p.bbox[1] > right_edge:
                groups.append(current)
                current = []
            right_edge = max(right_edge, p.bbox[3]) if current else p.bbox[3]
            current.append(p)
        if current:
            groups.append(current)
    for grp in groups:
        col = np.zeros(bs.NUM_ROWS, dtype=np.uint8)
        col[[p.row for p in grp]] = 1
        columns.append(col)

    reps = 3 if filler_repetition else 1
    cols = np.zeros((reps * len(columns), bs.NUM_ROWS), dtype=np.uint8)
    prov, col_to_group = [], []
    for i, col in enumerate(columns):
        if filler_repetition:
            cols[3 * i] = cols[3 * i + 1] = col
            prov += [bs.Provenance(i, bs.REPEAT)] * 2 + [bs.Provenance(i, bs.FILLER)]
            col_to_group += [i, i, i]
        else:
            cols[i] = col
            prov.append(bs.Provenance(i))
            col_to_group.append(i)
    return QueryBootleg(bs.BootlegScore(cols, tuple(prov)), tuple(col_to_group),
                        tuple(tuple(p.notehead for p in grp) for grp in groups), num_grand_staves)
