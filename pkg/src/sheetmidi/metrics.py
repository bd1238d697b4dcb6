"""Interval-overlap precision, recall and F measure."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .align import TimeInterval
from .errors import InvalidArgumentError


def overlap(a: TimeInterval, b: TimeInterval) -> float:
    return max(0.0, min(a.end, b.end) - max(a.start, b.start))


@dataclass
class QueryScore:
    query_id: str
    overlap: float
    predicted: float
    reference: float  # duration of the best-overlapping ground-truth interval


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f_measure: float
    queries: list[QueryScore] = field(default_factory=list)
    timing: dict[str, dict[str, float]] = field(default_factory=dict)
    averaging: str = "micro"
    missing: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "averaging": self.averaging,
            "queries": [vars(q) for q in self.queries],
            "timing": self.timing,
            "missing": self.missing,
        }


def harmonic_mean(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def score_query(query_id: str, pred: TimeInterval, gts: Sequence[TimeInterval]) -> QueryScore:
    if not gts:
        raise InvalidArgumentError(f"query {query_id!r} has no ground-truth intervals")
    overlaps = [overlap(pred, gt) for gt in gts]
    best = max(range(len(gts)), key=lambda i: overlaps[i])
    return QueryScore(query_id, overlaps[best], max(pred.duration, 0.0), gts[best].duration)


def compute_metrics(predictions: Mapping[str, TimeInterval], gts: Mapping[str, Sequence[TimeInterval]],
                    averaging: str = "micro") -> MetricsReport:
    """Precision = overlap / predicted duration, recall = overlap / ground-truth duration.

    For queries with several valid ground-truth intervals the one with the
    largest overlap counts. ``micro`` sums overlaps and durations over all
    queries; ``macro`` averages the per-query ratios.
    """
    if set(predictions) != set(gts):
        missing = sorted(set(predictions) ^ set(gts))
        raise InvalidArgumentError(f"prediction and ground-truth ids differ: {missing}")
    scores = [score_query(q, predictions[q], gts[q]) for q in sorted(predictions)]
    if averaging == "micro":
        pred_total = sum(s.predicted for s in scores)
        ref_total = sum(s.reference for s in scores)
        hit = sum(s.overlap for s in scores)
        p = hit / pred_total if pred_total > 0 else 0.0
        r = hit / ref_total if ref_total > 0 else 0.0
    elif averaging == "macro":
        n = max(len(scores), 1)
        p = sum(s.overlap / s.predicted for s in scores if s.predicted > 0) / n
        r = sum(s.overlap / s.reference for s in scores if s.reference > 0) / n
    else:
        raise InvalidArgumentError(f"unknown averaging {averaging!r}")
    return MetricsReport(p, r, harmonic_mean(p, r), scores, averaging=averaging)
