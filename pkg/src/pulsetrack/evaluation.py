"""F-measure scoring of beat/downbeat estimates against annotations.

Matching is one-to-one and greedy: references are scanned in order and each
takes the earliest still-unmatched estimate within the tolerance window.
On sorted inputs this greedy rule attains maximum-cardinality matching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Annotation",
    "EvalResult",
    "f_measure",
    "apply_skip",
    "evaluate_clip",
    "aggregate",
    "DEFAULT_TOLERANCES",
    "DEFAULT_SKIPS",
]

DEFAULT_TOLERANCES = (0.07, 0.2)
DEFAULT_SKIPS = (0.0, 5.0)


@dataclass(frozen=True)
class Annotation:
    """Reference beats with the downbeat subset, both sorted, in seconds."""

    beats: np.ndarray
    downbeats: np.ndarray

    def __post_init__(self):
        beats = np.asarray(self.beats, dtype=float)
        downs = np.asarray(self.downbeats, dtype=float)
        object.__setattr__(self, "beats", beats)
        object.__setattr__(self, "downbeats", downs)
        for name, arr in (("beats", beats), ("downbeats", downs)):
            if np.any(np.diff(arr) < 0):
                raise ValueError(f"{name} must be sorted")
            if arr.size and arr[0] < 0:
                raise ValueError(f"{name} must be non-negative")
        if downs.size:
            if not beats.size:
                raise ValueError("downbeats present but no beats")
            idx = np.searchsorted(beats, downs)
            lo = np.abs(beats[np.maximum(idx - 1, 0)] - downs)
            hi = np.abs(beats[np.minimum(idx, len(beats) - 1)] - downs)
            if np.any(np.minimum(lo, hi) > 1e-3):
                raise ValueError("downbeats must be a subset of beats (within 1 ms)")


@dataclass(frozen=True)
class EvalResult:
    f1: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


def f_measure(est, ref, tolerance: float) -> EvalResult:
    """Greedy one-to-one matching within +/- tolerance seconds."""
    est = np.asarray(est, dtype=float)
    ref = np.asarray(ref, dtype=float)
    for name, arr in (("est", est), ("ref", ref)):
        if np.any(np.diff(arr) < 0):
            raise ValueError(f"{name} timestamps must be sorted")
    tp = 0
    j = 0
    for r in ref:
        while j < len(est) and est[j] < r - tolerance:
            j += 1
        if j < len(est) and est[j] <= r + tolerance:
            tp += 1
            j += 1
    fp = len(est) - tp
    fn = len(ref) - tp
    precision = tp / len(est) if len(est) else 0.0
    recall = tp / len(ref) if len(ref) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalResult(f1=f1, precision=precision, recall=recall,
                      tp=tp, fp=fp, fn=fn)


def apply_skip(events, skip: float) -> np.ndarray:
    """Drop all timestamps earlier than `skip` seconds."""
    events = np.asarray(events, dtype=float)
    if np.any(np.diff(events) < 0):
        raise ValueError("timestamps must be sorted")
    return events[events >= skip]


def evaluate_clip(events, annotation: Annotation,
                  tolerances=DEFAULT_TOLERANCES,
                  skips=DEFAULT_SKIPS) -> dict:
    """Score one clip on the full grid of {beat, downbeat} x tolerance x skip.

    `events` is a list of BeatEvents; downbeat scoring compares only the
    downbeat-flagged events against the annotated downbeats.
    """
    est_beats = np.asarray([e.time for e in events], dtype=float)
    est_downs = np.asarray([e.time for e in events if e.is_downbeat], dtype=float)
    table = {}
    for kind, est, ref in (("beat", est_beats, annotation.beats),
                           ("downbeat", est_downs, annotation.downbeats)):
        for tol in tolerances:
            for skip in skips:
                table[(kind, tol, skip)] = f_measure(
                    apply_skip(est, skip), apply_skip(ref, skip), tol)
    return table


def aggregate(tables) -> dict:
    """Unweighted per-cell mean F1 across clips, in percent."""
    tables = list(tables)
    if not tables:
        raise ValueError("cannot aggregate an empty result set")
    keys = tables[0].keys()
    return {key: 100.0 * float(np.mean([t[key].f1 for t in tables]))
            for key in keys}
