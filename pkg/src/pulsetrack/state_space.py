"""Discrete bar-pointer state spaces.

Two planes share one flat-index layout so particles and Viterbi lattices can
use the same machinery:

* :class:`BeatStateSpace` -- (phase within beat, beat period in frames),
  one row per period tau, phases 0..tau-1.
* :class:`BarStateSpace` -- (position within bar, beats per bar), one row per
  meter, positions 0..m-1.

States are enumerated canonically: rows by ascending interval length, phases
ascending within a row.  The flat index of (phase, interval) is therefore
stable across runs and implementations, which keeps serialized indices and
golden tests reproducible.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "BeatStateSpace",
    "BarStateSpace",
    "build_beat_space",
    "build_bar_space",
    "is_beat_state",
    "round_half_up",
]


def round_half_up(x: float) -> int:
    """Round with ties going up (2.5 -> 3), unlike banker's rounding."""
    return int(math.floor(x + 0.5))


class _PointerSpace:
    """Shared layout for row-structured pointer spaces.

    Attributes
    ----------
    intervals : np.ndarray
        Row lengths (beat periods or meters), ascending.
    num_states : int
        Sum of row lengths.
    state_phase : np.ndarray
        Position within the row, per flat state.
    state_interval : np.ndarray
        Row length, per flat state.
    interval_index : np.ndarray
        Row number, per flat state.
    row_start : np.ndarray
        Flat index of phase 0, per row.
    boundary_mask : np.ndarray
        True where phase == interval - 1 (the state wraps on advance).
    """

    def __init__(self, intervals):
        intervals = np.asarray(intervals, dtype=np.int64)
        if intervals.size == 0:
            raise ValueError("at least one interval length is required")
        if np.any(intervals < 1):
            raise ValueError(f"interval lengths must be >= 1, got {intervals}")
        if np.any(np.diff(intervals) <= 0):
            raise ValueError("interval lengths must be strictly ascending")
        self.intervals = intervals
        self.num_states = int(intervals.sum())
        self.row_start = np.concatenate(([0], np.cumsum(intervals)[:-1]))
        self.state_phase = np.concatenate([np.arange(n) for n in intervals])
        self.state_interval = np.repeat(intervals, intervals)
        self.interval_index = np.repeat(np.arange(len(intervals)), intervals)
        self.boundary_mask = self.state_phase == self.state_interval - 1

    def index_of(self, phase: int, interval: int) -> int:
        """Flat index of (phase, interval); raises if the pair is not a state."""
        rows = np.flatnonzero(self.intervals == interval)
        if rows.size == 0:
            raise ValueError(f"interval {interval} is not in this space")
        if not 0 <= phase < interval:
            raise ValueError(f"phase {phase} out of range for interval {interval}")
        return int(self.row_start[rows[0]] + phase)


class BeatStateSpace(_PointerSpace):
    """Phase/period plane for beat tracking.

    The leading `window_width(tau)` phases of each row are the beat states;
    `window_width` defaults to a sixteenth of the period (at least one frame)
    so that short windows at high tempi and wide windows at low tempi carry
    comparable musical duration.
    """

    def __init__(self, fps: int, tau_min: int, tau_max: int,
                 beat_window_fraction: float = 1.0 / 16.0,
                 nonbeat_spread: str = "flat"):
        if fps <= 0:
            raise ValueError(f"fps must be positive, got {fps}")
        if tau_min < 1 or tau_max < tau_min:
            raise ValueError(f"invalid period range [{tau_min}, {tau_max}]")
        if beat_window_fraction <= 0:
            raise ValueError("beat_window_fraction must be positive")
        if nonbeat_spread not in ("flat", "row"):
            raise ValueError(f"nonbeat_spread must be 'flat' or 'row', "
                             f"got {nonbeat_spread!r}")
        super().__init__(np.arange(tau_min, tau_max + 1))
        self.fps = int(fps)
        self.tau_min = int(tau_min)
        self.tau_max = int(tau_max)
        self.beat_window_fraction = float(beat_window_fraction)
        self.nonbeat_spread = nonbeat_spread
        widths = np.array([self.window_width(int(t)) for t in self.intervals])
        self.window_widths = widths
        self.beat_mask = self.state_phase < widths[self.interval_index]
        # divisor for the residual (1 - activation) mass on non-beat states:
        # "row" spreads it over the row's non-beat phase count, "flat" keeps
        # full contrast.  Flat avoids a systematic early phase lock, because
        # weak leading-edge activations no longer out-weigh mid-phase states.
        nonbeat = self.intervals - widths
        self.nonbeat_counts = nonbeat
        if nonbeat_spread == "row":
            knorm = np.maximum(nonbeat, 1).astype(float)
        else:
            knorm = np.ones(len(self.intervals))
        self.nonbeat_knorm = knorm

    def window_width(self, period: int) -> int:
        """Number of leading phases counted as beat states for a period."""
        return max(1, round_half_up(period * self.beat_window_fraction))

    def beat_window(self, period: int) -> np.ndarray:
        """Phases counted as beat states for the given period."""
        if not self.tau_min <= period <= self.tau_max:
            raise ValueError(f"period {period} outside [{self.tau_min}, {self.tau_max}]")
        return np.arange(self.window_width(period))


class BarStateSpace(_PointerSpace):
    """Position/meter plane for downbeat tracking; position 0 is the downbeat."""

    def __init__(self, meters):
        meters = sorted(set(int(m) for m in meters))
        if not meters:
            raise ValueError("meter set must be non-empty")
        if any(m < 2 for m in meters):
            raise ValueError(f"every meter must be >= 2, got {meters}")
        super().__init__(np.asarray(meters, dtype=np.int64))
        self.meters = tuple(meters)
        self.downbeat_mask = self.state_phase == 0
        self.num_downbeat_states = int(self.downbeat_mask.sum())


def build_beat_space(fps: int, min_bpm: float, max_bpm: float,
                     beat_window_fraction: float = 1.0 / 16.0,
                     nonbeat_spread: str = "flat") -> BeatStateSpace:
    """Build the beat plane for a tempo range.

    Periods run from round(fps * 60 / max_bpm) to round(fps * 60 / min_bpm)
    frames.  min_bpm == max_bpm yields a single-period space.
    """
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    if not 0 < min_bpm <= max_bpm:
        raise ValueError(f"need 0 < min_bpm <= max_bpm, got {min_bpm}, {max_bpm}")
    tau_min = round_half_up(fps * 60.0 / max_bpm)
    tau_max = round_half_up(fps * 60.0 / min_bpm)
    if tau_min < 2:
        raise ValueError(
            f"max_bpm {max_bpm} leaves fewer than 2 frames per beat at {fps} fps")
    return BeatStateSpace(fps, tau_min, tau_max, beat_window_fraction,
                          nonbeat_spread)


def build_bar_space(meters) -> BarStateSpace:
    """Build the bar plane over a set of beats-per-bar values."""
    return BarStateSpace(meters)


def is_beat_state(space: BeatStateSpace, state: int) -> bool:
    """True iff the flat state index lies in its row's beat window."""
    if not 0 <= state < space.num_states:
        raise ValueError(f"state {state} outside space of {space.num_states}")
    return bool(space.beat_mask[state])
