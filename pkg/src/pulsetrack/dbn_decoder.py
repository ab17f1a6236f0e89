"""Max-product (Viterbi) decoding and beat extrapolation.

Three consumers share this module: the offline oracle that decodes a whole
recording at once, the periodic past-decoder that re-reads the history every
few seconds inside the streaming tracker, and the extrapolation-only online
baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import BeatEvent
from .models import (
    EPSILON,
    ActivationFrame,
    TransitionParams,
    beat_observation_vector,
    transition_log_matrix,
)
from .state_space import BarStateSpace, BeatStateSpace

__all__ = [
    "DecodedPath",
    "viterbi_decode",
    "decode_with_downbeats",
    "extrapolate_beats",
    "extrapolate_downbeats",
    "modal_meter",
    "OnlineDbnState",
    "online_dbn_track",
    "beat_log_emissions",
]


@dataclass
class DecodedPath:
    """Decoded state sequence plus the beat/downbeat timestamps it implies."""

    states: np.ndarray
    beat_times: np.ndarray
    downbeat_times: np.ndarray
    fps: int
    log_prob: float


def _as_activation_array(activations) -> np.ndarray:
    arr = np.asarray(
        [[f.beat, f.downbeat] for f in activations]
        if not isinstance(activations, np.ndarray) else activations,
        dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (frames, 2) activations, got shape {arr.shape}")
    return arr


def beat_log_emissions(space: BeatStateSpace, beat_activations: np.ndarray) -> np.ndarray:
    """Per-frame, per-state log likelihoods for the beat plane."""
    return np.log(np.stack(
        [beat_observation_vector(space, float(b)) for b in beat_activations]))


def _viterbi(log_emissions: np.ndarray, tm) -> tuple[np.ndarray, float]:
    """Best path under a uniform start; ties resolve to the lowest state index."""
    n_frames, n_states = log_emissions.shape
    edges = len(tm.from_state)
    starts = tm.pred_start
    counts = np.diff(np.append(starts, edges))
    edge_pos = np.arange(edges)

    delta = float(np.log(1.0 / n_states)) + log_emissions[0]
    backptr = np.zeros((n_frames, n_states), dtype=np.int32)
    for t in range(1, n_frames):
        cand = delta[tm.from_state] + tm.log_prob
        best = np.maximum.reduceat(cand, starts)
        # first edge achieving the group max, so ties pick the lowest from-state
        hit = np.where(cand == np.repeat(best, counts), edge_pos, edges)
        backptr[t] = tm.from_state[np.minimum.reduceat(hit, starts)]
        delta = best + log_emissions[t]

    path = np.zeros(n_frames, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(n_frames - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, float(delta[path[-1]])


def _beat_entry_frames(space: BeatStateSpace, path: np.ndarray) -> np.ndarray:
    in_window = space.beat_mask[path]
    prev = np.concatenate(([False], in_window[:-1]))
    return np.flatnonzero(in_window & ~prev)


def viterbi_decode(activations, space: BeatStateSpace,
                   params: TransitionParams) -> DecodedPath:
    """Decode a full activation sequence over the beat plane.

    Beat timestamps are the frames where the best path enters the beat
    window, in seconds.  Downbeats are left empty here; see
    :func:`decode_with_downbeats` for the cascaded bar stage.
    """
    arr = _as_activation_array(activations)
    if len(arr) == 0:
        raise ValueError("cannot decode an empty activation sequence")
    tm = transition_log_matrix(space, params)
    path, log_prob = _viterbi(beat_log_emissions(space, arr[:, 0]), tm)
    beat_frames = _beat_entry_frames(space, path)
    return DecodedPath(
        states=path,
        beat_times=beat_frames / space.fps,
        downbeat_times=np.empty(0),
        fps=space.fps,
        log_prob=log_prob,
    )


def decode_with_downbeats(activations, beat_space: BeatStateSpace,
                          bar_space: BarStateSpace,
                          params: TransitionParams) -> DecodedPath:
    """Beat-plane decode followed by a bar-plane decode at the found beats."""
    arr = _as_activation_array(activations)
    decoded = viterbi_decode(arr, beat_space, params)
    if len(decoded.beat_times) == 0:
        return decoded
    beat_frames = np.round(decoded.beat_times * beat_space.fps).astype(int)
    emissions = np.log(np.maximum(
        np.where(bar_space.downbeat_mask[None, :],
                 arr[beat_frames, 1, None], arr[beat_frames, 0, None]),
        EPSILON))
    bar_path, _ = _viterbi(emissions, transition_log_matrix(bar_space, params))
    flags = bar_space.downbeat_mask[bar_path]
    return DecodedPath(
        states=decoded.states,
        beat_times=decoded.beat_times,
        downbeat_times=decoded.beat_times[flags],
        fps=beat_space.fps,
        log_prob=decoded.log_prob,
    )


def extrapolate_beats(history, horizon: float, interval_window: int = 8) -> np.ndarray:
    """Continue a beat history by its recent median inter-beat interval.

    Returns the beats in (last, last + horizon], spaced by the median of the
    last `interval_window` intervals.
    """
    history = np.asarray(history, dtype=float)
    if len(history) < 2:
        raise ValueError("need at least 2 historical beats to extrapolate")
    intervals = np.diff(history)
    ibi = float(np.median(intervals[-interval_window:]))
    if ibi <= 0:
        raise ValueError(f"non-positive inter-beat interval {ibi}")
    count = int(np.floor(horizon / ibi + 1e-9))
    return history[-1] + ibi * np.arange(1, count + 1)


def modal_meter(beat_history, downbeat_history, default: int | None = None) -> int:
    """Most common beats-per-bar between consecutive downbeats (ties go low)."""
    beats = np.asarray(beat_history, dtype=float)
    downs = np.asarray(downbeat_history, dtype=float)
    if len(downs) < 2:
        if default is None:
            raise ValueError("need at least 2 downbeats to estimate a meter")
        return default
    idx = np.searchsorted(beats, downs - 1e-9)
    spans = np.diff(idx)
    spans = spans[spans > 0]
    if spans.size == 0:
        if default is None:
            raise ValueError("downbeat history spans no beats")
        return default
    return int(np.argmax(np.bincount(spans)))


def extrapolate_downbeats(beat_history, downbeat_history, future_beats,
                          meter: int) -> np.ndarray:
    """Mark every meter-th future beat, phase-aligned to the last downbeat."""
    downs = np.asarray(downbeat_history, dtype=float)
    if len(downs) == 0:
        raise ValueError("cannot extrapolate downbeats without any downbeat history")
    if meter < 1:
        raise ValueError(f"meter must be >= 1, got {meter}")
    future_beats = np.asarray(future_beats, dtype=float)
    beats = np.asarray(beat_history, dtype=float)
    since_last = int(np.sum(beats > downs[-1] + 1e-6))
    k = np.arange(1, len(future_beats) + 1)
    return future_beats[(since_last + k) % meter == 0]


class OnlineDbnState:
    """Causal tracker driven purely by periodic decodes and extrapolation.

    Nothing is emitted before the first scheduled decode; afterwards, beats
    come from the latest decode's extrapolations only, so the method is blind
    to rhythmic changes between decode points.
    """

    def __init__(self, beat_space: BeatStateSpace, bar_space: BarStateSpace,
                 params: TransitionParams, fps: int,
                 first_decode_at: float = 5.0, period: float = 6.0,
                 horizon_slack: float = 2.0, interval_window: int = 8,
                 min_bpm: float | None = None, max_bpm: float | None = None):
        self.beat_space = beat_space
        self.bar_space = bar_space
        self.params = params
        self.fps = fps
        self.first_decode_at = first_decode_at
        self.period = period
        self.horizon_slack = horizon_slack
        self.interval_window = interval_window
        self.min_bpm = min_bpm if min_bpm is not None else fps * 60.0 / beat_space.tau_max
        self.max_bpm = max_bpm if max_bpm is not None else fps * 60.0 / beat_space.tau_min
        self._beat_acts: list[float] = []
        self._down_acts: list[float] = []
        self._frame = 0
        self._next_decode = first_decode_at
        self._pending: list[tuple[float, bool, float]] = []
        self.decode_log: list[int] = []
        self.last_extrapolation: np.ndarray = np.empty(0)

    def _decode_and_extrapolate(self):
        frames = self._frame  # decode everything strictly before "now"
        self.decode_log.append(frames)
        arr = np.column_stack([self._beat_acts[:frames], self._down_acts[:frames]])
        decoded = decode_with_downbeats(arr, self.beat_space, self.bar_space,
                                        self.params)
        self._pending = []
        self.last_extrapolation = np.empty(0)
        if len(decoded.beat_times) < 2:
            return
        horizon = self.period + self.horizon_slack
        future = extrapolate_beats(decoded.beat_times, horizon,
                                   self.interval_window)
        self.last_extrapolation = future
        if len(future) == 0:
            return
        ibi = future[0] - decoded.beat_times[-1]
        tempo = float(np.clip(60.0 / ibi, self.min_bpm, self.max_bpm))
        if len(decoded.downbeat_times):
            meter = modal_meter(decoded.beat_times, decoded.downbeat_times,
                                default=max(self.bar_space.meters))
            downs = set(np.round(extrapolate_downbeats(
                decoded.beat_times, decoded.downbeat_times, future, meter), 9))
        else:
            downs = set()
        now = self._frame / self.fps
        self._pending = [(t, round(t, 9) in downs, tempo)
                         for t in future if t > now + 1e-9]

    def step(self, frame) -> list[BeatEvent]:
        now = self._frame / self.fps
        while now + 1e-9 >= self._next_decode:
            self._decode_and_extrapolate()
            self._next_decode += self.period
        self._beat_acts.append(frame.beat)
        self._down_acts.append(frame.downbeat)
        events = []
        if self._pending and self._pending[0][0] <= now + 1e-9:
            t, is_down, tempo = self._pending.pop(0)
            events.append(BeatEvent(time=now, is_downbeat=is_down,
                                    tempo_bpm=tempo, frame=self._frame))
        self._frame += 1
        return events


def online_dbn_track(activations, beat_space: BeatStateSpace,
                     bar_space: BarStateSpace, params: TransitionParams,
                     fps: int, first_decode_at: float = 5.0,
                     period: float = 6.0, **kwargs) -> list[BeatEvent]:
    """Run the extrapolation-only baseline over a whole activation sequence."""
    state = OnlineDbnState(beat_space, bar_space, params, fps,
                           first_decode_at=first_decode_at, period=period,
                           **kwargs)
    events: list[BeatEvent] = []
    arr = _as_activation_array(activations)
    for beat, down in arr:
        events.extend(state.step(ActivationFrame(float(beat), float(down))))
    return events
