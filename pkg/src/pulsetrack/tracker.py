"""Streaming beat/downbeat tracking pipeline.

A Tracker consumes one activation frame at a time and emits zero or more
BeatEvents per frame.  The beat-stage particle filter runs every frame; the
downbeat-stage filter advances once per emitted beat (the cascade is
beat-synchronous).  Method selection:

* ``default``       plain two-stage particle filtering, no injections.
* ``salience``      inject at beat/downbeat states when an activation
                    crosses the salience threshold.
* ``past``          periodically re-decode the full history offline,
                    extrapolate it forward, and inject when an extrapolated
                    beat's time arrives.
* ``combined``      intersection (or union) of the two triggers above.
* ``online-dbn``    extrapolation-only baseline, no particles.
* ``offline-dbn``   buffer everything and decode once in finalize().
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import particle_filter as pf
from .dbn_decoder import (
    OnlineDbnState,
    decode_with_downbeats,
    extrapolate_beats,
    extrapolate_downbeats,
    modal_meter,
)
from .events import BeatEvent
from .models import ActivationFrame, TransitionParams
from .particle_filter import BEAT_STATES, DOWNBEAT_STATES, InjectionRequest
from .state_space import build_bar_space, build_beat_space, round_half_up

__all__ = ["METHODS", "TrackerConfig", "BeatEvent", "Tracker", "create_tracker", "track"]

METHODS = ("default", "salience", "past", "combined", "online-dbn", "offline-dbn")
_PF_METHODS = ("default", "salience", "past", "combined")


@dataclass(frozen=True)
class TrackerConfig:
    """All tracker tunables.

    `decode_period` is the period (seconds) of the past-informed re-decode
    schedule, which starts at `first_decode_at`.  `n_particles` is the
    beat-stage population; injections are sized as a fraction of it.
    """

    fps: int = 50
    min_bpm: float = 60.0
    max_bpm: float = 180.0
    meters: tuple[int, ...] = (2, 3, 4)
    n_particles: int = 1500
    n_bar_particles: int = 250
    salience_threshold: float = 0.4
    decode_period: float = 6.0
    first_decode_at: float = 5.0
    injection_fraction: float = 0.1
    combine_mode: str = "intersection"
    extrapolation_match_window: int = 3
    method: str = "default"
    seed: int = 0
    beat_window_fraction: float = 1.0 / 16.0
    nonbeat_spread: str = "flat"
    transition: TransitionParams = field(default_factory=TransitionParams)
    removal_pool: str = "all"
    extrapolation_slack: float = 2.0
    extrapolation_interval_window: int = 8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.decode_period <= 0:
            raise ValueError(f"decode_period must be positive, got {self.decode_period}")
        if self.first_decode_at < 0:
            raise ValueError(f"first_decode_at must be >= 0, got {self.first_decode_at}")
        if not 0 < self.injection_fraction <= 1:
            raise ValueError(
                f"injection_fraction must be in (0, 1], got {self.injection_fraction}")
        if self.salience_threshold <= 0:
            raise ValueError(
                f"salience_threshold must be positive, got {self.salience_threshold}")
        if self.combine_mode not in ("intersection", "union"):
            raise ValueError(f"combine_mode must be intersection or union, "
                             f"got {self.combine_mode!r}")
        if self.removal_pool not in ("all", "survivors"):
            raise ValueError(f"removal_pool must be all or survivors, "
                             f"got {self.removal_pool!r}")
        if self.n_particles < 1 or self.n_bar_particles < 1:
            raise ValueError("particle counts must be >= 1")
        if self.extrapolation_match_window < 0:
            raise ValueError("extrapolation_match_window must be >= 0")


class Tracker:
    """One causal tracking stream; feed frames in order via step_frame()."""

    def __init__(self, config: TrackerConfig):
        self.config = config
        self.beat_space = build_beat_space(config.fps, config.min_bpm,
                                           config.max_bpm,
                                           config.beat_window_fraction,
                                           config.nonbeat_spread)
        self.bar_space = build_bar_space(config.meters)
        self._rng = np.random.default_rng(config.seed)
        self._frame = 0
        self._beat_acts: list[float] = []
        self._down_acts: list[float] = []
        self._finalized = False
        self.events: list[BeatEvent] = []
        self.decode_log: list[int] = []
        self.frames_stepped = 0

        if config.method in _PF_METHODS:
            self._beat_ps = pf.init_particles(self.beat_space,
                                              config.n_particles, self._rng)
            self._bar_ps = pf.init_particles(self.bar_space,
                                             config.n_bar_particles, self._rng)
            self._prev_in_window = False
            self._last_emit_frame: int | None = None
            self._next_decode = config.first_decode_at
            self._extrap_beats = np.empty(0)
            self._extrap_downs = np.empty(0)
        elif config.method == "online-dbn":
            self._online = OnlineDbnState(
                self.beat_space, self.bar_space, config.transition, config.fps,
                first_decode_at=config.first_decode_at,
                period=config.decode_period,
                horizon_slack=config.extrapolation_slack,
                interval_window=config.extrapolation_interval_window,
                min_bpm=config.min_bpm, max_bpm=config.max_bpm)

    # -- injection logic ---------------------------------------------------

    def decide_injections(self, frame: ActivationFrame,
                          frame_index: int) -> list[InjectionRequest]:
        """Injection requests for the current frame, both stages.

        Salience fires on thresholded activations; past fires when an
        extrapolated beat/downbeat falls within the match window of "now";
        combined requires both (intersection) or either (union).
        """
        cfg = self.config
        if cfg.method == "default" or cfg.method not in _PF_METHODS:
            return []
        sal_beat, sal_down = pf.salience_trigger(frame, cfg.salience_threshold)
        now = frame_index / cfg.fps
        tol = cfg.extrapolation_match_window / cfg.fps + 1e-9
        past_beat = bool(len(self._extrap_beats)
                         and np.min(np.abs(self._extrap_beats - now)) <= tol)
        past_down = bool(len(self._extrap_downs)
                         and np.min(np.abs(self._extrap_downs - now)) <= tol)

        k_beat = max(1, int(cfg.injection_fraction * cfg.n_particles))
        k_bar = max(1, int(cfg.injection_fraction * cfg.n_bar_particles))
        requests: list[InjectionRequest] = []

        def add(target, k, salient, past):
            if cfg.method == "salience":
                if salient:
                    requests.append(InjectionRequest(k, target, "salience"))
            elif cfg.method == "past":
                if past:
                    requests.append(InjectionRequest(k, target, "extrapolation"))
            elif cfg.combine_mode == "intersection":
                if salient and past:
                    requests.append(InjectionRequest(k, target, "both"))
            else:  # combined / union: one request per triggered cause
                if salient:
                    requests.append(InjectionRequest(k, target, "salience"))
                if past:
                    requests.append(InjectionRequest(k, target, "extrapolation"))

        add(BEAT_STATES, k_beat, sal_beat, past_beat)
        add(DOWNBEAT_STATES, k_bar, sal_down, past_down)
        return requests

    # -- past-informed schedule --------------------------------------------

    def scheduled_decode(self, now: float):
        """Re-decode the buffered history and refresh the extrapolations."""
        cfg = self.config
        self.decode_log.append(len(self._beat_acts))
        arr = np.column_stack([self._beat_acts, self._down_acts])
        self._extrap_beats = np.empty(0)
        self._extrap_downs = np.empty(0)
        if len(arr) == 0:
            return
        decoded = decode_with_downbeats(arr, self.beat_space, self.bar_space,
                                        cfg.transition)
        if len(decoded.beat_times) < 2:
            return
        horizon = cfg.decode_period + cfg.extrapolation_slack
        self._extrap_beats = extrapolate_beats(
            decoded.beat_times, horizon, cfg.extrapolation_interval_window)
        if len(decoded.downbeat_times) and len(self._extrap_beats):
            meter = modal_meter(decoded.beat_times, decoded.downbeat_times,
                                default=max(cfg.meters))
            self._extrap_downs = extrapolate_downbeats(
                decoded.beat_times, decoded.downbeat_times,
                self._extrap_beats, meter)

    # -- streaming ----------------------------------------------------------

    def step_frame(self, frame: ActivationFrame) -> list[BeatEvent]:
        """Advance one frame; returns the events emitted at this frame."""
        if not (0.0 <= frame.beat <= 1.0 and 0.0 <= frame.downbeat <= 1.0):
            raise ValueError(f"activations out of range: {frame}")
        cfg = self.config
        f = self._frame
        now = f / cfg.fps

        if cfg.method == "offline-dbn":
            self._append(frame)
            self._frame += 1
            return []
        if cfg.method == "online-dbn":
            events = self._online.step(frame)
            self._frame += 1
            self.decode_log = self._online.decode_log
            self.events.extend(events)
            return events

        if cfg.method in ("past", "combined"):
            while now + 1e-9 >= self._next_decode:
                self.scheduled_decode(now)
                self._next_decode += cfg.decode_period
        self._append(frame)

        requests = self.decide_injections(frame, f)
        beat_reqs = [r for r in requests if r.target == BEAT_STATES]
        bar_reqs = [r for r in requests if r.target == DOWNBEAT_STATES]

        self._beat_ps = pf.step(self._beat_ps, self.beat_space, frame,
                                cfg.transition, beat_reqs, self._rng,
                                cfg.removal_pool)
        self.frames_stepped += 1
        fraction, period = pf.estimate_phase(self._beat_ps, self.beat_space)
        width = max(1, round_half_up(period * cfg.beat_window_fraction))
        in_window = fraction * period < width

        events: list[BeatEvent] = []
        if in_window and not self._prev_in_window and self._refractory_ok(f, period):
            events.append(self._emit(f, now, period, frame, bar_reqs))
        self._prev_in_window = in_window
        self._frame += 1
        return events

    def _append(self, frame: ActivationFrame):
        self._beat_acts.append(frame.beat)
        self._down_acts.append(frame.downbeat)

    def _refractory_ok(self, f: int, period: float) -> bool:
        if self._last_emit_frame is None:
            return True
        min_gap = max(0.5 * period, 0.5 * self.config.fps * 60.0 / self.config.max_bpm)
        return f - self._last_emit_frame >= min_gap

    def _emit(self, f: int, now: float, period: float, frame: ActivationFrame,
              bar_reqs) -> BeatEvent:
        cfg = self.config
        self._bar_ps = pf.step(self._bar_ps, self.bar_space, frame,
                               cfg.transition, bar_reqs, self._rng,
                               cfg.removal_pool)
        mode = pf.estimate_state(self._bar_ps, self.bar_space)
        tempo = float(np.clip(cfg.fps * 60.0 / period, cfg.min_bpm, cfg.max_bpm))
        event = BeatEvent(time=now,
                          is_downbeat=bool(self.bar_space.downbeat_mask[mode]),
                          tempo_bpm=tempo, frame=f)
        self._last_emit_frame = f
        self.events.append(event)
        return event

    # -- end of stream -------------------------------------------------------

    def finalize(self) -> list[BeatEvent]:
        """Flush end-of-stream output; only offline-dbn emits anything here."""
        if self._finalized:
            return []
        self._finalized = True
        if self.config.method != "offline-dbn" or not self._beat_acts:
            return []
        cfg = self.config
        arr = np.column_stack([self._beat_acts, self._down_acts])
        decoded = decode_with_downbeats(arr, self.beat_space, self.bar_space,
                                        cfg.transition)
        downs = set(np.round(decoded.downbeat_times, 9))
        events = []
        for t in decoded.beat_times:
            frame_idx = int(round(t * cfg.fps))
            period = float(self.beat_space.state_interval[decoded.states[frame_idx]])
            tempo = float(np.clip(cfg.fps * 60.0 / period, cfg.min_bpm, cfg.max_bpm))
            events.append(BeatEvent(time=float(t),
                                    is_downbeat=round(float(t), 9) in downs,
                                    tempo_bpm=tempo, frame=frame_idx))
        self.events.extend(events)
        return events


def create_tracker(config: TrackerConfig) -> Tracker:
    """Build a tracker; raises on invalid configuration."""
    return Tracker(config)


def track(activations, config: TrackerConfig) -> list[BeatEvent]:
    """Run a whole activation sequence through a fresh tracker."""
    tracker = Tracker(config)
    events: list[BeatEvent] = []
    for item in activations:
        frame = item if isinstance(item, ActivationFrame) \
            else ActivationFrame(float(item[0]), float(item[1]))
        events.extend(tracker.step_frame(frame))
    events.extend(tracker.finalize())
    return events
