"""Sequential Monte Carlo core with dynamic particle injection.

One step is: advance every particle, reweight by the frame's observation
likelihood, optionally inject extra particles at beat/downbeat states (the
population transiently grows), systematically resample the enlarged
population, then remove as many random particles as were injected.  The
population size is therefore identical at the end of every step regardless
of how many injections fired.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    ActivationFrame,
    TransitionParams,
    bar_observation_vector,
    beat_observation_vector,
    _wrap_cdf,
)
from .state_space import BarStateSpace, BeatStateSpace

__all__ = [
    "BEAT_STATES",
    "DOWNBEAT_STATES",
    "ParticleSet",
    "InjectionRequest",
    "init_particles",
    "step",
    "systematic_resample",
    "estimate_phase",
    "estimate_state",
    "salience_trigger",
    "weighted_median",
    "circular_weighted_median",
]

BEAT_STATES = "beat-states"
DOWNBEAT_STATES = "downbeat-states"

_WEIGHT_TOL = 1e-9


@dataclass
class ParticleSet:
    """Weighted particle population over flat state indices."""

    states: np.ndarray
    weights: np.ndarray
    n: int

    def check_count(self):
        if len(self.states) != self.n or len(self.weights) != self.n:
            raise RuntimeError(
                f"particle count broken: {len(self.states)} states / "
                f"{len(self.weights)} weights, expected {self.n}")


@dataclass(frozen=True)
class InjectionRequest:
    """Ask for `count` extra particles at beat or downbeat states."""

    count: int
    target: str = BEAT_STATES
    cause: str = "salience"

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"injection count must be >= 1, got {self.count}")
        if self.target not in (BEAT_STATES, DOWNBEAT_STATES):
            raise ValueError(f"unknown injection target {self.target!r}")
        if self.cause not in ("salience", "extrapolation", "both"):
            raise ValueError(f"unknown injection cause {self.cause!r}")


def init_particles(space, n: int, rng) -> ParticleSet:
    """Spread n particles uniformly over the space with uniform weights."""
    if n < 1:
        raise ValueError(f"particle count must be >= 1, got {n}")
    states = rng.integers(0, space.num_states, size=n)
    return ParticleSet(states=states, weights=np.full(n, 1.0 / n), n=n)


def systematic_resample(weights: np.ndarray, m: int, rng) -> np.ndarray:
    """Low-variance resampling: index i appears floor(m*w_i) or ceil(m*w_i) times."""
    weights = np.asarray(weights, dtype=float)
    if m < 1:
        raise ValueError(f"output count must be >= 1, got {m}")
    total = weights.sum()
    if abs(total - 1.0) > _WEIGHT_TOL:
        raise ValueError(f"weights must be normalized, sum to {total!r}")
    positions = (rng.random() + np.arange(m)) / m
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.minimum(np.searchsorted(cumulative, positions, side="right"),
                      len(weights) - 1)


def _advance(space, states: np.ndarray, params: TransitionParams, rng) -> np.ndarray:
    """Vectorized pointer advance; matches `models.sample_transition` row kernels."""
    out = states + 1
    wrapping = np.flatnonzero(space.boundary_mask[states])
    if wrapping.size:
        cdf = _wrap_cdf(space, params)
        n_rows = cdf.shape[0]
        rows = space.interval_index[states[wrapping]]
        # one searchsorted for all rows: offset each row's cdf into its own
        # unit slot, then look up row + u in the flattened staircase
        flat = (cdf + np.arange(n_rows)[:, None]).ravel()
        pos = np.searchsorted(flat, rows + rng.random(wrapping.size), side="right")
        new_rows = np.minimum(pos - rows * n_rows, n_rows - 1)
        out[wrapping] = space.row_start[new_rows]
    return out


def _observation_vector(space, frame: ActivationFrame) -> np.ndarray:
    if isinstance(space, BarStateSpace):
        return bar_observation_vector(space, frame)
    return beat_observation_vector(space, frame.beat)


def _target_states(space, target: str) -> np.ndarray:
    if target == BEAT_STATES:
        if not isinstance(space, BeatStateSpace):
            raise ValueError("beat-state injections need a BeatStateSpace")
        return np.flatnonzero(space.beat_mask)
    if not isinstance(space, BarStateSpace):
        raise ValueError("downbeat-state injections need a BarStateSpace")
    return np.flatnonzero(space.downbeat_mask)


def step(ps: ParticleSet, space, frame: ActivationFrame, params: TransitionParams,
         injections, rng, removal_pool: str = "all") -> ParticleSet:
    """One filtering step; returns a new ParticleSet of exactly ps.n particles.

    `injections` is a sequence of InjectionRequest.  Injected particles are
    placed uniformly over their target states and enter the resampling pool
    with weight 1/n, so they compete with, rather than displace, the existing
    swarm.  `removal_pool` selects where the compensating removals are drawn
    from: "all" (default) removes uniformly over the whole resampled
    population, "survivors" only over offspring of pre-injection particles.
    """
    n = ps.n
    states = _advance(space, ps.states, params, rng)
    weights = ps.weights * _observation_vector(space, frame)[states]
    weights = weights / weights.sum()

    k_total = 0
    origin_cut = len(states)
    for req in injections:
        if req.count > n:
            raise ValueError(f"cannot inject {req.count} into a population of {n}")
        targets = _target_states(space, req.target)
        placed = rng.choice(targets, size=req.count, replace=True)
        states = np.concatenate([states, placed])
        weights = np.concatenate([weights, np.full(req.count, 1.0 / n)])
        k_total += req.count
    if k_total:
        weights = weights / weights.sum()

    m = n + k_total
    picked = systematic_resample(weights, m, rng)
    states = states[picked]

    if k_total:
        if removal_pool == "survivors":
            candidates = np.flatnonzero(picked < origin_cut)
            if candidates.size < k_total:
                candidates = np.arange(m)
        else:
            candidates = np.arange(m)
        drop = rng.choice(candidates, size=k_total, replace=False)
        states = np.delete(states, drop)

    out = ParticleSet(states=states, weights=np.full(n, 1.0 / n), n=n)
    out.check_count()
    return out


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Weighted median; an exact 0.5 split returns the midpoint of its neighbours."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    k = int(np.searchsorted(cw, 0.5 - 1e-12, side="left"))
    if abs(cw[k] - 0.5) <= 1e-12 and k + 1 < len(v):
        return 0.5 * (v[k] + v[k + 1])
    return float(v[k])


def circular_weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Weighted median on the unit circle [0, 1).

    Rotates the data so its circular mean sits at 0.5, takes the linear
    weighted median there, and rotates back; wrap-around clusters near 0/1
    therefore behave like contiguous ones.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    angles = 2.0 * np.pi * values
    c = float(np.sum(weights * np.cos(angles)))
    s = float(np.sum(weights * np.sin(angles)))
    if np.hypot(c, s) < 1e-12:
        return weighted_median(values, weights)
    mean = (np.arctan2(s, c) / (2.0 * np.pi)) % 1.0
    shifted = (values - mean + 0.5) % 1.0
    return (weighted_median(shifted, weights) + mean - 0.5) % 1.0


def estimate_phase(ps: ParticleSet, space) -> tuple[float, float]:
    """Swarm location: (circular median of phase fraction, median interval).

    The phase fraction is phase/interval per particle, so populations mixing
    several intervals still vote on a common [0, 1) axis.
    """
    if len(ps.states) == 0:
        raise ValueError("cannot estimate from an empty particle set")
    intervals = space.state_interval[ps.states]
    period = weighted_median(intervals, ps.weights)
    fractions = space.state_phase[ps.states] / intervals
    fraction = circular_weighted_median(fractions, ps.weights)
    return fraction, period


def estimate_state(ps: ParticleSet, space) -> int:
    """Modal state of the swarm (weighted; ties go to the lowest index)."""
    mass = np.bincount(ps.states, weights=ps.weights, minlength=space.num_states)
    return int(np.argmax(mass))


def salience_trigger(frame: ActivationFrame, threshold: float) -> tuple[bool, bool]:
    """Threshold the frame's activations (>= fires, per-channel)."""
    return frame.beat >= threshold, frame.downbeat >= threshold
