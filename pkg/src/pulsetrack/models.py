"""Observation and transition models over the pointer state spaces.

Both the particle filter and the Viterbi decoder read the same dynamics:
deterministic phase advance inside a row, and a row-change kernel at the
wrap (beat or bar boundary).  Likelihoods are floored at EPSILON so no
state ever collapses to exactly zero weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .state_space import BarStateSpace, BeatStateSpace

__all__ = [
    "EPSILON",
    "ActivationFrame",
    "TransitionParams",
    "beat_observation_likelihood",
    "beat_observation_vector",
    "bar_observation_likelihood",
    "bar_observation_vector",
    "wrap_distribution",
    "sample_beat_transition",
    "sample_transition",
    "TransitionMatrix",
    "transition_log_matrix",
]

EPSILON = 1e-8


@dataclass(frozen=True)
class ActivationFrame:
    """One frame of network output: beat and downbeat probabilities."""

    beat: float
    downbeat: float

    def __post_init__(self):
        if not (0.0 <= self.beat <= 1.0 and 0.0 <= self.downbeat <= 1.0):
            raise ValueError(
                f"activations must lie in [0, 1], got beat={self.beat}, "
                f"downbeat={self.downbeat}")


@dataclass(frozen=True)
class TransitionParams:
    """Row-change behaviour at wrap boundaries.

    tempo_change_prob : chance of leaving the current period at a beat wrap.
    tempo_change_decay : exponential rate per frame of period difference.
    meter_change_prob : chance of leaving the current meter at a bar wrap.
    """

    tempo_change_prob: float = 0.05
    tempo_change_decay: float = 0.6
    meter_change_prob: float = 0.02

    def __post_init__(self):
        for name in ("tempo_change_prob", "meter_change_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.tempo_change_decay <= 0:
            raise ValueError(
                f"tempo_change_decay must be positive, got {self.tempo_change_decay}")


def beat_observation_vector(space: BeatStateSpace, beat_activation: float) -> np.ndarray:
    """Per-state likelihood of one frame's beat activation.

    Beat states score the activation itself; non-beat states score the
    residual (1 - activation) divided by the space's spread divisor.
    Everything is floored at EPSILON.
    """
    b = float(beat_activation)
    knorm = space.nonbeat_knorm[space.interval_index]
    out = np.where(space.beat_mask, b, (1.0 - b) / knorm)
    return np.maximum(out, EPSILON)


def beat_observation_likelihood(space: BeatStateSpace, state: int,
                                frame: ActivationFrame) -> float:
    """Likelihood of `frame` under a single beat-plane state."""
    if not 0 <= state < space.num_states:
        raise ValueError(f"state {state} outside space of {space.num_states}")
    return float(beat_observation_vector(space, frame.beat)[state])


def bar_observation_vector(space: BarStateSpace, frame: ActivationFrame) -> np.ndarray:
    """Per-state likelihood for the bar plane, evaluated at a detected beat."""
    out = np.where(space.downbeat_mask, float(frame.downbeat), float(frame.beat))
    return np.maximum(out, EPSILON)


def bar_observation_likelihood(space: BarStateSpace, state: int,
                               frame: ActivationFrame) -> float:
    if not 0 <= state < space.num_states:
        raise ValueError(f"state {state} outside space of {space.num_states}")
    return float(bar_observation_vector(space, frame)[state])


@lru_cache(maxsize=64)
def wrap_distribution(space, params: TransitionParams) -> np.ndarray:
    """Row-change matrix applied when a pointer wraps.

    Entry [i, j] is the probability of continuing in row j after finishing a
    pass through row i.  Beat plane: stay with 1 - tempo_change_prob, switch
    proportionally to exp(-decay * |tau_j - tau_i|).  Bar plane: stay with
    1 - meter_change_prob, switch uniformly.  Rows are stochastic.
    """
    intervals = space.intervals.astype(float)
    n = len(intervals)
    if n == 1:
        return np.ones((1, 1))
    if isinstance(space, BarStateSpace):
        q = params.meter_change_prob
        mat = np.full((n, n), q / (n - 1))
        np.fill_diagonal(mat, 1.0 - q)
        return mat
    p = params.tempo_change_prob
    kernel = np.exp(-params.tempo_change_decay
                    * np.abs(intervals[:, None] - intervals[None, :]))
    np.fill_diagonal(kernel, 0.0)
    kernel /= kernel.sum(axis=1, keepdims=True)
    mat = p * kernel
    np.fill_diagonal(mat, 1.0 - p)
    return mat


@lru_cache(maxsize=64)
def _wrap_cdf(space, params: TransitionParams) -> np.ndarray:
    cdf = np.cumsum(wrap_distribution(space, params), axis=1)
    cdf[:, -1] = 1.0
    return cdf


def sample_transition(space, state: int, params: TransitionParams, rng) -> int:
    """Advance one pointer state: deterministic inside a row, random at wrap."""
    if not 0 <= state < space.num_states:
        raise ValueError(f"state {state} outside space of {space.num_states}")
    if not space.boundary_mask[state]:
        return state + 1
    row = int(space.interval_index[state])
    cdf = _wrap_cdf(space, params)[row]
    new_row = int(np.searchsorted(cdf, rng.random(), side="right"))
    return int(space.row_start[min(new_row, len(cdf) - 1)])


def sample_beat_transition(space: BeatStateSpace, state: int,
                           params: TransitionParams, rng) -> int:
    """Beat-plane step: phase +1, or wrap to phase 0 of a (possibly new) period."""
    return sample_transition(space, state, params, rng)


@dataclass
class TransitionMatrix:
    """Sparse one-step dynamics, edges sorted by (to_state, from_state).

    `pred_start[s]` indexes the first edge entering state s; every state has
    at least one predecessor, so the groups tile the edge arrays.
    """

    num_states: int
    from_state: np.ndarray
    to_state: np.ndarray
    prob: np.ndarray
    log_prob: np.ndarray
    pred_start: np.ndarray

    def row_sums(self) -> np.ndarray:
        """Outgoing probability mass per state; 1.0 everywhere by construction."""
        return np.bincount(self.from_state, weights=self.prob,
                           minlength=self.num_states)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.num_states, self.num_states))
        dense[self.from_state, self.to_state] = self.prob
        return dense

    def edge_prob(self, i: int, j: int) -> float:
        """Probability of the i -> j edge (0.0 if absent)."""
        lo = self.pred_start[j]
        hi = self.pred_start[j + 1] if j + 1 < self.num_states else len(self.prob)
        hit = np.flatnonzero(self.from_state[lo:hi] == i)
        return float(self.prob[lo + hit[0]]) if hit.size else 0.0


@lru_cache(maxsize=64)
def transition_log_matrix(space, params: TransitionParams) -> TransitionMatrix:
    """Materialize the pointer dynamics as a sparse row-stochastic matrix.

    Interior-phase states have exactly one successor (phase + 1); boundary
    states fan out to the phase-0 state of every reachable row.  Zero-mass
    edges are dropped.
    """
    interior = np.flatnonzero(~space.boundary_mask)
    from_i = interior
    to_i = interior + 1
    p_i = np.ones(len(interior))

    wrap = wrap_distribution(space, params)
    rows, cols = np.nonzero(wrap > 0.0)
    boundary_of_row = space.row_start + space.intervals - 1
    from_b = boundary_of_row[rows]
    to_b = space.row_start[cols]
    p_b = wrap[rows, cols]

    from_all = np.concatenate([from_i, from_b])
    to_all = np.concatenate([to_i, to_b])
    p_all = np.concatenate([p_i, p_b])
    order = np.lexsort((from_all, to_all))
    from_all, to_all, p_all = from_all[order], to_all[order], p_all[order]
    pred_start = np.searchsorted(to_all, np.arange(space.num_states))
    return TransitionMatrix(
        num_states=space.num_states,
        from_state=from_all,
        to_state=to_all,
        prob=p_all,
        log_prob=np.log(p_all),
        pred_start=pred_start,
    )
