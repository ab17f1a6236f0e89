"""Causal beat and downbeat tracking on activation streams.

The engine consumes per-frame beat/downbeat probabilities (e.g. from a
neural front-end) and emits timestamped beat events in real time via a
two-stage particle filter with dynamic particle injection.  Offline and
extrapolation-only Viterbi baselines, an F-measure evaluator, a synthetic
activation generator, and a benchmark harness are included.
"""

from .evaluation import Annotation, EvalResult, aggregate, apply_skip, evaluate_clip, f_measure
from .events import BeatEvent
from .io import SynthSpec, read_activations, read_annotations, synthesize_activations, write_activations, write_annotations
from .models import ActivationFrame, TransitionParams
from .particle_filter import InjectionRequest, ParticleSet
from .state_space import BarStateSpace, BeatStateSpace, build_bar_space, build_beat_space
from .tracker import METHODS, Tracker, TrackerConfig, create_tracker, track

__version__ = "0.1.0"

__all__ = [
    "ActivationFrame",
    "Annotation",
    "BarStateSpace",
    "BeatEvent",
    "BeatStateSpace",
    "EvalResult",
    "InjectionRequest",
    "METHODS",
    "ParticleSet",
    "SynthSpec",
    "Tracker",
    "TrackerConfig",
    "TransitionParams",
    "aggregate",
    "apply_skip",
    "build_bar_space",
    "build_beat_space",
    "create_tracker",
    "evaluate_clip",
    "f_measure",
    "read_activations",
    "read_annotations",
    "synthesize_activations",
    "track",
    "write_activations",
    "write_annotations",
]
