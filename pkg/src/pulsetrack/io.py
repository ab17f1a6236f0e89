"""Text file formats and the synthetic activation generator.

Activation files carry a `# fps=<int>` header followed by one
`beat,downbeat` row per frame, six decimals on write.  Annotation files are
`<time>\\t<position-in-bar>` lines; position 1 marks a downbeat.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluation import Annotation
from .models import ActivationFrame

__all__ = [
    "ActivationFormatError",
    "AnnotationFormatError",
    "SynthSpec",
    "read_activations",
    "write_activations",
    "read_annotations",
    "write_annotations",
    "write_events",
    "synthesize_activations",
]


class ActivationFormatError(ValueError):
    """Malformed activation file; message names the offending line."""


class AnnotationFormatError(ValueError):
    """Malformed annotation file; message names the offending line."""


def read_activations(path) -> tuple[int, list[ActivationFrame]]:
    """Parse an activation file into (fps, frames)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# fps="):
        raise ActivationFormatError(f"{path}: line 1: missing '# fps=<int>' header")
    try:
        fps = int(lines[0][len("# fps="):])
    except ValueError:
        raise ActivationFormatError(f"{path}: line 1: malformed fps header "
                                    f"{lines[0]!r}") from None
    if fps <= 0:
        raise ActivationFormatError(f"{path}: line 1: fps must be positive, got {fps}")
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ActivationFormatError(
                f"{path}: line {lineno}: expected 'beat,downbeat', got {line!r}")
        try:
            beat, down = float(parts[0]), float(parts[1])
        except ValueError:
            raise ActivationFormatError(
                f"{path}: line {lineno}: non-numeric value in {line!r}") from None
        if not (0.0 <= beat <= 1.0 and 0.0 <= down <= 1.0):
            raise ActivationFormatError(
                f"{path}: line {lineno}: values must lie in [0, 1], got {line!r}")
        frames.append(ActivationFrame(beat, down))
    return fps, frames


def write_activations(path, fps: int, frames) -> None:
    rows = [f"# fps={int(fps)}"]
    for f in frames:
        beat, down = (f.beat, f.downbeat) if isinstance(f, ActivationFrame) else f
        rows.append(f"{beat:.6f},{down:.6f}")
    Path(path).write_text("\n".join(rows) + "\n")


def read_annotations(path) -> Annotation:
    """Parse `<time>\\t<position>` lines; position 1 is a downbeat.

    Position 0 (as written by `pulsetrack track`) also counts as a plain
    beat, so tracker output can be re-read for evaluation.
    """
    beats, downs = [], []
    prev = -np.inf
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise AnnotationFormatError(
                f"{path}: line {lineno}: expected '<time> <position>', got {line!r}")
        try:
            t = float(parts[0])
            pos = int(parts[1])
        except ValueError:
            raise AnnotationFormatError(
                f"{path}: line {lineno}: non-numeric field in {line!r}") from None
        if t < prev:
            raise AnnotationFormatError(
                f"{path}: line {lineno}: times must be non-decreasing")
        if pos < 0:
            raise AnnotationFormatError(
                f"{path}: line {lineno}: negative bar position {pos}")
        prev = t
        beats.append(t)
        if pos == 1:
            downs.append(t)
    return Annotation(beats=np.asarray(beats), downbeats=np.asarray(downs))


def write_annotations(path, annotation: Annotation) -> None:
    """Write beats with positions counted from the preceding downbeat."""
    downs = set(np.round(annotation.downbeats, 9))
    rows = []
    position = 2
    for t in annotation.beats:
        if round(float(t), 9) in downs:
            position = 1
        rows.append(f"{t:.6f}\t{position}")
        position += 1
    Path(path).write_text("\n".join(rows) + "\n")


def write_events(path, events) -> None:
    """Tracker output: one `<time>\\t<1|0>` line per event (1 = downbeat)."""
    rows = [f"{e.time:.6f}\t{1 if e.is_downbeat else 0}" for e in events]
    Path(path).write_text("\n".join(rows) + ("\n" if rows else ""))


@dataclass(frozen=True)
class SynthSpec:
    """Ground truth plus peak/noise shape for a synthetic activation clip.

    `height` may be a scalar or one value per beat; `duration` defaults to
    one second past the last beat.
    """

    beat_times: np.ndarray
    downbeat_flags: np.ndarray
    sigma: float = 0.04
    height: float | np.ndarray = 0.95
    noise: float = 0.05
    fps: int = 50
    seed: int = 0
    duration: float | None = None

    def __post_init__(self):
        beats = np.asarray(self.beat_times, dtype=float)
        flags = np.asarray(self.downbeat_flags, dtype=bool)
        object.__setattr__(self, "beat_times", beats)
        object.__setattr__(self, "downbeat_flags", flags)
        if len(beats) != len(flags):
            raise ValueError("one downbeat flag per beat is required")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        heights = np.broadcast_to(np.asarray(self.height, dtype=float), beats.shape)
        if np.any(heights < 0) or np.any(heights > 1):
            raise ValueError("peak heights must lie in [0, 1]")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError(f"noise must lie in [0, 1], got {self.noise}")

    def annotation(self) -> Annotation:
        return Annotation(beats=self.beat_times,
                          downbeats=self.beat_times[self.downbeat_flags])


def _gaussian_channel(t: np.ndarray, centers: np.ndarray,
                      heights: np.ndarray, sigma: float) -> np.ndarray:
    out = np.zeros_like(t)
    for c, h in zip(centers, heights):
        lo = np.searchsorted(t, c - 5 * sigma)
        hi = np.searchsorted(t, c + 5 * sigma)
        out[lo:hi] += h * np.exp(-((t[lo:hi] - c) ** 2) / (2 * sigma**2))
    return out


def synthesize_activations(spec: SynthSpec) -> tuple[int, list[ActivationFrame]]:
    """Render ground-truth beats into a noisy activation stream.

    Each channel is a sum of Gaussian bumps at its events, clipped to [0, 1],
    plus uniform noise in [0, spec.noise), clipped again.  Deterministic for
    a fixed seed.
    """
    duration = spec.duration
    if duration is None:
        duration = (float(spec.beat_times[-1]) + 1.0) if len(spec.beat_times) else 1.0
    n = int(round(duration * spec.fps))
    t = np.arange(n) / spec.fps
    heights = np.broadcast_to(np.asarray(spec.height, dtype=float),
                              spec.beat_times.shape)
    beat = np.clip(_gaussian_channel(t, spec.beat_times, heights, spec.sigma), 0, 1)
    down = np.clip(_gaussian_channel(t, spec.beat_times[spec.downbeat_flags],
                                     heights[spec.downbeat_flags], spec.sigma), 0, 1)
    rng = np.random.default_rng(spec.seed)
    beat = np.clip(beat + spec.noise * rng.random(n), 0, 1)
    down = np.clip(down + spec.noise * rng.random(n), 0, 1)
    return spec.fps, [ActivationFrame(float(b), float(d))
                      for b, d in zip(beat, down)]
