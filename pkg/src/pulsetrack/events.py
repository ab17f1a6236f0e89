"""Emitted event type shared by the streaming trackers and the decoders."""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["BeatEvent"]


@dataclass(frozen=True)
class BeatEvent:
    """A tracked beat: emission time, downbeat flag, tempo, emitting frame."""

    time: float
    is_downbeat: bool
    tempo_bpm: float
    frame: int
