"""Command-line surface: track, eval, synth, bench.

Exit codes are stable for scripting: 0 success, 1 usage error, 2 I/O or
parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchmark
from .evaluation import DEFAULT_SKIPS, DEFAULT_TOLERANCES, evaluate_clip, f_measure, apply_skip
from .io import (
    ActivationFormatError,
    AnnotationFormatError,
    SynthSpec,
    read_activations,
    read_annotations,
    synthesize_activations,
    write_activations,
    write_events,
)
from .tracker import METHODS, TrackerConfig, track

__all__ = ["cli_main", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.exit_with_usage(message))

    def exit_with_usage(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return EXIT_USAGE


def _build_parser() -> _Parser:
    parser = _Parser(prog="pulsetrack",
                     description="Causal beat/downbeat tracking on activation streams")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_track = sub.add_parser("track", help="track beats in an activation file")
    p_track.add_argument("--activations", required=True)
    p_track.add_argument("--method", required=True, choices=METHODS)
    p_track.add_argument("--config", help="JSON file of TrackerConfig overrides")
    p_track.add_argument("--seed", type=int, default=0)
    p_track.add_argument("--out", required=True)

    p_eval = sub.add_parser("eval", help="score estimated beats against a reference")
    p_eval.add_argument("--est", required=True)
    p_eval.add_argument("--ref", required=True)
    p_eval.add_argument("--tolerance", type=float, default=None)
    p_eval.add_argument("--skip", type=float, default=None)

    p_synth = sub.add_parser("synth", help="render annotations into activations")
    p_synth.add_argument("--ann", required=True)
    p_synth.add_argument("--fps", type=int, default=50)
    p_synth.add_argument("--noise", type=float, default=0.05)
    p_synth.add_argument("--sigma", type=float, default=0.04)
    p_synth.add_argument("--height", type=float, default=0.95)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)

    p_bench = sub.add_parser("bench", help="method comparison over a corpus directory")
    p_bench.add_argument("--corpus", required=True)
    p_bench.add_argument("--methods", default=",".join(METHODS))
    p_bench.add_argument("--seeds", default="0")
    p_bench.add_argument("--config", help="JSON file of TrackerConfig overrides")
    return parser


def _load_config(path, fps: int, method: str, seed: int) -> TrackerConfig:
    overrides = {}
    if path:
        overrides = json.loads(Path(path).read_text())
        if "meters" in overrides:
            overrides["meters"] = tuple(overrides["meters"])
    overrides.update(fps=fps, method=method, seed=seed)
    return TrackerConfig(**overrides)


def _cmd_track(args) -> int:
    fps, frames = read_activations(args.activations)
    config = _load_config(args.config, fps, args.method, args.seed)
    events = track(frames, config)
    write_events(args.out, events)
    return EXIT_OK


def _cmd_eval(args) -> int:
    est = read_annotations(args.est)
    ref = read_annotations(args.ref)
    if args.tolerance is not None or args.skip is not None:
        tol = args.tolerance if args.tolerance is not None else 0.07
        skip = args.skip if args.skip is not None else 0.0
        for kind, e, r in (("beat", est.beats, ref.beats),
                           ("downbeat", est.downbeats, ref.downbeats)):
            res = f_measure(apply_skip(e, skip), apply_skip(r, skip), tol)
            print(f"{kind:9s} tol={tol * 1000:.0f}ms skip={skip:g}s  "
                  f"f1={100 * res.f1:.2f}")
        return EXIT_OK

    class _Event:
        def __init__(self, time, is_downbeat):
            self.time, self.is_downbeat = time, is_downbeat

    downs = set(np.round(est.downbeats, 9))
    events = [_Event(t, round(float(t), 9) in downs) for t in est.beats]
    table = evaluate_clip(events, ref)
    for tol in DEFAULT_TOLERANCES:
        for skip in DEFAULT_SKIPS:
            for kind in ("beat", "downbeat"):
                res = table[(kind, tol, skip)]
                print(f"{kind:9s} tol={tol * 1000:.0f}ms skip={skip:g}s  "
                      f"f1={100 * res.f1:.2f}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    ann = read_annotations(args.ann)
    flags = np.isin(np.round(ann.beats, 9), np.round(ann.downbeats, 9))
    spec = SynthSpec(beat_times=ann.beats, downbeat_flags=flags,
                     sigma=args.sigma, height=args.height, noise=args.noise,
                     fps=args.fps, seed=args.seed)
    fps, frames = synthesize_activations(spec)
    write_activations(args.out, fps, frames)
    return EXIT_OK


def _cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        print(f"pulsetrack bench: error: unknown methods {bad} "
              f"(choose from {', '.join(METHODS)})", file=sys.stderr)
        return EXIT_USAGE
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    act_files = sorted(corpus.glob("*.act"))
    if not act_files:
        raise FileNotFoundError(f"no *.act files in {corpus}")
    clips = []
    fps = None
    for act in act_files:
        ann = act.with_suffix(".ann")
        if not ann.exists():
            continue
        fps, frames = read_activations(act)
        annotation = read_annotations(ann)
        spec = SynthSpec(beat_times=annotation.beats,
                         downbeat_flags=np.isin(np.round(annotation.beats, 9),
                                                np.round(annotation.downbeats, 9)),
                         fps=fps)
        clips.append(benchmark.BenchClip(
            name=act.stem, spec=spec, annotation=annotation, frames=frames,
            has_tempo_change=False, tempo_bpm=0.0))
    if not clips:
        raise FileNotFoundError(f"no paired *.act/*.ann files in {corpus}")
    base = benchmark.bench_config(fps=fps)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        if "meters" in overrides:
            overrides["meters"] = tuple(overrides["meters"])
        base = replace(base, **overrides)
    results = benchmark.compare_methods(clips, methods, seeds, base)
    print(benchmark.format_table(results, methods))
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "track":
            return _cmd_track(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_bench(args)
    except (OSError, ActivationFormatError, AnnotationFormatError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"pulsetrack: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
