"""Command-line entry point: ``monomt {transcribe,synth,eval,inspect}``.

Exit status is 0 on success, 1 when a file or recording cannot be
processed, and 2 for usage errors (bad flags, missing input files).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import rhythm
from .audio_io import Timbre, add_noise, load_score, read_wav, synth_melody, write_wav
from .errors import TranscriptionError
from .evaluation import DEFAULT_ONSET_TOL_BEATS, match_notes
from .midi import read_midi, write_midi
from .pipeline import PipelineConfig, analyse, transcribe

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

log = logging.getLogger("monomt")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("analysis settings (override $MONOMT_CONFIG)")
    g.add_argument("--frame-size", type=int, help="FFT frame length, a power of two (default 4096)")
    g.add_argument("--hop", type=int, help="frame hop in samples (default 1024)")
    g.add_argument("--silence-threshold", type=float,
                   help="trim windows quieter than this fraction of the peak RMS (default 0.02)")
    g.add_argument("--gate-threshold", type=float, help="noise-gate RMS floor (default 0.01)")
    g.add_argument("--no-gate", action="store_true", help="skip the noise gate")
    g.add_argument("--rho", type=float, help="same-pitch re-attack energy ratio (default 1.5)")
    g.add_argument("--min-note-frames", type=int, help="shortest note in frames (default 2)")
    g.add_argument("--rest-floor", type=float, help="RMS below which a frame is a rest (default 0.01)")
    g.add_argument("--tempo-min", type=float, help="lower end of the tempo folding range (default 60)")
    g.add_argument("--tempo-max", type=float, help="upper end of the tempo folding range (default 180)")
    g.add_argument("--odd-meters", action="store_true",
                   help="also consider 2/4, 5/4 and 7/4 (default: 3/4 and 4/4 only)")
    g.add_argument("--grid", type=float, help="quantization grid in beats (default 1/16)")
    g.add_argument("--program", type=int, help="General MIDI program number (default 0, piano)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monomt", description="Monophonic music transcription.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("transcribe", help="WAV recording(s) to MIDI")
    p.add_argument("inputs", nargs="+", type=Path, metavar="IN.wav")
    p.add_argument("--out", type=Path,
                   help="output .mid (one input) or directory (several inputs); default next to input")
    p.add_argument("--score", type=Path,
                   help="also write the quantized score as JSON (file, or directory for several inputs)")
    p.add_argument("--json", action="store_true", help="print the summary as JSON")
    p.add_argument("--jobs", type=int, default=1, help="transcribe this many files in parallel")
    _add_config_flags(p)

    p = sub.add_parser("synth", help="render a score JSON to WAV")
    p.add_argument("score", type=Path, metavar="SCORE.json")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sr", type=int, default=44100, help="sample rate in Hz (default 44100)")
    p.add_argument("--timbre", choices=("pure_sine", "harmonic"), default="pure_sine")
    p.add_argument("--harmonics", type=int, default=4, help="overtones for the harmonic timbre")
    p.add_argument("--decay", type=float, default=0.5, help="per-overtone amplitude ratio")
    p.add_argument("--snr-db", type=float, help="add white noise at this signal-to-noise ratio")
    p.add_argument("--seed", type=int, default=0, help="noise seed")

    p = sub.add_parser("eval", help="score a MIDI transcription against a reference score")
    p.add_argument("reference", type=Path, metavar="REF.json")
    p.add_argument("hypothesis", type=Path, metavar="HYP.mid")
    p.add_argument("--onset-tol", type=float, default=DEFAULT_ONSET_TOL_BEATS,
                   help="onset tolerance in beats (default 0.25)")
    p.add_argument("--octave-invariant", action="store_true", help="match pitches modulo 12")
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("inspect", help="dump the framewise pitch/energy track as CSV")
    p.add_argument("input", type=Path, metavar="IN.wav")
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")
    _add_config_flags(p)
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    """Defaults, then ``$MONOMT_CONFIG``, then command-line flags."""
    try:
        cfg = PipelineConfig.from_env()
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad $MONOMT_CONFIG: {exc}") from exc
    try:
        pre = {k: v for k, v in (("silence_threshold", args.silence_threshold),
                                 ("gate_threshold", args.gate_threshold)) if v is not None}
        seg = {k: v for k, v in (("energy_rise_ratio", args.rho),
                                 ("min_note_frames", args.min_note_frames),
                                 ("rest_floor", args.rest_floor)) if v is not None}
        changes = {}
        if pre:
            changes["preprocess"] = replace(cfg.preprocess, **pre)
        if seg:
            changes["segmentation"] = replace(cfg.segmentation, **seg)
        for name in ("frame_size", "hop", "grid", "program"):
            value = getattr(args, name)
            if value is not None:
                changes[name] = value
        if args.no_gate:
            changes["noise_gate"] = False
        if args.tempo_min is not None or args.tempo_max is not None:
            lo, hi = cfg.tempo_range
            changes["tempo_range"] = (lo if args.tempo_min is None else args.tempo_min,
                                      hi if args.tempo_max is None else args.tempo_max)
            rhythm.fold_tempo(120.0, changes["tempo_range"])  # validates the range
        if args.odd_meters:
            changes["meters"] = rhythm.ALL_METERS
        return cfg.updated(**changes)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _require_files(*paths: Path) -> None:
    for path in paths:
        if not path.is_file():
            raise UsageError(f"no such file: {path}")


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def _transcribe_one(src: Path, out: Path, score_out: Path | None, cfg: PipelineConfig) -> dict:
    """Transcribe a single file; returns a summary or an ``error`` entry."""
    try:
        result = transcribe(read_wav(src), cfg)
        write_midi(result.score, out, cfg.ppq, cfg.program)
        if score_out is not None:
            score_out.write_text(json.dumps(result.score.to_dict(), indent=2) + "\n")
    except (TranscriptionError, OSError) as exc:
        return {"input": str(src), "error": f"{type(exc).__name__}: {exc}"}
    s = result.score
    return {"input": str(src), "output": str(out), "tempo_bpm": round(s.tempo_bpm, 3),
            "time_signature": str(s.time_signature), "bar_count": s.bar_count,
            "note_count": len(s.notes), "warnings": result.diagnostics.warnings}


def _output_paths(inputs: list[Path], out: Path | None, suffix: str) -> list[Path]:
    if len(inputs) == 1 and out is not None and not out.is_dir():
        return [out]
    if out is None:
        return [p.with_suffix(suffix) for p in inputs]
    out.mkdir(parents=True, exist_ok=True)
    return [out / (p.stem + suffix) for p in inputs]


def cmd_transcribe(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    _require_files(*args.inputs)
    if len(args.inputs) > 1 and args.out is not None and args.out.suffix:
        raise UsageError("--out must be a directory when several inputs are given")
    outs = _output_paths(args.inputs, args.out, ".mid")
    scores = (_output_paths(args.inputs, args.score, ".json") if args.score is not None
              else [None] * len(args.inputs))

    jobs = list(zip(args.inputs, outs, scores, [cfg] * len(outs)))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_transcribe_one, *zip(*jobs)))
    else:
        results = [_transcribe_one(*job) for job in jobs]

    for r in results:
        if "error" in r:
            print(f"{r['input']}: {r['error']}", file=sys.stderr)
    if args.json:
        print(json.dumps(results[0] if len(results) == 1 else results, indent=2))
    else:
        for r in results:
            if "error" not in r:
                print(f"{r['input']} -> {r['output']}: {r['tempo_bpm']:g} BPM, {r['time_signature']}, "
                      f"{r['bar_count']} bars, {r['note_count']} notes")
    return EXIT_FAILURE if any("error" in r for r in results) else EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    if args.sr <= 0:
        raise UsageError("--sr must be positive")
    try:
        timbre = Timbre.pure_sine() if args.timbre == "pure_sine" else Timbre.harmonic(
            args.harmonics, args.decay)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _require_files(args.score)
    score = load_score(args.score)
    buf = synth_melody(score, args.sr, timbre)
    if args.snr_db is not None:
        buf = add_noise(buf, args.snr_db, np.random.default_rng(args.seed))
    write_wav(buf, args.out)
    log.info("wrote %s (%.3f s)", args.out, buf.duration_seconds)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if not args.onset_tol > 0:
        raise UsageError("--onset-tol must be positive")
    _require_files(args.reference, args.hypothesis)
    ref = load_score(args.reference)
    hyp = read_midi(args.hypothesis)
    report = match_notes(ref, hyp, args.onset_tol, args.octave_invariant)
    print(json.dumps(report.to_dict(), indent=2) if args.json else report.table())
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    _require_files(args.input)
    track, _ = analyse(read_wav(args.input), cfg)
    stream = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(stream)
        writer.writerow(["time_s", "freq_hz", "midi", "energy"])
        for f in track:
            writer.writerow([f"{f.time:.6f}", f"{f.freq_hz:.4f}", "" if f.midi is None else f.midi,
                             f"{f.energy:.6f}"])
    finally:
        if stream is not sys.stdout:
            stream.close()
    return EXIT_OK


COMMANDS = {"transcribe": cmd_transcribe, "synth": cmd_synth, "eval": cmd_eval, "inspect": cmd_inspect}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"monomt {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TranscriptionError, OSError) as exc:
        print(f"monomt {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
