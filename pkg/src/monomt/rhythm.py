"""Onsets, constant-tempo estimation, meter detection and beat quantization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientOnsets, NoOnsets, TooShort
from .segmentation import EnergyTrack, NoteEvent

GRID = 1 / 16
DEDUP_SECONDS = 0.050
IOI_BIN_SECONDS = 0.020
DEFAULT_TEMPO_RANGE = (60.0, 180.0)
COMMON_METERS = (3, 4)
ALL_METERS = (2, 3, 4, 5, 7)
MEAN_TIE_TOLERANCE = 0.05
# estimates this close outside the tempo range are clipped to it, not folded
FOLD_SLACK = 0.02
MIDI_TEMPO_US = 60_000_000


@dataclass(frozen=True)
class TimeSignature:
    numerator: int = 4
    denominator: int = 4

    def __post_init__(self):
        if self.numerator not in ALL_METERS:
            raise ValueError(f"numerator must be one of {ALL_METERS}, got {self.numerator}")
        if self.denominator != 4:
            raise ValueError("only quarter-note beats (denominator 4) are supported")

    def __str__(self):
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class QuantizedNote:
    midi: int
    onset_beats: float
    duration_beats: float

    @property
    def end_beats(self) -> float:
        return self.onset_beats + self.duration_beats


@dataclass(frozen=True)
class QuantizedScore:
    tempo_bpm: float
    time_signature: TimeSignature = field(default_factory=TimeSignature)
    notes: tuple[QuantizedNote, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def total_beats(self) -> float:
        return max((n.end_beats for n in self.notes), default=0.0)

    @property
    def bar_count(self) -> int:
        return max(1, math.ceil(self.total_beats / self.time_signature.numerator - 1e-12))

    def to_dict(self) -> dict:
        return {
            "tempo_bpm": self.tempo_bpm,
            "time_signature": [self.time_signature.numerator, self.time_signature.denominator],
            "bar_count": self.bar_count,
            "notes": [{"midi": n.midi, "onset": n.onset_beats, "duration": n.duration_beats}
                      for n in self.notes],
        }


# --------------------------------------------------------------------------
# Onsets
# --------------------------------------------------------------------------


def energy_rise(energy: EnergyTrack) -> tuple[np.ndarray, np.ndarray]:
    """Half-wave rectified first difference of the RMS track.

    Each difference is stamped halfway between the two frames it spans.
    """
    rms = np.asarray(energy.rms, dtype=float)
    times = np.asarray(energy.times, dtype=float)
    if rms.size < 2:
        return np.empty(0), np.empty(0)
    return 0.5 * (times[1:] + times[:-1]), np.maximum(np.diff(rms), 0.0)


def _dedupe(times: Iterable[float], window: float) -> list[float]:
    out: list[float] = []
    for t in sorted(times):
        if not out or t - out[-1] > window:
            out.append(t)
    return out


def detect_onsets(energy: EnergyTrack, notes: Sequence[NoteEvent],
                  peak_ratio: float = 3.0, level_fraction: float = 0.1) -> list[float]:
    """Note onsets plus strong energy-rise peaks, merged within 50 ms.

    An energy peak must be a local maximum of the rectified RMS difference
    and exceed both ``peak_ratio`` x its median and ``level_fraction`` of
    the track's loudest frame.  Where a peak and a note onset coincide the
    note onset is kept.
    """
    note_onsets = sorted(n.onset_s for n in notes)
    peaks: list[float] = []
    times, rise = energy_rise(energy)
    if rise.size >= 3:
        threshold = max(peak_ratio * float(np.median(rise)),
                        level_fraction * float(np.max(energy.rms)))
        for i in range(1, rise.size - 1):
            if rise[i] > 0 and rise[i] >= rise[i - 1] and rise[i] > rise[i + 1] and rise[i] > threshold:
                peaks.append(float(times[i]))

    onsets = list(note_onsets)
    for t in peaks:
        if all(abs(t - o) > DEDUP_SECONDS for o in note_onsets):
            onsets.append(t)
    onsets = _dedupe(onsets, DEDUP_SECONDS)
    if not onsets:
        raise NoOnsets("no note onsets or energy attacks found")
    return onsets


# --------------------------------------------------------------------------
# Tempo
# --------------------------------------------------------------------------


def fold_tempo(bpm: float, tempo_range=DEFAULT_TEMPO_RANGE) -> float:
    """Double or halve ``bpm`` until it lies in ``tempo_range``.

    A value within 2% of either end is measurement error on an in-range
    tempo (59.9 BPM for a 60 BPM recording), so it is clipped to the range
    instead of jumping an octave.
    """
    lo, hi = tempo_range
    if not (0 < lo and lo * 2 <= hi):
        raise ValueError("tempo range must span at least one octave")
    if not bpm > 0:
        raise ValueError("tempo must be positive")
    # fold into the slack-widened range first so the clip also applies to
    # octave multiples (14.99 BPM becomes 60, not 119.9)
    while bpm < lo * (1 - FOLD_SLACK):
        bpm *= 2
    while bpm > hi * (1 + FOLD_SLACK):
        bpm /= 2
    return float(min(max(bpm, lo), hi))


def ioi_histogram_period(iois: np.ndarray, bin_s: float = IOI_BIN_SECONDS) -> float:
    """Mode of the inter-onset-interval histogram with fractional voting.

    Every interval votes with weight 1 at its own length and with weight
    1/k at its k-th fraction (k = 2, 3), so a half note supports the
    quarter-note bin without outvoting genuine quarter notes.  Rather than
    fixed bin edges, each vote is scored by the votes around it under a
    triangular kernel of half-width ``bin_s``: clusters of nearly equal
    intervals add up wherever they fall, and the mode does not jump when
    jitter carries a cluster across an edge.  Ties go to the longer period.
    Returns the weighted mean of the votes within ``bin_s`` of the mode.
    """
    iois = np.asarray(iois, dtype=float)
    ks = np.array([1.0, 2.0, 3.0])
    votes = (iois[:, None] / ks).ravel()
    weights = np.broadcast_to(1.0 / ks, (iois.size, ks.size)).ravel()
    dist = np.abs(votes[:, None] - votes[None, :])
    scores = np.round(np.maximum(0.0, 1.0 - dist / bin_s) @ weights, 9)
    tied = np.flatnonzero(scores == scores.max())
    best = votes[tied[np.argmax(votes[tied])]]
    near = np.abs(votes - best) <= bin_s
    return float(np.average(votes[near], weights=weights[near]))


def refine_period(onsets: np.ndarray, period: float, subdivisions=(2, 4), rounds: int = 4,
                  max_step: float = 0.1) -> float:
    """Least-squares beat period for onsets placed on a beat grid.

    Each onset's beat position is accumulated from the previous one by
    rounding the intervening interval to ``1/subdivision`` of the current
    period; the period is then the slope of the line fitted through
    (beat, time).  Coarse subdivisions go first so that a rough starting
    period cannot misplace long intervals.  An update that would move the
    period by more than ``max_step`` (relative) means some interval fell
    between grid positions, and is rejected.
    """
    onsets = np.asarray(onsets, dtype=float)
    iois = np.diff(onsets)
    for sub in subdivisions:
        for _ in range(rounds):
            # halves round up, with a margin, so exact ties resolve the same way every time
            steps = np.floor(iois / period * sub + 0.5 + 1e-9) / sub
            beats = np.concatenate(([0.0], np.cumsum(steps)))
            if np.ptp(beats) <= 0:
                return period
            slope = float(np.polyfit(beats, onsets, 1)[0])
            if not slope > 0 or abs(slope - period) >= max_step * period - 1e-12:
                break
            if abs(slope - period) < 1e-12:
                break
            period = slope
    return period


def grid_alignment(onsets: np.ndarray, period: float, tolerance: float = 0.125) -> float:
    """Largest fraction of onsets within ``tolerance`` periods of a beat grid.

    Each onset is tried in turn as the grid's phase.
    """
    onsets = np.asarray(onsets, dtype=float)
    best = 0.0
    for anchor in onsets:
        pos = (onsets - anchor) / period
        # the margin keeps onsets exactly on the tolerance edge from flickering
        best = max(best, float(np.mean(np.abs(pos - np.round(pos)) <= tolerance + 1e-9)))
    return best


def choose_beat_level(onsets: np.ndarray, period: float, min_alignment: float = 0.65) -> float:
    """Resolve which metrical level of ``period`` is the beat.

    The histogram mode may land on a subdivision (many eighth notes) or a
    multiple (many half notes) of the beat.  Among 2P, P and P/2 the
    longest period whose grid still accounts for ``min_alignment`` of the
    onsets wins.
    """
    for factor in (2.0, 1.0, 0.5):
        if grid_alignment(onsets, period * factor) >= min_alignment:
            return period * factor
    return period


def estimate_tempo(onsets: Sequence[float], tempo_range=DEFAULT_TEMPO_RANGE) -> float:
    """Constant tempo in BPM from onset times (seconds).

    The result is folded into ``tempo_range`` by octaves; pass None to get
    the unfolded estimate.
    """
    times = np.unique(np.asarray(onsets, dtype=float))
    if times.size < 2:
        raise InsufficientOnsets(f"need at least 2 distinct onsets, got {times.size}")
    period = refine_period(times, ioi_histogram_period(np.diff(times)))
    period = choose_beat_level(times, period)
    bpm = 60.0 / period
    return bpm if tempo_range is None else fold_tempo(bpm, tempo_range)


# --------------------------------------------------------------------------
# Time signature
# --------------------------------------------------------------------------


def beat_accents(energy: EnergyTrack, tempo_bpm: float, origin: float) -> np.ndarray:
    """Total rectified energy rise falling in each beat slot.

    Slot k collects rises stamped in ``[origin + (k - 1/2) P, origin + (k + 1/2) P)``.
    """
    period = 60.0 / tempo_bpm
    times, rise = energy_rise(energy)
    if times.size == 0:
        return np.zeros(0)
    slots = np.floor((times - origin) / period + 0.5).astype(np.int64)
    keep = slots >= 0
    if not keep.any():
        return np.zeros(0)
    return np.bincount(slots[keep], weights=rise[keep])


def meter_scores(accents: np.ndarray, candidates: Iterable[int]) -> dict[int, float]:
    """Normalized lag-n autocorrelation of the accent sequence per candidate n.

    Normalizing by the norms of the two overlapping stretches keeps lags
    comparable: an unaccented melody scores close to 1 at every lag, so a
    weak first or last beat cannot favour the shorter bar.
    """
    scores = {}
    for n in candidates:
        head, tail = accents[:-n], accents[n:]
        norm = float(np.linalg.norm(head) * np.linalg.norm(tail)) if accents.size > n else 0.0
        scores[n] = float(head @ tail) / norm if norm > 0 else 0.0
    return scores


def detect_time_signature(onsets: Sequence[float], energy: EnergyTrack, tempo_bpm: float,
                          candidates: Iterable[int] = COMMON_METERS) -> TimeSignature:
    """Pick the bar length whose lag best repeats the per-beat accent pattern.

    Beat slots run from the first onset to the last one.  Candidates
    scoring within 5% of the best are resolved in favour of 4, then 3.
    """
    candidates = sorted(set(candidates))
    if not candidates:
        raise ValueError("no time-signature candidates given")
    if not onsets:
        raise TooShort("no onsets to anchor the beat grid")
    origin = min(onsets)
    last_slot = int(np.floor((max(onsets) - origin) * tempo_bpm / 60.0 + 0.5))
    accents = beat_accents(energy, tempo_bpm, origin)[:last_slot + 1]
    if accents.size < 2 * max(candidates):
        raise TooShort(f"{accents.size} beats is less than two bars of {max(candidates)}")
    scores = meter_scores(accents, candidates)
    best = max(scores.values())
    close = [n for n, s in scores.items() if s >= best - MEAN_TIE_TOLERANCE * abs(best)]
    for preferred in (4, 3):
        if preferred in close:
            return TimeSignature(preferred)
    return TimeSignature(max(close, key=lambda n: scores[n]))


# --------------------------------------------------------------------------
# Quantization
# --------------------------------------------------------------------------


def snap_to_grid(x: float, grid: float = GRID) -> float:
    return round(x / grid) * grid


def midi_representable_tempo(bpm: float) -> float:
    """The tempo a Standard MIDI File can store exactly (integer us/quarter)."""
    return MIDI_TEMPO_US / round(MIDI_TEMPO_US / bpm)


def quantize(notes: Sequence[NoteEvent], tempo_bpm: float,
             ts: TimeSignature = TimeSignature(), grid: float = GRID) -> QuantizedScore:
    """Round note onsets and durations to ``grid`` beats.

    Durations never fall below one grid step.  When rounding would make a
    note overlap its successor the earlier note is shortened; a note that
    lands on the same grid onset as its predecessor is dropped.
    """
    if not tempo_bpm > 0:
        raise ValueError("tempo must be positive")
    tempo_bpm = midi_representable_tempo(tempo_bpm)
    beats_per_s = tempo_bpm / 60.0
    out: list[QuantizedNote] = []
    for note in sorted(notes, key=lambda n: n.onset_s):
        onset = snap_to_grid(note.onset_s * beats_per_s, grid)
        duration = max(grid, snap_to_grid(note.duration_s * beats_per_s, grid))
        if out:
            prev = out[-1]
            if onset <= prev.onset_beats:
                continue
            if prev.end_beats > onset:
                out[-1] = QuantizedNote(prev.midi, prev.onset_beats, onset - prev.onset_beats)
        out.append(QuantizedNote(note.midi, max(0.0, onset), duration))
    return QuantizedScore(tempo_bpm, ts, tuple(out))
