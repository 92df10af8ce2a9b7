"""MIDI pitch grid, dichotomy search, and framewise pitch tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .audio_io import AudioBuffer
from .errors import (BufferTooShort, InvalidInterval, NonPositiveFrequency, NonPowerOfTwo,
                     OutOfRange)
from .spectral import dominant_frequencies, is_power_of_two

A4_MIDI = 69
A4_HZ = 440.0
MIDI_LEVELS = 128


def midi_to_freq(m: int) -> float:
    if not 0 <= m < MIDI_LEVELS or int(m) != m:
        raise OutOfRange(f"MIDI number must be an integer in 0..127, got {m!r}")
    if m == A4_MIDI:
        return A4_HZ
    return A4_HZ * 2.0 ** ((m - A4_MIDI) / 12.0)


def freq_to_midi_float(freq: float) -> float:
    """Fractional MIDI number of ``freq`` (69.0 at 440 Hz)."""
    if not freq > 0:
        raise NonPositiveFrequency(f"frequency must be positive, got {freq!r}")
    return A4_MIDI + 12.0 * math.log2(freq / A4_HZ)


class PitchTable:
    """The 128 equal-tempered MIDI frequencies, ascending."""

    def __init__(self):
        self.freqs = np.array([midi_to_freq(m) for m in range(MIDI_LEVELS)])
        self.log_freqs = np.log(self.freqs)
        self.freqs.flags.writeable = False
        self.log_freqs.flags.writeable = False

    def __len__(self):
        return MIDI_LEVELS

    def __getitem__(self, m):
        return self.freqs[m]


DEFAULT_TABLE = PitchTable()


# --------------------------------------------------------------------------
# Dichotomy method
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DichotomySpec:
    a: float
    b: float
    eps: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidInterval(f"need a < b, got [{self.a}, {self.b}]")
        if not 0 < self.eps < (self.b - self.a) / 2:
            raise InvalidInterval(f"need 0 < eps < (b - a)/2, got eps={self.eps}")
        if self.max_iter < 1:
            raise InvalidInterval("max_iter must be at least 1")

    def error_bound(self, n: int) -> float:
        """Guaranteed distance of the n-th midpoint from the minimiser,
        counting the centre of ``[a, b]`` as the first (n = 1)."""
        return (self.b - self.a - self.eps) / 2 ** n + self.eps / 2


def dichotomy_midpoints(f: Callable[[float], float], spec: DichotomySpec) -> Iterator[float]:
    """Yield the midpoints x_1, x_2, ... of the dichotomy minimisation.

    At every step f is compared at ``mid - eps/2`` and ``mid + eps/2`` and
    the half that must contain the minimum of a unimodal f is kept.  The
    sequence stops once the interval is no longer than ``2 eps`` or after
    ``max_iter`` comparisons; the last yielded midpoint is the estimate.
    """
    lo, hi = spec.a, spec.b
    half_eps = spec.eps / 2
    for _ in range(spec.max_iter):
        mid = 0.5 * (lo + hi)
        yield mid
        if hi - lo <= 2 * spec.eps:
            return
        if f(mid - half_eps) <= f(mid + half_eps):
            hi = mid + half_eps
        else:
            lo = mid - half_eps
    yield 0.5 * (lo + hi)


def dichotomy_minimize(f: Callable[[float], float], spec: DichotomySpec) -> tuple[float, int]:
    """Minimise unimodal ``f`` on ``[spec.a, spec.b]``.

    Returns the final midpoint and the number of interval halvings done.
    """
    points = list(dichotomy_midpoints(f, spec))
    return points[-1], len(points) - 1


# --------------------------------------------------------------------------
# Snapping a frequency to the MIDI grid
# --------------------------------------------------------------------------


def snap_frequency(freq: float, table: PitchTable = DEFAULT_TABLE) -> tuple[int, int]:
    """Nearest MIDI number to ``freq`` in log-frequency, by bisection.

    The table index interval is halved until it brackets ``freq`` between
    two neighbours (at most 7 halvings for 128 levels), then one last
    comparison picks the closer of the two, ties going to the lower note.
    Returns ``(midi, iterations)`` where iterations counts both.
    """
    if not freq > 0 or not math.isfinite(freq):
        raise NonPositiveFrequency(f"frequency must be positive and finite, got {freq!r}")
    freqs = table.freqs
    if freq <= freqs[0]:
        return 0, 0
    if freq >= freqs[-1]:
        return MIDI_LEVELS - 1, 0

    lo, hi = 0, MIDI_LEVELS - 1
    iterations = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        iterations += 1
        if freqs[mid] <= freq:
            lo = mid
        else:
            hi = mid
    iterations += 1
    log_f = math.log(freq)
    if log_f - table.log_freqs[lo] <= table.log_freqs[hi] - log_f:
        return lo, iterations
    return hi, iterations


def snap_frequency_linear(freq: float, table: PitchTable = DEFAULT_TABLE) -> int:
    """Reference answer for :func:`snap_frequency` by scanning all 128 entries."""
    if not freq > 0:
        raise NonPositiveFrequency(f"frequency must be positive, got {freq!r}")
    dist = np.abs(math.log(freq) - table.log_freqs)
    return int(np.argmin(dist))  # first minimum, i.e. lower note on ties


def snap_by_minimization(freq: float, eps: float = 1e-4) -> int:
    """Snap via continuous dichotomy minimisation of the semitone distance."""
    target = freq_to_midi_float(freq)
    spec = DichotomySpec(-0.5, MIDI_LEVELS - 0.5, eps=eps)
    x, _ = dichotomy_minimize(lambda m: abs(m - target), spec)
    return int(min(MIDI_LEVELS - 1, max(0, math.ceil(x - 0.5))))


# --------------------------------------------------------------------------
# Pitch track
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrackFrame:
    time: float           # frame centre, seconds
    freq_hz: float        # 0.0 when unvoiced
    midi: int | None      # None when unvoiced
    energy: float         # RMS over the frame
    snap_iterations: int = 0

    @property
    def voiced(self) -> bool:
        return self.midi is not None


@dataclass(frozen=True)
class PitchTrack:
    frames: tuple[TrackFrame, ...]
    hop_seconds: float
    frame_seconds: float

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @classmethod
    def from_pairs(cls, pairs, hop_seconds: float = 1.0, frame_seconds: float | None = None):
        """Build a track from ``(midi_or_None, energy)`` pairs.

        Frame i is centred at ``(i + 0.5) * hop_seconds``.
        """
        frames = tuple(TrackFrame((i + 0.5) * hop_seconds, 0.0 if m is None else midi_to_freq(m), m, e)
                       for i, (m, e) in enumerate(pairs))
        return cls(frames, hop_seconds, hop_seconds if frame_seconds is None else frame_seconds)


def frame_view(samples: np.ndarray, frame_size: int, hop: int) -> np.ndarray:
    """Rows of length ``frame_size`` taken every ``hop`` samples; partial tails dropped."""
    if not is_power_of_two(frame_size) or frame_size < 16:
        raise NonPowerOfTwo(f"frame size must be a power of two >= 16, got {frame_size}")
    if not 0 < hop <= frame_size:
        raise ValueError(f"hop must be in 1..frame_size, got {hop}")
    if samples.size < frame_size:
        raise BufferTooShort(f"{samples.size} samples is fewer than one {frame_size}-sample frame")
    count = (samples.size - frame_size) // hop + 1
    return np.lib.stride_tricks.sliding_window_view(samples, frame_size)[::hop][:count]


def frame_times(count: int, frame_size: int, hop: int, sample_rate: int) -> np.ndarray:
    return (np.arange(count) * hop + frame_size / 2) / sample_rate


def build_pitch_track(buf: AudioBuffer, frame_size: int = 4096, hop: int = 1024,
                      table: PitchTable = DEFAULT_TABLE) -> PitchTrack:
    frames = frame_view(buf.samples, frame_size, hop)
    freqs, _, _ = dominant_frequencies(frames, buf.sample_rate, windowed=True)
    energies = np.sqrt(np.mean(frames ** 2, axis=1))
    times = frame_times(len(frames), frame_size, hop, buf.sample_rate)
    out = []
    for t, f, e in zip(times, freqs, energies):
        if f > 0:
            m, it = snap_frequency(float(f), table)
            out.append(TrackFrame(float(t), float(f), m, float(e), it))
        else:
            out.append(TrackFrame(float(t), 0.0, None, float(e), 0))
    return PitchTrack(tuple(out), hop / buf.sample_rate, frame_size / buf.sample_rate)
