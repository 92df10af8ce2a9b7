"""PCM WAV reading/writing and melody synthesis.

Only 16-bit integer PCM is supported, mono or stereo.  Stereo input is
downmixed to mono by averaging the two channels.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyAudio, InvalidScore, IoFailure, MalformedRiff, UnsupportedEncoding

PCM_SCALE = 32768.0
WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
RAMP_SECONDS = 0.010
# peak level of a gain-1.0 note; leaves headroom for accents up to x2
NOTE_LEVEL = 0.45


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono samples in [-1, 1] plus their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer samples must be one-dimensional")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


# --------------------------------------------------------------------------
# WAV codec
# --------------------------------------------------------------------------


def _iter_chunks(data: bytes, offset: int):
    while offset + 8 <= len(data):
        chunk_id = data[offset:offset + 4]
        (size,) = struct.unpack_from("<I", data, offset + 4)
        body_start = offset + 8
        body_end = body_start + size
        if body_end > len(data):
            raise MalformedRiff(
                f"chunk {chunk_id!r} claims {size} bytes but only {len(data) - body_start} remain")
        yield chunk_id, data[body_start:body_end]
        offset = body_end + (size & 1)  # chunks are word aligned


def decode_wav(data: bytes) -> AudioBuffer:
    """Decode the bytes of a RIFF/WAVE file holding 16-bit PCM."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedRiff("missing RIFF/WAVE magic")
    (riff_size,) = struct.unpack_from("<I", data, 4)
    if riff_size + 8 > len(data) or riff_size < 4:
        raise MalformedRiff(f"RIFF size {riff_size} inconsistent with file length {len(data)}")

    fmt = None
    pcm = None
    for chunk_id, body in _iter_chunks(data[:riff_size + 8], 12):
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedRiff("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 40:
                    raise MalformedRiff("extensible fmt chunk too short")
                (sub_format,) = struct.unpack_from("<H", body, 24)
                fmt = (sub_format,) + fmt[1:]
        elif chunk_id == b"data":
            pcm = body
    if fmt is None or pcm is None:
        raise MalformedRiff("missing fmt or data chunk")

    audio_format, channels, sample_rate, byte_rate, block_align, bits = fmt
    if audio_format != WAVE_FORMAT_PCM:
        raise UnsupportedEncoding(f"audio format {audio_format:#06x} is not integer PCM")
    if bits != 16:
        raise UnsupportedEncoding(f"{bits}-bit samples are not supported, only 16-bit")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels are not supported")
    if sample_rate == 0:
        raise MalformedRiff("sample rate is zero")
    if block_align != channels * 2:
        raise MalformedRiff(f"block align {block_align} does not match {channels} x 16-bit")

    frames = len(pcm) // block_align
    if frames == 0:
        raise EmptyAudio("data chunk holds no samples")
    ints = np.frombuffer(pcm[:frames * block_align], dtype="<i2").astype(np.float64)
    ints = ints.reshape(frames, channels).mean(axis=1)
    return AudioBuffer(ints / PCM_SCALE, sample_rate)


def encode_wav(buf: AudioBuffer) -> bytes:
    """Encode a buffer as a mono 16-bit little-endian PCM WAV file."""
    if len(buf) == 0:
        raise EmptyAudio("cannot write an empty buffer")
    ints = np.clip(np.round(buf.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    pcm = ints.tobytes()
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, 1, buf.sample_rate, buf.sample_rate * 2, 2, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(pcm)) + pcm
    if len(pcm) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def read_wav(path) -> AudioBuffer:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_wav(data)


def write_wav(buf: AudioBuffer, path) -> None:
    data = encode_wav(buf)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# Score specification and synthesis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreNote:
    midi: int
    onset: float
    duration: float
    gain: float = 1.0


@dataclass(frozen=True)
class ScoreSpec:
    """A reference melody in beats.

    ``length_beats`` optionally extends the piece past its last note so that
    trailing (or all-rest) material can be expressed.
    """

    tempo_bpm: float
    time_signature: tuple[int, int] = (4, 4)
    notes: tuple[ScoreNote, ...] = ()
    length_beats: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))
        object.__setattr__(self, "time_signature", tuple(self.time_signature))
        self.validate()

    def validate(self) -> None:
        if not (isinstance(self.tempo_bpm, (int, float)) and self.tempo_bpm > 0
                and math.isfinite(self.tempo_bpm)):
            raise InvalidScore(f"tempo must be a positive number, got {self.tempo_bpm!r}")
        if len(self.time_signature) != 2:
            raise InvalidScore("time signature must be [numerator, denominator]")
        num, den = self.time_signature
        if not (isinstance(num, int) and num > 0):
            raise InvalidScore(f"bad time-signature numerator {num!r}")
        if not (isinstance(den, int) and den > 0 and den & (den - 1) == 0):
            raise InvalidScore(f"time-signature denominator must be a power of two, got {den!r}")
        prev_end = 0.0
        for i, note in enumerate(self.notes):
            if not (isinstance(note.midi, int) and 0 <= note.midi <= 127):
                raise InvalidScore(f"note {i}: MIDI pitch {note.midi!r} outside 0..127")
            if note.onset < 0 or not note.duration > 0:
                raise InvalidScore(f"note {i}: onset must be >= 0 and duration > 0")
            if note.gain < 0:
                raise InvalidScore(f"note {i}: negative gain")
            # small slack for JSON round-off of float beats
            if note.onset < prev_end - 1e-9:
                raise InvalidScore(f"note {i} overlaps the previous note (not monophonic)")
            prev_end = note.onset + note.duration
        if self.length_beats is not None and self.length_beats < 0:
            raise InvalidScore("length_beats must be non-negative")

    @property
    def total_beats(self) -> float:
        end = max((n.onset + n.duration for n in self.notes), default=0.0)
        if self.length_beats is not None:
            end = max(end, self.length_beats)
        return end

    @property
    def seconds_per_beat(self) -> float:
        return 60.0 / self.tempo_bpm

    def to_dict(self) -> dict:
        out = {
            "tempo_bpm": self.tempo_bpm,
            "time_signature": list(self.time_signature),
            "notes": [],
        }
        for n in self.notes:
            d = {"midi": n.midi, "onset": n.onset, "duration": n.duration}
            if n.gain != 1.0:
                d["gain"] = n.gain
            out["notes"].append(d)
        if self.length_beats is not None:
            out["length_beats"] = self.length_beats
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScoreSpec":
        try:
            notes = tuple(
                ScoreNote(int(n["midi"]), float(n["onset"]), float(n["duration"]),
                          float(n.get("gain", 1.0)))
                for n in data["notes"])
            ts = data.get("time_signature", [4, 4])
            length = data.get("length_beats")
            return cls(float(data["tempo_bpm"]), (int(ts[0]), int(ts[1])), notes,
                       None if length is None else float(length))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidScore(f"malformed score: {exc}") from exc


def load_score(path) -> ScoreSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidScore(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidScore("score JSON must be an object")
    return ScoreSpec.from_dict(data)


def save_score(score: ScoreSpec, path) -> None:
    try:
        Path(path).write_text(json.dumps(score.to_dict(), indent=2) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class Timbre:
    """``pure_sine`` when ``harmonics`` is 0, otherwise the fundamental plus
    ``harmonics`` overtones whose amplitudes fall off as ``decay ** h``."""

    harmonics: int = 0
    decay: float = 0.5

    @classmethod
    def pure_sine(cls) -> "Timbre":
        return cls(0)

    @classmethod
    def harmonic(cls, k: int = 4, decay: float = 0.5) -> "Timbre":
        if k < 1 or not 0 < decay < 1:
            raise ValueError("harmonic timbre needs k >= 1 and 0 < decay < 1")
        return cls(k, decay)

    @property
    def name(self) -> str:
        return "pure_sine" if self.harmonics == 0 else "harmonic"


def midi_frequency(m: float) -> float:
    return 440.0 * 2.0 ** ((m - 69) / 12.0)


def _render_note(n_samples: int, freq: float, sample_rate: int, timbre: Timbre) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate
    weights = [timbre.decay ** h for h in range(timbre.harmonics + 1)]
    wave = np.zeros(n_samples)
    nyquist = sample_rate / 2
    for h, w in enumerate(weights):
        if freq * (h + 1) < nyquist:
            wave += w * np.sin(2 * np.pi * freq * (h + 1) * t)
    wave /= sum(weights)

    ramp = min(int(round(RAMP_SECONDS * sample_rate)), n_samples // 2)
    if ramp > 0:
        env = np.linspace(0.0, 1.0, ramp, endpoint=False)
        wave[:ramp] *= env
        wave[n_samples - ramp:] *= env[::-1]
    return wave


def synth_melody(score: ScoreSpec, sample_rate: int = 44100,
                 timbre: Timbre | None = None) -> AudioBuffer:
    """Render ``score`` to audio.

    The attack and release ramps sit inside each note's span, so the buffer
    is exactly ``total_beats * 60 / tempo`` seconds long.
    """
    if timbre is None:
        timbre = Timbre.pure_sine()
    score.validate()
    if sample_rate <= 0:
        raise InvalidScore(f"sample rate must be positive, got {sample_rate}")
    spb = score.seconds_per_beat
    total = int(round(score.total_beats * spb * sample_rate))
    out = np.zeros(total)
    for note in score.notes:
        start = int(round(note.onset * spb * sample_rate))
        end = min(int(round((note.onset + note.duration) * spb * sample_rate)), total)
        if end <= start:
            continue
        freq = midi_frequency(note.midi)
        out[start:end] += NOTE_LEVEL * note.gain * _render_note(end - start, freq, sample_rate, timbre)
    if np.max(np.abs(out), initial=0.0) > 1.0:
        raise InvalidScore("note gains drive the rendering past full scale")
    return AudioBuffer(out, sample_rate)


def add_noise(buf: AudioBuffer, snr_db: float, rng: np.random.Generator) -> AudioBuffer:
    """Add white Gaussian noise ``snr_db`` below the RMS of the non-silent samples."""
    voiced = buf.samples[np.abs(buf.samples) > 0]
    if voiced.size == 0:
        return buf
    signal_rms = math.sqrt(float(np.mean(voiced ** 2)))
    sigma = signal_rms / 10 ** (snr_db / 20)
    noisy = buf.samples + rng.normal(0.0, sigma, size=len(buf))
    return buf.with_samples(np.clip(noisy, -1.0, 1.0))


def score_from_notes(tempo_bpm: float, notes: Sequence[tuple], time_signature=(4, 4),
                     length_beats: float | None = None) -> ScoreSpec:
    """Convenience constructor from ``(midi, onset, duration[, gain])`` tuples."""
    return ScoreSpec(tempo_bpm, tuple(time_signature), tuple(ScoreNote(*n) for n in notes),
                     length_beats)
