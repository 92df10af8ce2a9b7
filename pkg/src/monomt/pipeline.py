"""End-to-end transcription: audio buffer in, quantized score out."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import NamedTuple

from . import preprocess, rhythm
from .audio_io import AudioBuffer
from .errors import InsufficientOnsets, PipelineError, TooShort
from .pitch import PitchTrack, build_pitch_track
from .preprocess import PreprocessConfig
from .rhythm import QuantizedScore, TimeSignature
from .spectral import is_power_of_two
from .segmentation import EnergyTrack, NoteEvent, SegmentationConfig, energy_track, segment_notes

log = logging.getLogger(__name__)

CONFIG_ENV = "MONOMT_CONFIG"
FALLBACK_TEMPO = 120.0


@dataclass(frozen=True)
class PipelineConfig:
    frame_size: int = 4096
    hop: int = 1024
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    noise_gate: bool = True
    tempo_range: tuple[float, float] = rhythm.DEFAULT_TEMPO_RANGE
    meters: tuple[int, ...] = rhythm.COMMON_METERS
    grid: float = rhythm.GRID
    ppq: int = 480
    program: int = 0

    def __post_init__(self):
        if not is_power_of_two(self.frame_size) or self.frame_size < 16:
            raise ValueError(f"frame_size must be a power of two >= 16, got {self.frame_size}")
        if self.hop <= 0 or self.hop > self.frame_size:
            raise ValueError("hop must lie in 1..frame_size")
        if (self.ppq * self.grid) != round(self.ppq * self.grid):
            raise ValueError(f"ppq {self.ppq} does not divide the {self.grid}-beat grid")
        if not 0 <= self.program <= 127:
            raise ValueError("program must be in 0..127")
        object.__setattr__(self, "tempo_range", tuple(self.tempo_range))
        object.__setattr__(self, "meters", tuple(self.meters))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "preprocess" in data:
            data["preprocess"] = PreprocessConfig(**data["preprocess"])
        if "segmentation" in data:
            data["segmentation"] = SegmentationConfig(**data["segmentation"])
        return cls(**data)

    @classmethod
    def from_env(cls) -> "PipelineConfig":
        """Defaults, overlaid with the JSON file named by ``$MONOMT_CONFIG`` if set."""
        path = os.environ.get(CONFIG_ENV)
        if not path:
            return cls()
        return cls.from_dict(json.loads(Path(path).read_text()))

    def updated(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)


@dataclass
class Diagnostics:
    trimmed: AudioBuffer | None = None
    conditioned: AudioBuffer | None = None
    energy: EnergyTrack | None = None
    notes: list[NoteEvent] = field(default_factory=list)
    onsets: list[float] = field(default_factory=list)
    raw_tempo: float | None = None
    warnings: list[str] = field(default_factory=list)


class Transcription(NamedTuple):
    score: QuantizedScore
    track: PitchTrack
    diagnostics: Diagnostics


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError) and isinstance(exc, Exception):
            raise PipelineError(self.name, exc) from exc
        return False


def analyse(buf: AudioBuffer, cfg: PipelineConfig | None = None,
            diag: Diagnostics | None = None) -> tuple[PitchTrack, EnergyTrack]:
    """Condition the recording and compute its framewise pitch and energy."""
    cfg = cfg or PipelineConfig()
    diag = diag if diag is not None else Diagnostics()
    with _Stage("trim"):
        audio = preprocess.trim_silence(buf, cfg.preprocess)
        diag.trimmed = audio
    if cfg.noise_gate:
        with _Stage("gate"):
            audio = preprocess.noise_gate(audio, cfg.preprocess)
    with _Stage("normalize"):
        audio = preprocess.normalize(audio)
        diag.conditioned = audio
    with _Stage("pitch"):
        track = build_pitch_track(audio, cfg.frame_size, cfg.hop)
        diag.energy = energy = energy_track(audio, cfg.frame_size, cfg.hop)
    return track, energy


def transcribe(buf: AudioBuffer, cfg: PipelineConfig | None = None) -> Transcription:
    """Run every stage in order and keep the intermediate results.

    Failures are re-raised as :class:`PipelineError` naming the stage.  Too
    few onsets for tempo estimation, or too little material for meter
    detection, fall back to 120 BPM and 4/4 with a warning in the
    diagnostics rather than failing.
    """
    cfg = cfg or PipelineConfig()
    diag = Diagnostics()
    track, energy = analyse(buf, cfg, diag)
    with _Stage("segment"):
        notes = segment_notes(track, cfg.segmentation)
        diag.notes = notes
    with _Stage("onsets"):
        onsets = rhythm.detect_onsets(energy, notes)
        diag.onsets = onsets
    with _Stage("tempo"):
        try:
            tempo = rhythm.estimate_tempo(onsets, cfg.tempo_range)
            diag.raw_tempo = tempo
        except InsufficientOnsets as exc:
            tempo = FALLBACK_TEMPO
            diag.warnings.append(f"tempo: {exc}; assuming {FALLBACK_TEMPO:g} BPM")
            log.warning(diag.warnings[-1])
    with _Stage("meter"):
        try:
            ts = rhythm.detect_time_signature(onsets, energy, tempo, cfg.meters)
        except TooShort as exc:
            ts = TimeSignature(4)
            diag.warnings.append(f"meter: {exc}; assuming 4/4")
            log.warning(diag.warnings[-1])
    with _Stage("quantize"):
        score = rhythm.quantize(notes, tempo, ts, cfg.grid)
    return Transcription(score, track, diag)
