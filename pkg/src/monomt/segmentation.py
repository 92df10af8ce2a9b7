"""Turning a framewise pitch/energy track into note events.

A new note begins when the snapped pitch changes, when sound resumes after
a rest, or when the pitch holds but the frame energy jumps by at least the
re-attack ratio over the previous frame.  Equal or falling loudness at the
same pitch continues the current note.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .audio_io import AudioBuffer
from .errors import EmptyTrack
from .pitch import PitchTrack, frame_times, frame_view


@dataclass(frozen=True)
class NoteEvent:
    midi: int
    onset_s: float
    duration_s: float
    peak_energy: float

    @property
    def end_s(self) -> float:
        return self.onset_s + self.duration_s


@dataclass(frozen=True)
class SegmentationConfig:
    energy_rise_ratio: float = 1.5
    min_note_frames: int = 2
    rest_floor: float = 0.01

    def __post_init__(self):
        if not self.energy_rise_ratio > 1:
            raise ValueError("energy_rise_ratio must exceed 1")
        if self.min_note_frames < 1:
            raise ValueError("min_note_frames must be at least 1")
        if self.rest_floor < 0:
            raise ValueError("rest_floor must be non-negative")


@dataclass(frozen=True)
class EnergyTrack:
    times: np.ndarray
    rms: np.ndarray

    def __len__(self):
        return self.times.size

    def __iter__(self):
        return zip(self.times.tolist(), self.rms.tolist())


def energy_track(buf: AudioBuffer, frame_size: int = 4096, hop: int = 1024) -> EnergyTrack:
    """Per-frame RMS on the same frame grid as :func:`build_pitch_track`."""
    frames = frame_view(buf.samples, frame_size, hop)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    return EnergyTrack(frame_times(len(frames), frame_size, hop, buf.sample_rate), rms)


def smooth_octave_jumps(labels: list) -> list:
    """Replace a lone frame exactly an octave away from two equal neighbours."""
    out = list(labels)
    for i in range(1, len(out) - 1):
        a, x, b = labels[i - 1], labels[i], labels[i + 1]
        if a is not None and a == b and x is not None and abs(x - a) == 12:
            out[i] = a
    return out


@dataclass
class _Run:
    midi: int
    start: int
    stop: int           # exclusive
    reattack: bool      # began on an energy rise at unchanged pitch

    @property
    def length(self) -> int:
        return self.stop - self.start


def _split_runs(labels, energies, rho) -> list[_Run]:
    runs: list[_Run] = []
    current = None
    for i, m in enumerate(labels):
        if m is None:
            current = None
            continue
        if current is not None and m == current.midi:
            if energies[i] >= rho * energies[i - 1] and energies[i] > 0:
                current = _Run(m, i, i + 1, True)
                runs.append(current)
            else:
                current.stop = i + 1
            continue
        current = _Run(m, i, i + 1, False)
        runs.append(current)
    return runs


def _debounce(runs: list[_Run], labels, min_frames: int) -> list[_Run]:
    # a re-attack too short to be a note is part of the note it interrupts,
    # whether or not that note survives the length filter
    joined: list[_Run] = []
    for run in runs:
        if run.reattack and run.length < min_frames and joined and joined[-1].stop == run.start:
            joined[-1].stop = run.stop
        else:
            joined.append(_Run(run.midi, run.start, run.stop, run.reattack))

    kept: list[_Run] = []
    for run in joined:
        prev = kept[-1] if kept else None
        if run.length < min_frames:
            if prev is not None and prev.midi == run.midi and prev.stop == run.start:
                prev.stop = run.stop
            continue
        # a dropped flicker between two runs of one pitch must not split the note
        if (prev is not None and prev.midi == run.midi and not run.reattack
                and all(labels[j] is not None for j in range(prev.stop, run.start))):
            prev.stop = run.stop
            continue
        kept.append(_Run(run.midi, run.start, run.stop, run.reattack))
    return kept


def _coverage_offset(energy: float, full: float, frame_s: float) -> float | None:
    """Offset from a frame centre to the edge of a note covering part of it.

    For a steady tone entering (or leaving) a rectangular frame the frame's
    mean power scales with the covered fraction p, so the edge sits
    ``frame_s * (p - 1/2)`` from the centre.  Returns None below p = 1/2.
    """
    if full <= 0:
        return None
    p = min(1.0, (energy / full) ** 2)
    if p < 0.5:
        return None
    return frame_s * (p - 0.5)


def segment_notes(track: PitchTrack, cfg: SegmentationConfig = SegmentationConfig()) -> list[NoteEvent]:
    if len(track) == 0:
        raise EmptyTrack("cannot segment an empty pitch track")
    frames = track.frames
    n = len(frames)
    energies = [f.energy for f in frames]
    labels = [f.midi if f.voiced and f.energy >= cfg.rest_floor else None for f in frames]
    labels = smooth_octave_jumps(labels)

    runs = _debounce(_split_runs(labels, energies, cfg.energy_rise_ratio), labels,
                     cfg.min_note_frames)

    hop = track.hop_seconds
    half_frame = track.frame_seconds / 2
    span = max(1, int(round(track.frame_seconds / hop)))
    min_len = cfg.min_note_frames * hop
    notes: list[NoteEvent] = []
    for run in runs:
        first, last = run.start, run.stop - 1
        peak = max(energies[first:run.stop])

        if first == 0:
            onset = frames[0].time - half_frame
        elif labels[first - 1] is None:
            onset = frames[first].time - hop / 2
            full = max(energies[first:min(run.stop, first + span + 1)])
            for j in range(first, min(run.stop, first + span + 1)):
                off = _coverage_offset(energies[j], full, track.frame_seconds)
                if off is not None:
                    onset = frames[j].time - off
                    break
        else:
            onset = frames[first].time - hop / 2

        if last == n - 1:
            end = frames[last].time + half_frame
        elif labels[last + 1] is None:
            end = frames[last].time + hop / 2
            full = max(energies[max(first, last - span):run.stop])
            for j in range(last, max(first, last - span) - 1, -1):
                off = _coverage_offset(energies[j], full, track.frame_seconds)
                if off is not None:
                    end = frames[j].time + off
                    break
        else:
            end = frames[last].time + hop / 2

        onset = max(0.0, min(onset, end - min_len))
        if notes and onset < notes[-1].end_s:
            prev = notes[-1]
            prev_end = max(onset, prev.onset_s + min_len)
            notes[-1] = replace(prev, duration_s=prev_end - prev.onset_s)
            onset = max(onset, prev_end)
        notes.append(NoteEvent(run.midi, onset, end - onset, peak))
    return notes
