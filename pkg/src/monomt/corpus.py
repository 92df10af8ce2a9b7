"""Random reference melodies for round-trip accuracy checks."""

from __future__ import annotations

import numpy as np

from .audio_io import AudioBuffer, ScoreNote, ScoreSpec, Timbre, add_noise, synth_melody

# rhythm cells that keep every cell boundary on a beat, with relative weights;
# single quarter notes dominate as in most simple tunes
RHYTHM_CELLS = (((1.0,), 0.5), ((2.0,), 0.15), ((0.5, 0.5), 0.1), ((1.5, 0.5), 0.1),
                ((3.0,), 0.05), ((4.0,), 0.05))
REST_PROBABILITY = 0.08


def _next_pitch(rng: np.random.Generator, prev: int | None, low: int, high: int) -> int:
    while True:
        if prev is None:
            p = int(rng.integers(low, high + 1))
        else:
            p = int(np.clip(prev + rng.integers(-7, 8), low, high))
        if p != prev:
            return p


def _pick_cell(rng: np.random.Generator, room: float) -> tuple[float, ...]:
    fitting = [(c, w) for c, w in RHYTHM_CELLS if sum(c) <= room]
    cells, weights = zip(*fitting)
    weights = np.asarray(weights) / sum(weights)
    return cells[int(rng.choice(len(cells), p=weights))]


def random_melody(rng: np.random.Generator, n_notes: tuple[int, int] = (8, 16),
                  pitch_range: tuple[int, int] = (48, 84), tempo_range: tuple[int, int] = (70, 160),
                  meters: tuple[int, ...] = (3, 4)) -> ScoreSpec:
    """A bar-structured melody starting on beat 0.

    Bars are filled with rhythm cells that never straddle a bar line.  A
    rest occasionally replaces a note.  Adjacent notes never share a
    pitch: two abutting equal notes from a constant-amplitude synthesizer
    have no audible re-attack and could not be told apart from one note.
    """
    count = int(rng.integers(n_notes[0], n_notes[1] + 1))
    tempo = float(rng.integers(tempo_range[0], tempo_range[1] + 1))
    meter = int(rng.choice(meters))

    notes = []
    prev = None
    bar = 0
    while len(notes) < count:
        t = 0.0
        while t < meter and len(notes) < count:
            for dur in _pick_cell(rng, meter - t):
                if len(notes) >= count:
                    break
                onset = bar * meter + t
                t += dur
                if notes and rng.random() < REST_PROBABILITY:
                    prev = None
                    continue
                pitch = _next_pitch(rng, prev, *pitch_range)
                notes.append(ScoreNote(pitch, onset, dur))
                prev = pitch
        bar += 1
    return ScoreSpec(tempo, (meter, 4), tuple(notes))


def click_melody(rng: np.random.Generator, tempo_bpm: float, beats: int = 16,
                 pitch_range: tuple[int, int] = (55, 79), skip_probability: float = 0.15) -> ScoreSpec:
    """Short half-beat notes on the beat, with the occasional beat left out."""
    notes = []
    for b in range(beats):
        if 0 < b < beats - 1 and rng.random() < skip_probability:
            continue
        notes.append(ScoreNote(int(rng.integers(pitch_range[0], pitch_range[1] + 1)), float(b), 0.5))
    return ScoreSpec(float(tempo_bpm), (4, 4), tuple(notes), length_beats=float(beats))


def accented_melody(rng: np.random.Generator, numerator: int, tempo_bpm: float, bars: int = 6,
                    accent: float = 1.8, pitch_range: tuple[int, int] = (55, 79)) -> ScoreSpec:
    """Legato melody whose downbeat notes are ``accent`` times louder."""
    notes = []
    prev = None
    for bar in range(bars):
        t = 0.0
        while t < numerator:
            room = numerator - t
            options = [d for d in (1.0, 2.0, 0.5) if d <= room]
            dur = float(rng.choice(options, p=_normalized([0.6, 0.25, 0.15][:len(options)])))
            pitch = _next_pitch(rng, prev, *pitch_range)
            gain = accent if t == 0 else 1.0
            notes.append(ScoreNote(pitch, bar * numerator + t, dur, gain))
            prev = pitch
            t += dur
    return ScoreSpec(float(tempo_bpm), (numerator, 4), tuple(notes))


def _normalized(w):
    w = np.asarray(w, dtype=float)
    return w / w.sum()


def render(score: ScoreSpec, timbre: Timbre, rng: np.random.Generator,
           snr_db: float | None = 30.0, sample_rate: int = 44100) -> AudioBuffer:
    buf = synth_melody(score, sample_rate, timbre)
    if snr_db is not None:
        buf = add_noise(buf, snr_db, rng)
    return buf
