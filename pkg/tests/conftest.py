import numpy as np
import pytest

from monomt.audio_io import AudioBuffer

SR = 44100

# acceptance verdicts, printed at the end of the run
VERDICTS: list[tuple[str, bool, str]] = []


def sine(freq, seconds, amp=0.5, sr=SR, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


def buffer(samples, sr=SR):
    return AudioBuffer(np.asarray(samples, dtype=float), sr)


@pytest.fixture
def verdict():
    """Record one acceptance criterion's outcome and assert it."""
    def record(name: str, ok: bool, detail: str = ""):
        VERDICTS.append((name, bool(ok), detail))
        assert ok, f"{name}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")


def random_quantized_score(rng, max_notes=24):
    """A monophonic grid-aligned score with a tempo a MIDI file stores exactly."""
    from monomt.rhythm import QuantizedNote, QuantizedScore, TimeSignature, midi_representable_tempo

    notes = []
    t = 0
    for _ in range(int(rng.integers(0, max_notes + 1))):
        t += int(rng.integers(0, 9))  # gap in sixteenths
        dur = int(rng.integers(1, 33))
        notes.append(QuantizedNote(int(rng.integers(0, 128)), t / 16, dur / 16))
        t += dur
    tempo = midi_representable_tempo(float(rng.uniform(40, 240)))
    return QuantizedScore(tempo, TimeSignature(int(rng.choice([2, 3, 4, 5, 7]))), tuple(notes))
