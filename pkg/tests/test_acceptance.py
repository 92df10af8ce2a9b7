"""Acceptance criteria, one test each at the stated tolerance.

Each test records a PASS/FAIL verdict that is printed in the terminal
summary under "acceptance criteria".
"""

import time

import numpy as np
import pytest

from conftest import random_quantized_score
from monomt import corpus
from monomt.audio_io import Timbre, score_from_notes
from monomt.evaluation import match_notes
from monomt.midi import decode_smf, encode_smf, midi_to_score, score_to_midi
from monomt.pipeline import transcribe
from monomt.pitch import (DichotomySpec, dichotomy_midpoints, midi_to_freq, snap_frequency,
                          snap_frequency_linear)
from monomt.rhythm import QuantizedNote, QuantizedScore, TimeSignature
from monomt.spectral import fft, naive_dft

SR = 44100


def timbre_for(i):
    return Timbre.pure_sine() if i % 2 == 0 else Timbre.harmonic(4, 0.5)


def test_corpus_f_measure(verdict):
    rng = np.random.default_rng(42)
    scores, times = [], []
    for i in range(50):
        ref = corpus.random_melody(rng)
        buf = corpus.render(ref, timbre_for(i), rng, snr_db=30.0, sample_rate=SR)
        start = time.perf_counter()
        result = transcribe(buf)
        times.append(time.perf_counter() - start)
        scores.append(match_notes(ref, result.score).f_measure)
    mean_f, slowest = float(np.mean(scores)), max(times)
    verdict("corpus mean strict F >= 0.90 over 50 melodies", mean_f >= 0.90,
            f"mean F {mean_f:.4f}, worst {min(scores):.4f}")
    verdict("corpus runtime < 1 s per melody", slowest < 1.0, f"slowest {slowest:.3f} s")


def test_snap_iterations_and_linear_oracle(verdict):
    rng = np.random.default_rng(1)
    freqs = np.exp(rng.uniform(np.log(midi_to_freq(0) * 0.9), np.log(midi_to_freq(127) * 1.1), 10_000))
    worst, agree = 0, 0
    for f in freqs:
        m, it = snap_frequency(float(f))
        worst = max(worst, it)
        agree += m == snap_frequency_linear(float(f))
    verdict("bisection snap: <= 8 iterations on 10,000 frequencies", worst <= 8, f"max {worst}")
    verdict("bisection snap equals linear scan in 100% of cases", agree == 10_000, f"{agree}/10000")


def test_dichotomy_error_bound(verdict):
    rng = np.random.default_rng(2)
    violations = 0
    for _ in range(100):
        a = float(rng.uniform(-100, 100))
        b = a + float(rng.uniform(0.1, 50))
        x_star = float(rng.uniform(a, b))
        eps = float(rng.uniform(1e-9, (b - a) / 4))
        curvature = float(rng.uniform(0.01, 100))
        spec = DichotomySpec(a, b, eps)
        for n, x in enumerate(dichotomy_midpoints(lambda x: curvature * (x - x_star) ** 2, spec), start=1):
            violations += abs(x - x_star) > spec.error_bound(n) + 1e-12 * max(1.0, abs(x_star))
    verdict("dichotomy midpoint error bound on 100 random quadratics", violations == 0,
            f"{violations} violations")


def test_fft_against_naive_dft(verdict):
    rng = np.random.default_rng(3)
    worst_dev, worst_parseval = 0.0, 0.0
    for i in range(100):
        n = 2 ** (4 + i % 9)  # 16 .. 4096
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        X = fft(x)
        worst_dev = max(worst_dev, float(np.max(np.abs(X - naive_dft(x)))))
        energy = float(np.sum(np.abs(x) ** 2))
        worst_parseval = max(worst_parseval, abs(float(np.sum(np.abs(X) ** 2)) / n - energy) / energy)
    verdict("FFT within 1e-9 of naive DFT on 100 frames of 16..4096", worst_dev < 1e-9,
            f"max deviation {worst_dev:.2e}")
    verdict("Parseval within 1e-6 relative", worst_parseval < 1e-6, f"max {worst_parseval:.2e}")


def test_snap_detuning_tolerance(verdict):
    misses = sum(snap_frequency(midi_to_freq(m) * 2 ** (d / 1200))[0] != m
                 for m in range(128) for d in range(-49, 50))
    verdict("snap recovers every note detuned by -49..49 cents", misses == 0,
            f"{misses} of {128 * 99} missed")


def test_tempo_recovery(verdict):
    rng = np.random.default_rng(2024)
    bpms = list(range(60, 181, 7))
    hits, misses = 0, []
    for t in range(100):
        bpm = bpms[t % len(bpms)]
        score = corpus.click_melody(rng, bpm)
        est = transcribe(corpus.render(score, timbre_for(t), rng, sample_rate=SR)).score.tempo_bpm
        if abs(est - bpm) <= 2:
            hits += 1
        else:
            misses.append((bpm, round(est, 2)))
    verdict("click tempo within +-2 BPM in >= 95% of 100 trials", hits >= 95,
            f"{hits}/100, misses {misses[:5]}")


def test_time_signature_classification(verdict):
    rng = np.random.default_rng(7)
    hits = 0
    for t in range(40):
        numerator = 3 if t < 20 else 4
        score = corpus.accented_melody(rng, numerator, float(rng.integers(70, 161)), accent=1.8)
        ts = transcribe(corpus.render(score, timbre_for(t), rng, sample_rate=SR)).score.time_signature
        hits += ts.numerator == numerator
    verdict("meter correct in >= 95% of 40 accented melodies", hits >= 38, f"{hits}/40")


def test_midi_codec(verdict):
    rng = np.random.default_rng(5)
    exact = sum(midi_to_score(decode_smf(encode_smf(score_to_midi(s)))) == s
                for s in (random_quantized_score(rng) for _ in range(100)))
    verdict("MIDI round trip exact for 100 random scores", exact == 100, f"{exact}/100")
    one = QuantizedScore(120.0, TimeSignature(4), (QuantizedNote(60, 0.0, 1.0),))
    data = encode_smf(score_to_midi(one))
    header_ok = data[:14] == bytes.fromhex("4D5468640000000600000001 01E0".replace(" ", ""))
    tempo_ok = b"\xff\x51\x03\x07\xa1\x20" in data
    verdict("MIDI header and tempo bytes bit-exact", header_ok and tempo_ok, data[:14].hex())


def test_octave_error_mode(verdict):
    ref = score_from_notes(120, [(m, i, 1) for i, m in enumerate([60, 62, 64, 65, 67, 69, 71, 72])])
    hyp = QuantizedScore(120, notes=tuple(QuantizedNote(n.midi + 12, n.onset, n.duration) for n in ref.notes))
    strict = match_notes(ref, hyp)
    loose = match_notes(ref, hyp, octave_invariant=True)
    ok = strict.f_measure == 0 and loose.f_measure == 1.0 and strict.octave_errors == len(ref.notes)
    verdict("octave shift: strict F 0, invariant F 1, octave_errors == note count", ok,
            f"strict {strict.f_measure}, invariant {loose.f_measure}, octave errors {strict.octave_errors}")
