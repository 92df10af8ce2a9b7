"""Silence trimming, noise gating and peak normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .errors import AllSilent, AllZero, EmptyAudio


@dataclass(frozen=True)
class PreprocessConfig:
    silence_threshold: float = 0.02  # fraction of the loudest window's RMS
    gate_threshold: float = 0.01     # absolute RMS floor
    window_ms: float = 20.0

    def __post_init__(self):
        if not 0 < self.silence_threshold < 1:
            raise ValueError("silence_threshold must lie in (0, 1)")
        if not 0 < self.gate_threshold < 1:
            raise ValueError("gate_threshold must lie in (0, 1)")
        if not self.window_ms > 0:
            raise ValueError("window_ms must be positive")

    def window_samples(self, sample_rate: int) -> int:
        return max(1, int(round(self.window_ms * 1e-3 * sample_rate)))


def window_rms(samples: np.ndarray, window: int) -> np.ndarray:
    """RMS of consecutive non-overlapping windows; the last one may be partial."""
    n = samples.size
    count = -(-n // window)
    padded = np.zeros(count * window)
    padded[:n] = samples
    sq = (padded ** 2).reshape(count, window).sum(axis=1)
    lengths = np.full(count, window, dtype=float)
    lengths[-1] = n - (count - 1) * window
    return np.sqrt(sq / lengths)


def trim_silence(buf: AudioBuffer, cfg: PreprocessConfig = PreprocessConfig()) -> AudioBuffer:
    """Cut leading and trailing windows quieter than ``silence_threshold`` x peak RMS."""
    if len(buf) == 0:
        raise EmptyAudio("cannot trim an empty buffer")
    w = cfg.window_samples(buf.sample_rate)
    rms = window_rms(buf.samples, w)
    peak = rms.max()
    if peak <= 0:
        raise AllSilent("recording contains no signal above the silence threshold")
    loud = np.flatnonzero(rms >= cfg.silence_threshold * peak)
    start = loud[0] * w
    stop = min((loud[-1] + 1) * w, len(buf))
    if start == 0 and stop == len(buf):
        return buf
    return buf.with_samples(buf.samples[start:stop].copy())


def noise_gate(buf: AudioBuffer, cfg: PreprocessConfig = PreprocessConfig()) -> AudioBuffer:
    """Zero every window whose RMS is below ``gate_threshold``."""
    if len(buf) == 0:
        raise EmptyAudio("cannot gate an empty buffer")
    w = cfg.window_samples(buf.sample_rate)
    quiet = window_rms(buf.samples, w) < cfg.gate_threshold
    if not quiet.any():
        return buf
    mask = np.repeat(quiet, w)[:len(buf)]
    out = buf.samples.copy()
    out[mask] = 0.0
    return buf.with_samples(out)


def normalize(buf: AudioBuffer) -> AudioBuffer:
    peak = np.max(np.abs(buf.samples), initial=0.0)
    if peak == 0:
        raise AllZero("cannot normalize a buffer with no nonzero sample")
    if peak == 1.0:
        return buf
    return buf.with_samples(buf.samples / peak)
