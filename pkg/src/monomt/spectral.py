"""Radix-2 FFT, its O(N^2) DFT reference, and dominant-frequency picking."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonPowerOfTwo

# a peak must exceed this multiple of the median bin magnitude to count as voiced
VOICING_RATIO = 5.0


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True, eq=False)
class Frame:
    samples: np.ndarray
    start_time: float
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        n = samples.size
        if not is_power_of_two(n) or n < 16:
            raise NonPowerOfTwo(f"frame length must be a power of two >= 16, got {n}")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True, eq=False)
class Spectrum:
    bins: np.ndarray
    sample_rate: int

    def frequency(self, k: float) -> float:
        return k * self.sample_rate / self.bins.size

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.bins)


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window, zero at both ends."""
    if n < 2:
        raise ValueError(f"Hann window needs n >= 2, got {n}")
    i = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * i / (n - 1)))


@lru_cache(maxsize=32)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def _twiddles(m: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(m // 2) / m)[:, None]


def fft(x, inverse: bool = False) -> np.ndarray:
    """Iterative decimation-in-time radix-2 FFT over the last axis.

    The forward transform is X[k] = sum_n x[n] exp(-2 pi i k n / N); the
    inverse is the conjugate transform scaled by 1/N.  Leading axes are
    treated as a batch of independent frames.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise NonPowerOfTwo(f"FFT length must be a power of two, got {n}")
    if inverse:
        return np.conj(fft(np.conj(x))) / n

    batch = x.shape[:-1]
    count = int(np.prod(batch, dtype=np.int64))
    # butterflies run along axis 0 with the batch contiguous on axis 1
    a = np.ascontiguousarray(x.reshape(count, n).T)[_bit_reversal(n)]
    scratch = np.empty_like(a)
    m = 2
    while m <= n:
        half = m // 2
        src = a.reshape(n // m, m, count)
        dst = scratch.reshape(n // m, m, count)
        odd = np.multiply(src[:, half:], _twiddles(m), out=dst[:, :half])
        np.subtract(src[:, :half], odd, out=dst[:, half:])
        np.add(src[:, :half], odd, out=dst[:, :half])
        a, scratch = scratch, a
        m *= 2
    return a.T.reshape(*batch, n)


def rfft(x) -> np.ndarray:
    """Bins 0..N/2 of the FFT of real input, via one N/2-point complex FFT."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise NonPowerOfTwo(f"FFT length must be a power of two, got {n}")
    if n < 4:
        return fft(x)[..., :n // 2 + 1]
    h = n // 2
    z = fft(x[..., 0::2] + 1j * x[..., 1::2])
    k = np.arange(h + 1)
    zk = z[..., k % h]
    zr = np.conj(z[..., (-k) % h])
    even = 0.5 * (zk + zr)
    odd = -0.5j * (zk - zr)
    return even + np.exp(-2j * np.pi * k / n) * odd


def ifft(x) -> np.ndarray:
    return fft(x, inverse=True)


def naive_dft(x) -> np.ndarray:
    """Direct O(N^2) evaluation of the DFT; works for any length."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    if n == 0:
        raise ValueError("DFT of an empty sequence")
    idx = np.arange(n)
    out = np.empty(n, dtype=np.complex128)
    # reduce k*j mod n in integers so the phase stays exact for large n
    rows = max(1, (1 << 22) // n)
    for start in range(0, n, rows):
        k = idx[start:start + rows, None]
        phase = (k * idx[None, :]) % n
        out[start:start + rows] = np.exp(-2j * np.pi * phase / n) @ x
    return out


def spectrum(frame: Frame, windowed: bool = True) -> Spectrum:
    samples = frame.samples * hann_window(frame.samples.size) if windowed else frame.samples
    return Spectrum(fft(samples), frame.sample_rate)


def _parabolic_offset(left: np.ndarray, centre: np.ndarray, right: np.ndarray) -> np.ndarray:
    denom = left - 2.0 * centre + right
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(denom < 0, 0.5 * (left - right) / denom, 0.0)
    return np.clip(delta, -1.0, 1.0)


def dominant_frequencies(frames: np.ndarray, sample_rate: int, windowed: bool = True):
    """Vectorised :func:`dominant_frequency` over a 2-D array of frames.

    Returns ``(freqs, magnitudes, raw_bins)``; unvoiced rows hold zeros.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    n = frames.shape[-1]
    if not is_power_of_two(n) or n < 16:
        raise NonPowerOfTwo(f"frame length must be a power of two >= 16, got {n}")
    if windowed:
        frames = frames * hann_window(n)
    mags = np.abs(rfft(frames))
    band = mags[:, 1:n // 2]
    k = np.argmax(band, axis=1) + 1
    rows = np.arange(frames.shape[0])
    peak = mags[rows, k]
    floor = VOICING_RATIO * np.median(band, axis=1)
    voiced = (peak > 0) & (peak >= floor)

    tiny = np.finfo(float).tiny
    logs = np.log(np.maximum(mags, tiny))
    delta = _parabolic_offset(logs[rows, k - 1], logs[rows, k], logs[rows, k + 1])
    freqs = (k + delta) * sample_rate / n
    return (np.where(voiced, freqs, 0.0), np.where(voiced, peak, 0.0),
            np.where(voiced, k, 0))


def dominant_frequency(frame: Frame, windowed: bool = True) -> tuple[float, float]:
    """Strongest spectral peak of ``frame`` as ``(freq_hz, magnitude)``.

    The argmax bin over 1..N/2-1 is refined by fitting a parabola through
    the log magnitudes of it and its two neighbours.  Frames whose peak is
    below five times the median bin magnitude are unvoiced and give (0, 0).
    """
    freqs, mags, _ = dominant_frequencies(frame.samples[None, :], frame.sample_rate, windowed)
    return float(freqs[0]), float(mags[0])
