import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SR, sine
from monomt.errors import NonPowerOfTwo
from monomt.spectral import (Frame, dominant_frequencies, dominant_frequency, fft, hann_window, ifft,
                             naive_dft, rfft, spectrum)
from monomt.pitch import snap_frequency

sizes = st.sampled_from([16, 32, 64, 128, 256, 512])


def random_complex(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def test_hann_examples():
    np.testing.assert_allclose(hann_window(4), [0.0, 0.75, 0.75, 0.0], atol=1e-15)
    assert hann_window(5)[2] == pytest.approx(1.0)
    w = hann_window(1024)
    assert w.sum() == pytest.approx(sum(0.5 * (1 - np.cos(2 * np.pi * i / 1023)) for i in range(1024)))
    assert w.sum() == pytest.approx(511.5)
    with pytest.raises(ValueError):
        hann_window(1)


def test_fft_impulse_and_constant():
    np.testing.assert_allclose(fft([1, 0, 0, 0, 0, 0, 0, 0]), np.ones(8), atol=1e-15)
    expected = np.zeros(8, dtype=complex)
    expected[0] = 8
    np.testing.assert_allclose(fft(np.ones(8)), expected, atol=1e-12)


def test_fft_rejects_bad_lengths():
    for n in (3, 6, 100):
        with pytest.raises(NonPowerOfTwo):
            fft(np.zeros(n))
    with pytest.raises(NonPowerOfTwo):
        Frame(np.zeros(8), 0.0, SR)


def test_naive_dft_small_cases():
    np.testing.assert_allclose(naive_dft([1, 0]), [1, 1])
    np.testing.assert_allclose(naive_dft([1, 1]), [2, 0], atol=1e-15)
    # length 3 is fine for the reference even though the FFT refuses it
    np.testing.assert_allclose(naive_dft([1, 2, 3]), np.fft.fft([1, 2, 3]))


@pytest.mark.parametrize("n", [2 ** k for k in range(4, 13)])
def test_fft_matches_naive_dft(n):
    x = random_complex(np.random.default_rng(n), n)
    assert np.max(np.abs(fft(x) - naive_dft(x))) < 1e-9


def test_fft_1024_random():
    x = np.random.default_rng(7).uniform(-1, 1, 1024)
    assert np.max(np.abs(fft(x) - naive_dft(x))) < 1e-9


def test_batched_fft_matches_rows():
    x = random_complex(np.random.default_rng(1), 5 * 64).reshape(5, 64)
    batched = fft(x)
    for row, out in zip(x, batched):
        np.testing.assert_allclose(out, naive_dft(row), atol=1e-10)


@pytest.mark.parametrize("n", [4, 16, 256, 4096])
def test_rfft_is_first_half_of_fft(n):
    x = np.random.default_rng(n).normal(size=(3, n))
    np.testing.assert_allclose(rfft(x), fft(x)[..., :n // 2 + 1], atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(sizes, st.integers(0, 2 ** 32 - 1))
def test_inverse_roundtrip(n, seed):
    x = random_complex(np.random.default_rng(seed), n)
    assert np.max(np.abs(ifft(fft(x)) - x)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(sizes, st.integers(0, 2 ** 32 - 1), st.complex_numbers(max_magnitude=10),
       st.complex_numbers(max_magnitude=10))
def test_linearity(n, seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = random_complex(rng, n), random_complex(rng, n)
    assert np.max(np.abs(fft(a * x + b * y) - (a * fft(x) + b * fft(y)))) < 1e-9


@settings(max_examples=50, deadline=None)
@given(sizes, st.integers(0, 2 ** 32 - 1))
def test_parseval(n, seed):
    x = random_complex(np.random.default_rng(seed), n)
    time_energy = np.sum(np.abs(x) ** 2)
    freq_energy = np.sum(np.abs(fft(x)) ** 2) / n
    assert freq_energy == pytest.approx(time_energy, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(sizes, st.integers(0, 2 ** 32 - 1))
def test_conjugate_symmetry_for_real_input(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    bins = spectrum(Frame(x, 0.0, SR), windowed=False).bins
    k = np.arange(1, n // 2)
    np.testing.assert_allclose(bins[k], np.conj(bins[n - k]), atol=1e-9)


def test_dominant_440():
    frame = Frame(sine(440, 4096 / SR)[:4096], 0.0, SR)
    freqs, _, raw = dominant_frequencies(frame.samples[None, :], SR)
    assert raw[0] == 41
    # the oracle agrees on the raw peak
    mags = np.abs(naive_dft(frame.samples * hann_window(4096)))
    assert int(np.argmax(mags[1:2048])) + 1 == 41
    freq, mag = dominant_frequency(frame)
    assert freq == pytest.approx(440.0, abs=1.0)
    assert mag > 0


def test_zero_frame_is_unvoiced():
    assert dominant_frequency(Frame(np.zeros(4096), 0.0, SR)) == (0.0, 0.0)


def test_white_noise_is_unvoiced():
    noise = np.random.default_rng(2).normal(size=4096)
    assert dominant_frequency(Frame(noise, 0.0, SR)) == (0.0, 0.0)


def test_middle_c_snaps_to_60():
    frame = Frame(sine(261.63, 0.1)[:4096], 0.0, SR)
    assert snap_frequency(dominant_frequency(frame)[0])[0] == 60


def test_refinement_stays_within_a_bin():
    rng = np.random.default_rng(11)
    n = 1024
    for _ in range(200):
        f = rng.uniform(50, 10000)
        frame = sine(f, n / SR, phase=rng.uniform(0, 2 * np.pi))[:n]
        freqs, _, raw = dominant_frequencies(frame[None, :], SR)
        assert abs(freqs[0] - raw[0] * SR / n) <= SR / n
