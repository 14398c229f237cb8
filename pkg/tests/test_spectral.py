import numpy as np
import pytest

from darktrack.spectral import (circular_correlate, correlation_response, fft2,
                                half_spectrum_weights, ifft2, irfft2, rfft2)
from oracles import brute_correlate


def test_fft_roundtrip(rng):
    x = rng.standard_normal((6, 10, 3))
    np.testing.assert_allclose(ifft2(fft2(x)), x, atol=1e-14)
    np.testing.assert_allclose(irfft2(rfft2(x), x.shape[:2]), x, atol=1e-14)


@pytest.mark.parametrize("shape", [(5, 7), (8, 8), (6, 9)])
def test_correlation_matches_brute_force(rng, shape):
    w, x = rng.standard_normal(shape), rng.standard_normal(shape)
    np.testing.assert_allclose(circular_correlate(w, x), brute_correlate(w, x), atol=1e-12)


def test_shifted_copy_peaks_at_shift(rng):
    w = rng.standard_normal((16, 16))
    x = np.roll(w, (3, -5), axis=(0, 1))
    r = circular_correlate(w, x)
    assert np.unravel_index(np.argmax(r), r.shape) == (3, 11)


def test_response_sums_channels(rng):
    w, x = rng.standard_normal((2, 6, 6, 3))
    expected = sum(brute_correlate(w[..., c], x[..., c]) for c in range(3))
    np.testing.assert_allclose(correlation_response(fft2(w), fft2(x)), expected, atol=1e-12)


@pytest.mark.parametrize("cols", [6, 7])
def test_half_spectrum_parseval(rng, cols):
    x = rng.standard_normal((5, cols))
    full = np.sum(np.abs(np.fft.fft2(x)) ** 2)
    half = np.sum(np.abs(rfft2(x)) ** 2 * half_spectrum_weights(cols)[None, :])
    assert half == pytest.approx(full, rel=1e-12)


def test_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        circular_correlate(np.zeros((4, 4)), np.zeros((4, 5)))
