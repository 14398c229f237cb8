"""2-D DFT helpers and circular correlation on cell grids.

Convention: the forward transform is unnormalised and the inverse carries
``1/T`` (T = rows * cols), i.e. ``numpy.fft`` defaults.  Parseval then reads
``sum |x|^2 = (1/T) sum |X|^2``.  Transforms act on the first two axes;
any trailing axes are channels.
"""

import numpy as np
import scipy.fft

_AXES = (0, 1)


def fft2(x):
    return scipy.fft.fft2(x, axes=_AXES)


def ifft2(xf, real=True):
    out = scipy.fft.ifft2(xf, axes=_AXES)
    return out.real if real else out


def rfft2(x):
    """Half spectrum of a real map (last transformed axis is halved)."""
    return scipy.fft.rfft2(x, axes=_AXES)


def irfft2(xf, shape):
    """Real inverse of :func:`rfft2`; ``shape`` is the spatial (rows, cols)."""
    return scipy.fft.irfft2(xf, s=tuple(shape), axes=_AXES)


def half_spectrum_weights(cols):
    """Multiplicity of each stored column of a half spectrum of width ``cols``.

    Summing ``weights * |X|^2`` over the half spectrum equals the sum over
    the full spectrum.
    """
    weights = np.full(cols // 2 + 1, 2.0)
    weights[0] = 1.0
    if cols % 2 == 0:
        weights[-1] = 1.0
    return weights


def circular_correlate(w, x):
    """``r[t] = sum_n w[n] x[n + t]`` with periodic indices, per channel.

    A template correlated with a copy of itself shifted by ``s`` peaks at ``s``.
    """
    w = np.asarray(w)
    x = np.asarray(x)
    if w.shape != x.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {x.shape}")
    return ifft2(np.conj(fft2(w)) * fft2(x))


def correlation_response(wf, xf):
    """Channel-summed correlation response from spectra (rows, cols, D)."""
    if wf.shape != xf.shape:
        raise ValueError(f"shape mismatch: {wf.shape} vs {xf.shape}")
    return ifft2(np.sum(np.conj(wf) * xf, axis=2))
