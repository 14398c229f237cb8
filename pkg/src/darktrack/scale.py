"""One-dimensional scale correlation filter.

Samples of the target at ``S`` geometric scale factors are described by
fHOG, stacked into a (features x S) matrix and regressed onto a Gaussian
over the scale axis.  The filter is kept as a numerator / denominator pair
updated by linear interpolation.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal.windows import hann

from .features import fhog
from .imgproc import crop_patches, to_gray


@dataclass
class ScaleModel:
    factors: np.ndarray
    model_size: tuple
    ysf: np.ndarray
    window: np.ndarray
    num: np.ndarray = None
    den: np.ndarray = None


def scale_factors(n_scales, step):
    exps = np.arange(n_scales) - (n_scales - 1) // 2
    return step ** exps.astype(np.float64)


def scale_model_size(target_size, max_area=512, cell_size=4):
    """Fixed (w, h) resolution all scale samples are resampled to."""
    w, h = target_size
    factor = min(1.0, np.sqrt(max_area / (w * h)))
    size = []
    for v in (w, h):
        n = int(np.floor(v * factor / cell_size)) * cell_size
        size.append(max(n, 2 * cell_size))
    return tuple(size)


def make_scale_model(n_scales=33, step=1.02, target_size=(32, 32), sigma_factor=0.25,
                     max_area=512, cell_size=4):
    if n_scales < 1 or n_scales % 2 == 0:
        raise ValueError(f"n_scales must be a positive odd number, got {n_scales}")
    factors = scale_factors(n_scales, step)
    sigma = np.sqrt(n_scales) * sigma_factor
    ss = np.arange(n_scales) - (n_scales - 1) // 2
    ys = np.exp(-0.5 * ss ** 2 / sigma ** 2)
    window = hann(n_scales) if n_scales > 1 else np.ones(1)
    return ScaleModel(factors, scale_model_size(target_size, max_area, cell_size),
                      np.fft.fft(ys), window)


def scale_samples(frame, center, target_size, factors, model_size, preprocess=None,
                  cell_size=4):
    """(n_features, S) matrix of windowed fHOG descriptors, one column per scale."""
    factors = np.asarray(factors, dtype=np.float64)
    extents = factors[:, None] * np.asarray(target_size, dtype=np.float64)[None, :]
    patches = crop_patches(frame, center, extents, model_size)
    if preprocess is not None:
        patches = np.stack([preprocess(p) for p in patches])
    feats = fhog(to_gray(patches), cell_size)
    return feats.reshape(len(factors), -1).T


def update_scale_model(model, samples, rate):
    xsf = np.fft.fft(samples * model.window[None, :], axis=1)
    num = model.ysf[None, :] * np.conj(xsf)
    den = np.sum(np.real(xsf * np.conj(xsf)), axis=0)
    if model.num is None:
        model.num, model.den = num, den
    else:
        model.num = (1 - rate) * model.num + rate * num
        model.den = (1 - rate) * model.den + rate * den
    return model


def scale_response(model, samples, lambda2=0.01):
    xsf = np.fft.fft(samples * model.window[None, :], axis=1)
    return np.real(np.fft.ifft(np.sum(model.num * xsf, axis=0) / (model.den + lambda2)))


def best_scale_index(model, samples, lambda2=0.01):
    return int(np.argmax(scale_response(model, samples, lambda2)))
