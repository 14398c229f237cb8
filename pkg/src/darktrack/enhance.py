"""Global-adaptation low-light enhancement and the illumination-change mask.

The enhancer rescales every pixel by ``L_g / L_w`` where ``L_w`` is the
weighted channel sum ("world illumination") and ``L_g`` is a log tone curve
normalised by the log-average luminance of the patch.  Because enhancement
lifts dark pixels far more than bright ones, the per-pixel illumination
change ``L_w(I) - L_w(I_e)`` separates objects of different reflectivity,
which :func:`build_mask` turns into a binary target mask with a three-sigma
rule.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DarkPatchError, as_float, check_image
from .imgproc import LUMA_WEIGHTS

DEFAULT_DELTA = 1e-4


def _check_alpha(alpha):
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (3,) or np.any(alpha < 0):
        raise ValueError(f"alpha must be three non-negative weights, got {alpha}")
    if abs(alpha.sum() - 1.0) > 1e-9:
        raise ValueError(f"alpha must sum to 1, got {alpha.sum()}")
    return alpha


def world_illumination(patch, alpha=LUMA_WEIGHTS):
    """Per-pixel weighted channel sum of an (H, W, 3) patch."""
    alpha = _check_alpha(alpha)
    patch = as_float(patch)
    return patch @ alpha.astype(patch.dtype)


def log_average_luminance(lw, delta=DEFAULT_DELTA):
    """``exp(mean(log(delta + lw)))``, the geometric-mean scene brightness."""
    lw = as_float(lw)
    if lw.size == 0:
        raise ValueError("illumination map is empty")
    if delta <= 0:
        raise ValueError("delta must be positive")
    return float(np.exp(np.mean(np.log(delta + lw))))


def _adaptation(lw, log_avg, lw_max):
    denom = np.log(lw_max / log_avg + 1.0)
    if not denom > 0:
        raise DarkPatchError()
    return np.log(lw / log_avg + 1.0) / denom


def global_adaptation(lw, delta=DEFAULT_DELTA):
    """Global adaptation factor ``L_g`` in [0, 1]; equals 1 at the brightest pixel."""
    lw = as_float(lw)
    log_avg = log_average_luminance(lw, delta)
    return _adaptation(lw, log_avg, float(lw.max()))


def _gain(lw, lg):
    # pure black pixels keep a unit gain instead of 0/0
    gain = np.ones_like(lw)
    lit = lw > 0
    gain[lit] = lg[lit] / lw[lit]
    return gain


def enhance_patch(patch, alpha=LUMA_WEIGHTS, delta=DEFAULT_DELTA, clip=True):
    """Brighten a patch channel-wise by ``L_g / L_w``.

    With ``clip=False`` the raw product is returned; it can exceed 1 for
    saturated channels of dark pixels.
    """
    patch = as_float(patch)
    lw = world_illumination(patch, alpha)
    lg = global_adaptation(lw, delta)
    out = patch * _gain(lw, lg)[..., None]
    if clip:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def illumination_change(patch, alpha=LUMA_WEIGHTS, delta=DEFAULT_DELTA):
    """``L_w(I) - L_w(I_e)`` evaluated on the two illumination maps.

    The unclipped enhanced image is used so the map reflects the tone curve
    itself rather than display saturation.
    """
    patch = as_float(patch)
    enhanced = enhance_patch(patch, alpha, delta, clip=False)
    return world_illumination(patch, alpha) - world_illumination(enhanced, alpha)


def illumination_change_closed_form(patch, alpha=LUMA_WEIGHTS, delta=DEFAULT_DELTA):
    """Algebraic shortcut ``L_w - L_g`` for the illumination change (cross-check)."""
    lw = world_illumination(patch, alpha)
    return lw - global_adaptation(lw, delta)


def pretreat(patch, alpha=LUMA_WEIGHTS, delta=DEFAULT_DELTA):
    """Enhanced (clipped) patch and illumination-change map in one pass."""
    patch = as_float(patch)
    lw = world_illumination(patch, alpha)
    raw = patch * _gain(lw, global_adaptation(lw, delta))[..., None]
    theta = lw - world_illumination(raw, alpha)
    return np.clip(raw, 0.0, 1.0), theta


def box_slices(box, shape):
    """Integer pixel slices of a center-convention box inside an (H, W) grid."""
    h, w = shape[:2]
    x0 = int(np.floor(box.cx - box.w / 2.0 + 0.5))
    x1 = int(np.floor(box.cx + box.w / 2.0 + 0.5))
    y0 = int(np.floor(box.cy - box.h / 2.0 + 0.5))
    y1 = int(np.floor(box.cy + box.h / 2.0 + 0.5))
    x0, x1 = max(x0, 0), min(x1, w)
    y0, y1 = max(y0, 0), min(y1, h)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"target box {box} does not overlap the {h}x{w} patch")
    return slice(y0, y1), slice(x0, x1)


@dataclass(frozen=True)
class MaskStats:
    mu: float
    sigma: float


def build_mask(theta, target_box, return_stats=False):
    """Three-sigma target mask from an illumination-change map.

    Mean and standard deviation are taken over the target box; pixels whose
    change lies within ``mu +- 3 sigma`` are marked, and everything outside
    the box is zeroed.
    """
    theta = as_float(theta)
    rows, cols = box_slices(target_box, theta.shape)
    center = theta[rows, cols]
    mu = float(center.mean())
    sigma = float(center.std())
    # absorbs the rounding of the mean so a constant map stays fully inside
    tol = 8 * np.finfo(theta.dtype).eps * max(1.0, float(np.abs(center).max()))
    mask = np.zeros(theta.shape, dtype=bool)
    mask[rows, cols] = np.abs(center - mu) <= 3.0 * sigma + tol
    if return_stats:
        return mask, MaskStats(mu, sigma)
    return mask


class LowLightEnhancer(TransformerMixin, BaseEstimator):
    """Global-adaptation enhancer in transformer form.

    ``fit`` measures the log-average and peak illumination of a reference
    patch; ``transform`` applies the resulting tone curve.  ``fit_transform``
    on a single patch is :func:`enhance_patch`.

    Parameters
    ----------
    alpha : tuple of float
        Channel weights (R, G, B), non-negative and summing to one.
    delta : float
        Offset inside the logarithm of the log-average luminance.
    clip : bool
        Clamp enhanced values to [0, 1].
    """

    def __init__(self, alpha=LUMA_WEIGHTS, delta=DEFAULT_DELTA, clip=True):
        self.alpha = alpha
        self.delta = delta
        self.clip = clip

    def fit(self, X, y=None):
        X = check_image(X, name="patch")
        lw = world_illumination(X, self.alpha)
        self.log_average_ = log_average_luminance(lw, self.delta)
        self.max_illumination_ = float(lw.max())
        if not self.max_illumination_ > 0:
            raise DarkPatchError()
        return self

    def _adaptation_map(self, X):
        lw = world_illumination(X, self.alpha)
        lg = _adaptation(lw, self.log_average_, self.max_illumination_)
        return lw, lg

    def transform(self, X):
        check_is_fitted(self, "log_average_")
        X = check_image(X, name="patch")
        lw, lg = self._adaptation_map(X)
        out = X * _gain(lw, lg)[..., None]
        if self.clip:
            np.clip(out, 0.0, 1.0, out=out)
        return out

    def illumination_change(self, X):
        """Illumination change of ``X`` under the fitted tone curve."""
        check_is_fitted(self, "log_average_")
        X = check_image(X, name="patch")
        lw, lg = self._adaptation_map(X)
        enhanced = X * _gain(lw, lg)[..., None]
        return lw - world_illumination(enhanced, self.alpha)
