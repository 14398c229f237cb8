"""Image I/O, box geometry and patch sampling.

Images are float64 arrays of shape (H, W, 3) with values in [0, 1].
Continuous coordinates place the center of pixel ``j`` at ``j + 0.5``, so a
box with top-left corner ``x`` and width ``w`` has center ``x + w / 2``.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ._validation import as_float, check_image

#: Channel weights (R, G, B) shared by the gray channel and the enhancer.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in center convention (pixels)."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"degenerate box: w={self.w}, h={self.h}")

    @classmethod
    def from_xywh(cls, x, y, w, h):
        """Build from a top-left ``(x, y, w, h)`` rectangle."""
        return cls(x + w / 2.0, y + h / 2.0, w, h)

    def to_xywh(self):
        return (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)

    @property
    def center(self):
        return (self.cx, self.cy)

    @property
    def size(self):
        return (self.w, self.h)


@dataclass(frozen=True)
class PatchSpec:
    """Sampling geometry: ``extent`` source pixels around ``center`` are
    resampled onto an ``output`` grid of patch pixels (both as (w, h))."""

    center: tuple
    extent: tuple
    output: tuple


def _sample_positions(center, extent, n_out):
    # patch pixel i covers the source interval starting at center - extent/2
    step = extent / n_out
    return center - extent / 2.0 + (np.arange(n_out) + 0.5) * step - 0.5


def _axis_taps(pos, n_src, dtype=np.float64):
    lo = np.floor(pos)
    frac = (pos - lo).astype(dtype)
    lo = lo.astype(np.intp)
    i0 = np.clip(lo, 0, n_src - 1)
    i1 = np.clip(lo + 1, 0, n_src - 1)
    return i0, i1, frac


def crop_patch(img, spec):
    """Bilinearly resample a rectangular region of ``img``.

    Source positions outside the image take the value of the nearest edge
    pixel.  Works for any trailing channel layout (H, W[, C]).
    """
    img = as_float(img)
    if img.ndim < 2 or img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("image is empty")
    ew, eh = (float(v) for v in spec.extent)
    ow, oh = (int(v) for v in spec.output)
    if not (ew > 0 and eh > 0):
        raise ValueError("degenerate patch")
    if ow <= 0 or oh <= 0:
        raise ValueError("degenerate patch")
    cx, cy = (float(v) for v in spec.center)

    y0, y1, fy = _axis_taps(_sample_positions(cy, eh, oh), img.shape[0], img.dtype)
    x0, x1, fx = _axis_taps(_sample_positions(cx, ew, ow), img.shape[1], img.dtype)
    # restrict to the touched columns before gathering whole rows
    lo, hi = int(x0.min()), int(x1.max()) + 1
    sub = img[:, lo:hi]
    x0, x1 = x0 - lo, x1 - lo

    extra = (slice(None),) + (None,) * (img.ndim - 1)
    top = sub[y0]
    # a + f * (b - a) keeps constant inputs exactly constant
    rows = top + fy[extra] * (sub[y1] - top)
    extra = (None, slice(None)) + (None,) * (img.ndim - 2)
    left = rows[:, x0]
    return left + fx[extra] * (rows[:, x1] - left)


def crop_patches(img, center, extents, output):
    """Batch of :func:`crop_patch` calls sharing a center and output size.

    ``extents`` is an (S, 2) array of (w, h); returns (S, oh, ow[, C]).
    """
    img = as_float(img)
    if img.ndim < 2 or img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("image is empty")
    extents = np.atleast_2d(np.asarray(extents, dtype=np.float64))
    ow, oh = (int(v) for v in output)
    if ow <= 0 or oh <= 0 or not np.all(extents > 0):
        raise ValueError("degenerate patch")
    cx, cy = (float(v) for v in center)
    ys = cy - extents[:, 1:] / 2.0 + (np.arange(oh) + 0.5) * (extents[:, 1:] / oh) - 0.5
    xs = cx - extents[:, :1] / 2.0 + (np.arange(ow) + 0.5) * (extents[:, :1] / ow) - 0.5
    y0, y1, fy = _axis_taps(ys, img.shape[0], img.dtype)
    x0, x1, fx = _axis_taps(xs, img.shape[1], img.dtype)
    trail = (None,) * (img.ndim - 2)
    yi0, yi1 = y0[:, :, None], y1[:, :, None]
    xi0, xi1 = x0[:, None, :], x1[:, None, :]
    fy = fy[(slice(None), slice(None), None) + trail]
    fx = fx[(slice(None), None, slice(None)) + trail]
    a, b = img[yi0, xi0], img[yi0, xi1]
    c, d = img[yi1, xi0], img[yi1, xi1]
    top = a + fx * (b - a)
    bottom = c + fx * (d - c)
    return top + fy * (bottom - top)


def resize(img, size):
    """Bilinear resize of a whole image to ``size = (w, h)``."""
    img = np.asarray(img)
    h, w = img.shape[:2]
    spec = PatchSpec(center=(w / 2.0, h / 2.0), extent=(w, h), output=size)
    return crop_patch(img, spec)


def to_gray(patch, alpha=LUMA_WEIGHTS):
    """Weighted channel sum; with weights summing to one the result stays in [0, 1]."""
    patch = as_float(patch)
    if patch.shape[-1] != 3:
        raise ValueError(f"expected a 3-channel patch, got shape {patch.shape}")
    gray = patch @ np.asarray(alpha, dtype=patch.dtype)
    return np.clip(gray, 0.0, 1.0)


def load_image(path):
    """Decode an image file to a float (H, W, 3) array in [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot decode image {path}: {exc}") from exc
    return check_image(arr, name=str(path))


def to_uint8(arr):
    arr = np.asarray(arr, dtype=np.float64)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def save_image(path, arr):
    """Write a [0, 1] float image (gray, RGB or boolean mask) as 8-bit."""
    arr = np.asarray(arr)
    if arr.dtype == bool:
        arr = arr.astype(np.float64)
    Image.fromarray(to_uint8(arr)).save(Path(path))
