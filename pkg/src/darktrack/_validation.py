"""Input validation helpers shared by the estimators."""

import numpy as np


class DarkPatchError(ValueError):
    """Raised when a patch has no illumination to adapt (all pixels black)."""

    def __init__(self, message="uniformly dark patch"):
        super().__init__(message)


def as_float(x):
    """Array view of ``x`` keeping float32 / float64, other types become float64."""
    arr = np.asarray(x)
    if arr.dtype in (np.float32, np.float64):
        return arr
    return arr.astype(np.float64)


def check_image(img, name="image", channels=3):
    """Return ``img`` as a float64 array of shape (H, W, channels) in [0, 1].

    8-bit integer input is rescaled by 1/255.
    """
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64, copy=False)
    if arr.ndim != 3 or arr.shape[2] != channels:
        raise ValueError(
            f"{name} must have shape (H, W, {channels}), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_gray(img, name="patch"):
    arr = as_float(img)
    if arr.ndim < 2:
        raise ValueError(f"{name} must be at least 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_cell_multiple(shape, cell_size, name="patch"):
    h, w = shape[:2]
    if h < cell_size or w < cell_size:
        raise ValueError(
            f"{name} of size {h}x{w} is smaller than one {cell_size}x{cell_size} cell")
    if h % cell_size or w % cell_size:
        raise ValueError(
            f"{name} size {h}x{w} is not a multiple of cell size {cell_size}")


def check_same_grid(a, b, what="feature maps"):
    if a.shape[:2] != b.shape[:2]:
        raise ValueError(
            f"{what} have mismatched grids: {a.shape[:2]} vs {b.shape[:2]}")

