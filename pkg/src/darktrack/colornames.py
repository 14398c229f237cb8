"""Color-name lookup tables.

A table maps each of 32768 quantised RGB colors to a probability
distribution over the 11 basic color terms.  On disk it is stored as
32768 x 11 little-endian float32 values, row-major, with row index
``R // 8 + 32 * (G // 8) + 1024 * (B // 8)`` for 8-bit R, G, B.  Any
published color-name table can be converted to this layout with
:func:`write_cn_table`.

When no table file is configured, :func:`default_cn_table` builds one from
prototype colors using a Gaussian kernel in CIELAB space.
"""

from functools import lru_cache
from pathlib import Path

import numpy as np
from skimage.color import rgb2lab

COLOR_NAMES = ("black", "blue", "brown", "grey", "green", "orange",
               "pink", "purple", "red", "white", "yellow")
N_COLORS = len(COLOR_NAMES)
N_BINS = 32 ** 3
TABLE_DTYPE = np.dtype("<f4")

_PROTOTYPES = {
    "black": (0, 0, 0),
    "blue": (30, 60, 200),
    "brown": (120, 70, 30),
    "grey": (128, 128, 128),
    "green": (40, 160, 40),
    "orange": (240, 140, 20),
    "pink": (240, 150, 190),
    "purple": (120, 40, 140),
    "red": (200, 20, 20),
    "white": (255, 255, 255),
    "yellow": (240, 230, 30),
}


class ColorTableError(ValueError):
    pass


def bin_centers():
    """8-bit RGB value at the center of every table bin, in row order."""
    idx = np.arange(N_BINS)
    r, g, b = idx % 32, (idx // 32) % 32, idx // 1024
    return np.stack([r, g, b], axis=1) * 8 + 4


def rgb_to_index(rgb):
    """Table row for float RGB values in [0, 1] (last axis = channel)."""
    q = np.clip(np.floor(np.asarray(rgb) * 255.0 + 0.5), 0, 255).astype(np.intp) // 8
    return q[..., 0] + 32 * q[..., 1] + 1024 * q[..., 2]


@lru_cache(maxsize=4)
def default_cn_table(bandwidth=25.0):
    """Soft assignment of each bin to the nearest prototype colors (CIELAB)."""
    centers = bin_centers().astype(np.float64) / 255.0
    lab = rgb2lab(centers[None])[0]
    protos = np.array([_PROTOTYPES[n] for n in COLOR_NAMES], dtype=np.float64) / 255.0
    proto_lab = rgb2lab(protos[None])[0]
    d2 = ((lab[:, None, :] - proto_lab[None, :, :]) ** 2).sum(axis=2)
    logits = -d2 / (2.0 * bandwidth ** 2)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    table = p.astype(TABLE_DTYPE).astype(np.float64)
    table.setflags(write=False)
    return table


def validate_cn_table(table):
    table = np.asarray(table, dtype=np.float64)
    if table.shape != (N_BINS, N_COLORS):
        raise ColorTableError(
            f"color-name table must have shape {(N_BINS, N_COLORS)}, got {table.shape}")
    if not np.all(np.isfinite(table)) or table.min() < 0:
        raise ColorTableError("color-name table has negative or non-finite entries")
    sums = table.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-3)
    if bad.size:
        raise ColorTableError(
            f"color-name table row {bad[0]} sums to {sums[bad[0]]:.6f}, expected 1")
    return table


def load_cn_table(path):
    path = Path(path)
    try:
        raw = np.fromfile(path, dtype=TABLE_DTYPE)
    except OSError as exc:
        raise ColorTableError(f"cannot read color-name table {path}: {exc}") from exc
    if raw.size != N_BINS * N_COLORS:
        raise ColorTableError(
            f"color-name table {path} holds {raw.size} values, "
            f"expected {N_BINS * N_COLORS}")
    table = validate_cn_table(raw.reshape(N_BINS, N_COLORS).astype(np.float64))
    table.setflags(write=False)
    return table


def write_cn_table(path, table):
    table = validate_cn_table(table)
    table.astype(TABLE_DTYPE).tofile(Path(path))


def resolve_cn_table(table):
    """Accept ``None`` (built-in), a path, or an array."""
    if table is None:
        return default_cn_table()
    if isinstance(table, (str, Path)):
        return load_cn_table(table)
    return validate_cn_table(table)
