"""Cell-grid appearance features: gray, 31-channel fHOG and color names.

All extractors return arrays of shape (rows, cols, channels) where the grid
is the patch size divided by the cell size.  :func:`fhog` also accepts a
leading batch axis.
"""

from functools import lru_cache

import numpy as np
from scipy.signal.windows import hann
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_float, check_cell_multiple, check_gray, check_same_grid
from .colornames import N_COLORS, resolve_cn_table, rgb_to_index
from .imgproc import to_gray

HOG_CLIP = 0.2
HOG_TEXTURE_WEIGHT = 0.2357
# below 8-bit quantisation of a 4x4 cell's gradient energy
HOG_EPS = 1e-6


def _pool_axis(values, axis, cell_size):
    """Bilinear pooling of pixels into cells along one axis.

    A pixel at in-cell offset ``k`` sits ``r = (k + 0.5) / cell - 0.5`` cells
    from its cell center: it gives ``1 - |r|`` to its own cell and ``|r|`` to
    the neighbor on that side.  Votes past the border are dropped.
    """
    values = np.moveaxis(values, axis, 0)
    n_cells = values.shape[0] // cell_size
    rest = values.shape[1:]
    blocks = values.reshape(n_cells, cell_size, -1)
    r = (np.arange(cell_size) + 0.5) / cell_size - 0.5
    # rows: share to previous cell, own cell, next cell
    taps = np.stack([np.maximum(-r, 0.0), 1.0 - np.abs(r), np.maximum(r, 0.0)])
    taps = taps.astype(values.dtype)
    prev, own, nxt = np.moveaxis(np.matmul(taps, blocks), 1, 0)
    own[:-1] += prev[1:]
    own[1:] += nxt[:-1]
    own = own.reshape((n_cells,) + rest)
    return np.moveaxis(own, 0, axis)


def _gradients(img):
    gx = np.empty_like(img)
    gy = np.empty_like(img)
    gx[..., :, 1:-1] = 0.5 * (img[..., :, 2:] - img[..., :, :-2])
    gx[..., :, 0] = img[..., :, 1] - img[..., :, 0]
    gx[..., :, -1] = img[..., :, -1] - img[..., :, -2]
    gy[..., 1:-1, :] = 0.5 * (img[..., 2:, :] - img[..., :-2, :])
    gy[..., 0, :] = img[..., 1, :] - img[..., 0, :]
    gy[..., -1, :] = img[..., -1, :] - img[..., -2, :]
    return gx, gy


def orientation_histogram(gray, cell_size=4, n_orients=9):
    """Contrast-sensitive gradient histogram with trilinear voting.

    Returns (..., rows, cols, 2 * n_orients).  Bin ``o`` is centered on the
    angle ``o * pi / n_orients``.
    """
    n_bins = 2 * n_orients
    gx, gy = _gradients(gray)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)
    pos = ang * (n_bins / (2.0 * np.pi))
    o0 = np.floor(pos)
    frac = pos - o0
    o0 = o0.astype(np.intp) % n_bins
    o1 = (o0 + 1) % n_bins
    # o0 != o1, so the two scatters never collide
    votes = np.zeros(gray.shape + (n_bins,), dtype=gray.dtype)
    np.put_along_axis(votes, o0[..., None], (mag * (1.0 - frac))[..., None], axis=-1)
    np.put_along_axis(votes, o1[..., None], (mag * frac)[..., None], axis=-1)
    return _pool_axis(_pool_axis(votes, -3, cell_size), -2, cell_size)


def _block_norms(energy):
    """Inverse norms of the four 2x2 cell blocks containing each cell.

    Order: up-left, up-right, down-left, down-right.
    """
    pad = [(0, 0)] * (energy.ndim - 2) + [(1, 1), (1, 1)]
    e = np.pad(energy, pad, mode="edge")
    blocks = e[..., :-1, :-1] + e[..., 1:, :-1] + e[..., :-1, 1:] + e[..., 1:, 1:]
    inv = 1.0 / np.sqrt(blocks + HOG_EPS)
    return np.stack([inv[..., :-1, :-1], inv[..., :-1, 1:],
                     inv[..., 1:, :-1], inv[..., 1:, 1:]], axis=-1)


def fhog(gray, cell_size=4, n_orients=9):
    """Felzenszwalb-style HOG: 2n contrast-sensitive, n insensitive and
    4 texture channels per cell (31 for ``n_orients=9``).

    ``gray`` is (H, W) or (N, H, W) with H, W multiples of ``cell_size``.
    """
    gray = check_gray(gray)
    check_cell_multiple(gray.shape[-2:], cell_size)
    hist = orientation_histogram(gray, cell_size, n_orients)
    insensitive = hist[..., :n_orients] + hist[..., n_orients:]
    norms = _block_norms((insensitive ** 2).sum(axis=-1))

    sens = np.minimum(hist[..., None] * norms[..., None, :], HOG_CLIP)
    ins = np.minimum(insensitive[..., None] * norms[..., None, :], HOG_CLIP)
    return np.concatenate([
        0.5 * sens.sum(axis=-1),
        0.5 * ins.sum(axis=-1),
        HOG_TEXTURE_WEIGHT * sens.sum(axis=-2),
    ], axis=-1)


def cell_mean(img, cell_size):
    """Average over non-overlapping ``cell_size`` blocks; trailing axes kept."""
    h, w = img.shape[:2]
    check_cell_multiple((h, w), cell_size)
    ny, nx = h // cell_size, w // cell_size
    blocks = img.reshape((ny, cell_size, nx, cell_size) + img.shape[2:])
    return blocks.mean(axis=(1, 3))


def extract_gray(patch, cell_size=4):
    """Per-cell mean gray level minus 0.5, shape (rows, cols, 1)."""
    return (cell_mean(to_gray(patch), cell_size) - 0.5)[..., None]


def extract_cn(patch, cn_table, cell_size=4):
    """Per-cell average of the color-name distributions, shape (rows, cols, 11)."""
    patch = as_float(patch)
    if patch.ndim != 3 or patch.shape[2] != 3:
        raise ValueError(f"expected a 3-channel patch, got shape {patch.shape}")
    names = np.asarray(cn_table)[rgb_to_index(patch)]
    return cell_mean(names.astype(patch.dtype, copy=False), cell_size)


def extract_fhog(patch, cell_size=4, n_orients=9):
    patch = as_float(patch)
    if patch.ndim == 3:
        patch = to_gray(patch)
    return fhog(patch, cell_size, n_orients)


@lru_cache(maxsize=16)
def cosine_window(rows, cols):
    win = np.outer(hann(rows), hann(cols))
    win.setflags(write=False)
    return win


def n_feature_channels(use_gray=True, use_hog=True, use_cn=True, n_orients=9):
    return int(use_gray) + int(use_hog) * (3 * n_orients + 4) + int(use_cn) * N_COLORS


def compose_features(patch, cell_size=4, use_gray=True, use_hog=True, use_cn=True,
                     cn_table=None, n_orients=9, window=True):
    """Stack gray, fHOG and color-name channels and taper with a Hann window."""
    if not (use_gray or use_hog or use_cn):
        raise ValueError("at least one feature type must be enabled")
    parts = []
    if use_gray:
        parts.append(extract_gray(patch, cell_size))
    if use_hog:
        parts.append(extract_fhog(patch, cell_size, n_orients))
    if use_cn:
        table = cn_table if isinstance(cn_table, np.ndarray) else resolve_cn_table(cn_table)
        parts.append(extract_cn(patch, table, cell_size))
    for p in parts[1:]:
        check_same_grid(parts[0], p, "feature channels")
    feats = np.concatenate(parts, axis=-1)
    if window:
        feats *= cosine_window(*feats.shape[:2])[..., None]
    return feats


def mask_to_cells(mask, cell_size=4):
    """Fraction of target pixels in each cell."""
    return cell_mean(np.asarray(mask, dtype=np.float64), cell_size)


def apply_mask(features, cell_mask):
    """Multiply every channel by the cell mask."""
    features = np.asarray(features)
    cell_mask = np.asarray(cell_mask, dtype=features.dtype)
    if features.shape[:2] != cell_mask.shape:
        raise ValueError(
            f"cell mask {cell_mask.shape} does not match feature grid {features.shape[:2]}")
    return features * cell_mask[..., None]


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Patch -> windowed (rows, cols, D) feature map.

    Parameters
    ----------
    cell_size : int
    use_gray, use_hog, use_cn : bool
        Channel groups to stack (1, 31 and 11 channels).
    cn_table : None, path or array
        Color-name table; ``None`` selects the built-in table.
    hog_orientations : int
    window : bool
        Apply the 2-D Hann window.
    """

    def __init__(self, cell_size=4, use_gray=True, use_hog=True, use_cn=True,
                 cn_table=None, hog_orientations=9, window=True):
        self.cell_size = cell_size
        self.use_gray = use_gray
        self.use_hog = use_hog
        self.use_cn = use_cn
        self.cn_table = cn_table
        self.hog_orientations = hog_orientations
        self.window = window

    def fit(self, X=None, y=None):
        self.cn_table_ = resolve_cn_table(self.cn_table) if self.use_cn else None
        self.n_channels_ = n_feature_channels(
            self.use_gray, self.use_hog, self.use_cn, self.hog_orientations)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_channels_")
        return compose_features(
            X, self.cell_size, self.use_gray, self.use_hog, self.use_cn,
            self.cn_table_, self.hog_orientations, self.window)
