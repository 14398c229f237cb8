"""Per-frame tracking loop.

:class:`DarkTracker` wires the pieces together: each frame the search
region around the last estimate is enhanced, described by features,
correlated with the context and target filters, and the fused response
peak gives the new position.  A scale filter then refines the size, and the
filters are retrained on a freshly enhanced and masked sample.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import scale as scale_mod
from ._validation import DarkPatchError, check_image
from .colornames import resolve_cn_table
from .enhance import build_mask, enhance_patch, pretreat
from .features import apply_mask, compose_features, mask_to_cells
from .filter import DualCorrelationFilter, make_label, support_mask, update_model
from .imgproc import LUMA_WEIGHTS, BBox, PatchSpec, crop_patch

# ablation ladder from the plain baseline up to the full tracker: parameter
# overrides on top of the defaults (e: enhanced single filter, ew: dual
# filters without coupling)
VARIANTS = {
    "full": {},
    "ew": {"mu": 0.0},
    "e": {"dual": False},
    "bacf_e": {"dual": False, "use_gray": False, "use_cn": False},
    "bacf": {"dual": False, "use_gray": False, "use_cn": False, "enhance": False},
}

# single-component switches; no-enhance is the plain baseline row of the ladder
ABLATIONS = {
    "no-enhance": dict(VARIANTS["bacf"]),
    "no-mask": {"use_mask": False},
    "no-constraint": {"mu": 0.0},
    "no-fusion": {"psi": 0.0},
}


class Peak(NamedTuple):
    dx: float
    dy: float
    flat: bool


_OFFSETS = np.array([(r, c) for r in (-1, 0, 1) for c in (-1, 0, 1)], dtype=np.float64)
# least-squares fit of a + b c + d r + e c^2 + f c r + g r^2 on the 3x3 stencil
_QUAD_PINV = np.linalg.pinv(np.column_stack([
    np.ones(9), _OFFSETS[:, 1], _OFFSETS[:, 0],
    _OFFSETS[:, 1] ** 2, _OFFSETS[:, 1] * _OFFSETS[:, 0], _OFFSETS[:, 0] ** 2]))


def _wrap(idx, n):
    return ((idx + n // 2) % n) - n // 2


def _subcell_offset(patch):
    """Vertex of a quadratic fitted to a 3x3 neighborhood, as (row, col)."""
    _, b, d, e, f, g = _QUAD_PINV @ patch.ravel()
    hess = np.array([[2 * g, f], [f, 2 * e]])
    if np.linalg.det(hess) > 0 and hess[0, 0] < 0:
        dr, dc = np.linalg.solve(hess, [-d, -b])
        if abs(dr) <= 1 and abs(dc) <= 1:
            return dr, dc
    # fall back to independent parabolas along each axis
    out = []
    for lo, mid, hi in ((patch[0, 1], patch[1, 1], patch[2, 1]),
                        (patch[1, 0], patch[1, 1], patch[1, 2])):
        curv = lo - 2 * mid + hi
        out.append(float(np.clip(0.5 * (lo - hi) / curv, -0.5, 0.5)) if curv < 0 else 0.0)
    return tuple(out)


def locate_peak(response, cell_size=4, scale=1.0, subcell=True):
    """Displacement (pixels) of the response maximum from the origin.

    Indices beyond half the grid wrap to negative shifts.  A constant
    response yields ``Peak(0, 0, flat=True)``.
    """
    response = np.asarray(response, dtype=np.float64)
    if response.size == 0:
        raise ValueError("empty response map")
    top = float(response.max())
    if top - float(response.min()) <= 1e-12 * max(1.0, abs(top)):
        return Peak(0.0, 0.0, True)
    rows, cols = response.shape
    r, c = np.unravel_index(int(np.argmax(response)), response.shape)
    dr, dc = float(_wrap(r, rows)), float(_wrap(c, cols))
    if subcell and rows >= 3 and cols >= 3:
        ri = (r + np.arange(-1, 2)) % rows
        ci = (c + np.arange(-1, 2)) % cols
        off_r, off_c = _subcell_offset(response[np.ix_(ri, ci)])
        dr += off_r
        dc += off_c
    step = cell_size * scale
    return Peak(dc * step, dr * step, False)


@dataclass
class TrackerState:
    """Mutable per-sequence state."""

    center: np.ndarray
    scale: float
    feature_model: np.ndarray
    target_model: np.ndarray
    cell_mask: np.ndarray
    scale_model: scale_mod.ScaleModel
    frame_index: int = 0
    flat: bool = False


class DarkTracker(BaseEstimator):
    """Low-light correlation-filter tracker with dual (context + target) filters.

    ``fit(frame, bbox)`` initialises on the first frame; ``update(frame)``
    returns the box for each following frame.  All hyperparameters are
    constructor arguments, so ``get_params`` / ``set_params`` and
    ``sklearn.base.clone`` work as usual.

    Parameters
    ----------
    alpha, delta : enhancer channel weights and log offset.
    enhance : bool
        Run the low-light enhancer on every patch.
    use_mask : bool
        Build the illumination-change target mask (otherwise all ones).
    dual : bool
        Train the target filter next to the context filter.
    cell_size, use_gray, use_hog, use_cn, cn_table, hog_orientations :
        Feature settings, see :class:`darktrack.features.FeatureExtractor`.
    lambda1, mu, gamma0, gamma_max, beta, admm_iters, schedule :
        Filter solver settings, see :func:`darktrack.filter.train_dual`.
    learning_rate : float
        Feature model interpolation rate.
    output_sigma_factor : float
        Label bandwidth relative to the target size in cells.
    psi : float
        Weight of the target-filter response in detection.
    padding : float
        Search region is ``(1 + padding)`` times the target extent.
    template_size : int
        Side of the square search patch in pixels after resampling.
    detect_mask : {"previous", "ones"}
        Mask applied to detection features for the target filter.
    n_scales, scale_step, scale_lr, lambda2, scale_sigma_factor,
    scale_model_max_area : scale filter settings.
    subcell : bool
        Refine the response peak with a quadratic fit.
    dtype : {"float32", "float64"}
        Working precision of patches, features and filters.
    """

    def __init__(self, alpha=LUMA_WEIGHTS, delta=1e-4, enhance=True, use_mask=True,
                 dual=True, cell_size=4, use_gray=True, use_hog=True, use_cn=True,
                 cn_table=None, hog_orientations=9, lambda1=0.01, mu=200.0, gamma0=1.0,
                 gamma_max=1e4, beta=10.0, admm_iters=3, schedule="sequential",
                 learning_rate=0.02, output_sigma_factor=1.0 / 16, psi=0.02,
                 padding=4.0, template_size=200, detect_mask="previous", n_scales=33,
                 scale_step=1.02, scale_lr=0.025, lambda2=0.01, scale_sigma_factor=0.25,
                 scale_model_max_area=512, subcell=True, dtype="float32"):
        self.alpha = alpha
        self.delta = delta
        self.enhance = enhance
        self.use_mask = use_mask
        self.dual = dual
        self.cell_size = cell_size
        self.use_gray = use_gray
        self.use_hog = use_hog
        self.use_cn = use_cn
        self.cn_table = cn_table
        self.hog_orientations = hog_orientations
        self.lambda1 = lambda1
        self.mu = mu
        self.gamma0 = gamma0
        self.gamma_max = gamma_max
        self.beta = beta
        self.admm_iters = admm_iters
        self.schedule = schedule
        self.learning_rate = learning_rate
        self.output_sigma_factor = output_sigma_factor
        self.psi = psi
        self.padding = padding
        self.template_size = template_size
        self.detect_mask = detect_mask
        self.n_scales = n_scales
        self.scale_step = scale_step
        self.scale_lr = scale_lr
        self.lambda2 = lambda2
        self.scale_sigma_factor = scale_sigma_factor
        self.scale_model_max_area = scale_model_max_area
        self.subcell = subcell
        self.dtype = dtype

    @classmethod
    def from_variant(cls, variant="full", **params):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}")
        return cls(**{**VARIANTS[variant], **params})

    # -- geometry -----------------------------------------------------------

    def _frame(self, X):
        if np.dtype(self.dtype) not in (np.float32, np.float64):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")
        return check_image(X, name="frame").astype(self.dtype, copy=False)

    def _setup(self, frame, bbox):
        if self.detect_mask not in ("previous", "ones"):
            raise ValueError(f"detect_mask must be 'previous' or 'ones', got {self.detect_mask!r}")
        if self.scale_step <= 1:
            raise ValueError("scale_step must exceed 1")
        cs = int(self.cell_size)
        self.cn_table_ = resolve_cn_table(self.cn_table) if self.use_cn else None
        w, h = float(bbox.w), float(bbox.h)
        self.base_target_size_ = np.array([w, h])
        side = np.sqrt(w * h) * (1.0 + self.padding)
        self.region_size_ = np.array([side, side])
        tpl = max(int(round(self.template_size / cs)), 3) * cs
        self.template_shape_ = (tpl, tpl)
        self.grid_shape_ = (tpl // cs, tpl // cs)
        # patch pixels per source pixel at scale 1
        self.zoom_ = tpl / side
        tw, th = w * self.zoom_, h * self.zoom_
        target_cells = (max(int(np.floor(th / cs)), 1), max(int(np.floor(tw / cs)), 1))
        self.target_cells_ = target_cells
        self.support_ = support_mask(self.grid_shape_, target_cells)
        self.label_ = make_label(self.grid_shape_, target_cells, self.output_sigma_factor)
        self.target_box_ = BBox(tpl / 2.0, tpl / 2.0, min(tw, tpl), min(th, tpl))
        frame_wh = np.array([frame.shape[1], frame.shape[0]], dtype=np.float64)
        step = self.scale_step
        self.min_scale_ = step ** np.ceil(np.log(np.max(5.0 / self.region_size_)) / np.log(step))
        self.max_scale_ = step ** np.floor(
            np.log(np.min(frame_wh / self.base_target_size_)) / np.log(step))
        self.max_scale_ = max(self.max_scale_, 1.0)

    def _filter(self):
        return DualCorrelationFilter(
            lambda1=self.lambda1, mu=self.mu, gamma0=self.gamma0,
            gamma_max=self.gamma_max, beta=self.beta, admm_iters=self.admm_iters,
            psi=self.psi, dual=self.dual, schedule=self.schedule, warm_start=True)

    # -- per-patch processing ----------------------------------------------

    def _crop(self, frame, center, scale):
        extent = tuple(self.region_size_ * scale)
        spec = PatchSpec(center=tuple(center), extent=extent,
                         output=(self.template_shape_[1], self.template_shape_[0]))
        return crop_patch(frame, spec)

    def _pretreat(self, patch, want_mask):
        """Enhanced patch and cell mask (None when no mask can be formed)."""
        if not self.enhance:
            return patch, None
        try:
            if want_mask:
                enhanced, theta = pretreat(patch, self.alpha, self.delta)
            else:
                return enhance_patch(patch, self.alpha, self.delta), None
        except DarkPatchError:
            return patch, None
        mask = build_mask(theta, self.target_box_)
        self.last_mask_ = mask
        return enhanced, mask_to_cells(mask, self.cell_size)

    def _features(self, patch):
        return compose_features(patch, self.cell_size, self.use_gray, self.use_hog,
                                self.use_cn, self.cn_table_, self.hog_orientations)

    def _scale_preprocess(self, patch):
        if not self.enhance:
            return patch
        try:
            return enhance_patch(patch, self.alpha, self.delta)
        except DarkPatchError:
            return patch

    def _training_sample(self, frame, center, scale, prev_mask):
        want_mask = self.dual and self.use_mask
        patch, cell_mask = self._pretreat(self._crop(frame, center, scale), want_mask)
        if cell_mask is None:
            cell_mask = prev_mask if (want_mask and prev_mask is not None) \
                else np.ones(self.grid_shape_)
        x_g = self._features(patch)
        x_o = apply_mask(x_g, cell_mask) if self.dual else None
        return x_g, x_o, cell_mask

    # -- public API ------------------------------------------------------------

    def fit(self, X, y):
        """Initialise on frame ``X`` with ground-truth box ``y`` (:class:`BBox`)."""
        frame = self._frame(X)
        bbox = y if isinstance(y, BBox) else BBox(*y)
        self._setup(frame, bbox)
        center = np.array([bbox.cx, bbox.cy], dtype=np.float64)
        self.last_mask_ = None
        x_g, x_o, cell_mask = self._training_sample(frame, center, 1.0, None)

        self.filter_ = self._filter()
        self.filter_.fit(x_g, self.label_, X_target=x_o, support=self.support_)

        smodel = scale_mod.make_scale_model(
            self.n_scales, self.scale_step, tuple(self.base_target_size_),
            self.scale_sigma_factor, self.scale_model_max_area, self.cell_size)
        if self.n_scales > 1:
            samples = scale_mod.scale_samples(
                frame, tuple(center), self.base_target_size_, smodel.factors,
                smodel.model_size, self._scale_preprocess, self.cell_size)
            scale_mod.update_scale_model(smodel, samples, 1.0)
        self.state_ = TrackerState(center=center, scale=1.0, feature_model=x_g,
                                   target_model=x_o, cell_mask=cell_mask,
                                   scale_model=smodel)
        self.last_response_ = None
        return self

    @property
    def bbox_(self):
        check_is_fitted(self, "state_")
        w, h = self.base_target_size_ * self.state_.scale
        return BBox(float(self.state_.center[0]), float(self.state_.center[1]), w, h)

    def response(self, X):
        """Fused response map for frame ``X`` at the current estimate (no update)."""
        check_is_fitted(self, "state_")
        frame = self._frame(X)
        return self._detect(frame)

    def _detect(self, frame):
        st = self.state_
        patch, _ = self._pretreat(self._crop(frame, st.center, st.scale), want_mask=False)
        z_g = self._features(patch)
        if not self.dual:
            return self.filter_.response(z_g)
        cell_mask = st.cell_mask if self.detect_mask == "previous" else np.ones(self.grid_shape_)
        return self.filter_.response(z_g, apply_mask(z_g, cell_mask))

    def update(self, X):
        """Track into frame ``X``; returns the new :class:`BBox`.

        Never raises on target loss: a flat response keeps the previous
        position and sets ``state_.flat``.
        """
        check_is_fitted(self, "state_")
        frame = self._frame(X)
        st = self.state_

        response = self._detect(frame)
        self.last_response_ = response
        px = self.region_size_[0] * st.scale / self.template_shape_[0]
        peak = locate_peak(response, self.cell_size, px, self.subcell)
        st.flat = peak.flat
        frame_wh = np.array([frame.shape[1], frame.shape[0]], dtype=np.float64)
        center = np.clip(st.center + np.array([peak.dx, peak.dy]), 0.0, frame_wh)

        if self.n_scales > 1:
            target = self.base_target_size_ * st.scale
            samples = scale_mod.scale_samples(
                frame, tuple(center), target, st.scale_model.factors,
                st.scale_model.model_size, self._scale_preprocess, self.cell_size)
            best = scale_mod.best_scale_index(st.scale_model, samples, self.lambda2)
            st.scale = float(np.clip(st.scale * st.scale_model.factors[best],
                                     self.min_scale_, self.max_scale_))
        st.center = center

        x_g, x_o, cell_mask = self._training_sample(frame, center, st.scale, st.cell_mask)
        st.cell_mask = cell_mask
        st.feature_model = update_model(st.feature_model, x_g, self.learning_rate)
        if self.dual:
            st.target_model = update_model(st.target_model, x_o, self.learning_rate)
        self.filter_.fit(st.feature_model, self.label_, X_target=st.target_model,
                         support=self.support_)

        if self.n_scales > 1:
            samples = scale_mod.scale_samples(
                frame, tuple(center), self.base_target_size_ * st.scale,
                st.scale_model.factors, st.scale_model.model_size,
                self._scale_preprocess, self.cell_size)
            scale_mod.update_scale_model(st.scale_model, samples, self.scale_lr)
        st.frame_index += 1
        return self.bbox_

    def track(self, frames, init_bbox):
        """Yield one box per frame, the first being ``init_bbox``."""
        frames = iter(frames)
        self.fit(next(frames), init_bbox)
        yield self.bbox_
        for frame in frames:
            yield self.update(frame)
