"""Dual correlation-filter training by ADMM.

Two filters are learned on the same Gaussian label: a context filter on the
full feature map and a target filter on the mask-suppressed map.  Both are
confined to a centered support (the target-sized crop) and tied together by
a quadratic coupling term.  For one filter with the other held fixed the
objective is::

    1/2 ||sum_c v_c * x_c - y||^2 + lambda1/2 ||w||^2 + mu/2 ||w - w_other||^2
    subject to v = w (w zero outside the support)

where ``*`` is circular correlation.  ADMM alternates a closed-form spatial
update of ``w``, a per-frequency rank-one solve for ``v`` and a multiplier
ascent step with an increasing penalty ``gamma``.  In spatial units the
penalty acts as ``gamma * T``; see :func:`solve_w_subproblem`.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_float
from .spectral import correlation_response, fft2, half_spectrum_weights, irfft2, rfft2


def make_label(grid_shape, target_cells, bandwidth_factor=1.0 / 16):
    """Gaussian regression target peaking at index (0, 0), periodic.

    ``sigma = bandwidth_factor * sqrt(target_rows * target_cols)``.
    """
    rows, cols = (int(v) for v in grid_shape)
    if rows <= 0 or cols <= 0:
        raise ValueError(f"grid must be non-empty, got {grid_shape}")
    tr, tc = target_cells
    sigma = bandwidth_factor * np.sqrt(tr * tc)
    if not sigma > 0:
        raise ValueError("label bandwidth must be positive")
    dr = np.minimum(np.arange(rows), rows - np.arange(rows))
    dc = np.minimum(np.arange(cols), cols - np.arange(cols))
    d2 = dr[:, None] ** 2 + dc[None, :] ** 2
    return np.exp(-0.5 * d2 / sigma ** 2)


def label_sigma(target_cells, bandwidth_factor=1.0 / 16):
    return bandwidth_factor * np.sqrt(target_cells[0] * target_cells[1])


def support_mask(grid_shape, support_shape):
    """Boolean (rows, cols) map of the centered filter support."""
    rows, cols = grid_shape
    sr = int(min(max(support_shape[0], 1), rows))
    sc = int(min(max(support_shape[1], 1), cols))
    r0 = (rows - sr) // 2
    c0 = (cols - sc) // 2
    mask = np.zeros((rows, cols), dtype=bool)
    mask[r0:r0 + sr, c0:c0 + sc] = True
    return mask


def update_model(model, new, rate):
    """Linear interpolation ``(1 - rate) * model + rate * new``; ``None`` model initialises."""
    new = np.asarray(new)
    if model is None:
        return new.copy()
    if model.shape != new.shape:
        raise ValueError(f"model shape {model.shape} != feature shape {new.shape}")
    return (1.0 - rate) * model + rate * new


def solve_w_subproblem(w_other, theta, v, gamma, support, lambda1=0.01, mu=200.0):
    """Closed-form filter update, then projection onto the support.

    ``(mu w_other + T theta + gamma T v) / (lambda1 + mu + gamma T)`` with
    ``theta`` and ``v`` in spatial units.
    """
    T = theta.shape[0] * theta.shape[1]
    w = (mu * w_other + T * theta + gamma * T * v) / (lambda1 + mu + gamma * T)
    w[~support] = 0.0
    return w


def solve_v_subproblem(xf, yf, thetaf, wf, gamma, T=None, sx=None):
    """Per-bin solution of ``(x x^H + T gamma I) v = y x - T theta + gamma T w``.

    Uses the Sherman-Morrison identity for the rank-one system, so each
    frequency bin costs O(D).  ``T`` defaults to the number of bins, pass
    it explicitly when working on half spectra.  ``sx`` is the optional
    precomputed per-bin energy ``sum_c |x_c|^2``.
    """
    if T is None:
        T = xf.shape[0] * xf.shape[1]
    gT = gamma * T
    if sx is None:
        sx = _bin_energy(xf)
    # with rhs = gamma T w - T theta the system is (x x^H + gT) v = y x + rhs,
    # whose inverse reduces to rhs / gT + x (y - x^H rhs / gT) / (x^H x + gT)
    rhs = gT * wf - T * thetaf
    proj = np.sum(np.conj(xf) * rhs, axis=2)
    return rhs / gT + xf * ((yf - proj / gT) / (sx + gT))[..., None]


def _bin_energy(xf):
    return np.sum(xf.real ** 2 + xf.imag ** 2, axis=2)


def update_multiplier(thetaf, vf, wf, gamma, beta=10.0, gamma_max=1e4):
    """Dual ascent ``theta + gamma (v - w)`` and penalty growth ``min(beta gamma, gamma_max)``."""
    return thetaf + gamma * (vf - wf), min(beta * gamma, gamma_max)


@dataclass
class AdmmState:
    """Auxiliary variable and multiplier plus penalty for one filter.

    ``vf`` and ``thetaf`` are half spectra (see :func:`darktrack.spectral.rfft2`);
    all filters and features are real, so the other half is redundant.
    """

    vf: np.ndarray
    thetaf: np.ndarray
    gamma: float
    iteration: int = 0
    residuals: list = field(default_factory=list)
    wf: np.ndarray = None

    @classmethod
    def start(cls, w, gamma0):
        wf = rfft2(w)
        return cls(vf=wf, thetaf=np.zeros_like(wf), gamma=float(gamma0))


@dataclass
class SolverParams:
    lambda1: float = 0.01
    mu: float = 200.0
    gamma0: float = 1.0
    gamma_max: float = 1e4
    beta: float = 10.0
    admm_iters: int = 3


def admm_step(w_other, state, xf, yf, support, params, sx=None):
    """One w / v / multiplier round; updates ``state`` in place, returns the new filter.

    Spectra are half spectra.  The w-step is :func:`solve_w_subproblem` with
    ``T theta + gamma T v`` brought back to the spatial domain in a single
    inverse transform.
    """
    shape = support.shape
    T = shape[0] * shape[1]
    gamma = state.gamma
    drive = irfft2(state.thetaf + gamma * state.vf, shape)
    w = (params.mu * w_other + T * drive) / (params.lambda1 + params.mu + gamma * T)
    w[~support] = 0.0
    wf = rfft2(w)
    vf = solve_v_subproblem(xf, yf, state.thetaf, wf, gamma, T, sx)
    thetaf, state.gamma = update_multiplier(state.thetaf, vf, wf, gamma,
                                            params.beta, params.gamma_max)
    gap = vf - wf
    gap = gap.real ** 2 + gap.imag ** 2
    weights = half_spectrum_weights(shape[1])
    state.residuals.append(float(np.sqrt(np.sum(gap * weights[None, :, None]) / T ** 2)))
    state.vf, state.thetaf, state.wf = vf, thetaf, wf
    state.iteration += 1
    return w


@dataclass
class DualFilter:
    w_g: np.ndarray
    w_o: np.ndarray
    state_g: AdmmState = None
    state_o: AdmmState = None

    @property
    def spectra(self):
        """Half spectra of the two filters, as used by :func:`fused_response_spectral`."""
        return tuple(rfft2(w) if st is None or st.wf is None else st.wf
                     for w, st in ((self.w_g, self.state_g), (self.w_o, self.state_o)))


def _label_spectrum(y):
    # the correlation data term pairs conj(v) with x, so the normal
    # equations carry conj(Y); a symmetric label makes this a no-op
    return np.conj(rfft2(y))


def train_dual(x_g, x_o, y, support, params=None, init=None, schedule="sequential"):
    """Alternate ADMM rounds between the context and target filters.

    Each round runs one ADMM step for ``w_g`` against ``x_g`` with ``w_o``
    fixed, then one for ``w_o`` against ``x_o`` with ``w_g`` fixed.  With
    ``schedule="sequential"`` the second step already sees the updated
    ``w_g``; ``"simultaneous"`` gives both steps the partner from the start
    of the round, so identical inputs yield identical filters.  ``init`` is
    an optional ``(w_g, w_o)`` warm start; multipliers and penalties restart
    on every call.
    """
    if schedule not in ("sequential", "simultaneous"):
        raise ValueError(f"unknown schedule {schedule!r}")
    params = params or SolverParams()
    x_g = as_float(x_g)
    x_o = np.asarray(x_o, dtype=x_g.dtype)
    if x_g.shape != x_o.shape:
        raise ValueError(f"feature shapes differ: {x_g.shape} vs {x_o.shape}")
    if y.shape != x_g.shape[:2] or support.shape != y.shape:
        raise ValueError("label, support and feature grids must match")
    if init is None:
        w_g = np.zeros_like(x_g)
        w_o = np.zeros_like(x_o)
    else:
        w_g, w_o = (np.where(support[..., None], w, 0.0).astype(x_g.dtype, copy=False)
                    for w in init)
    xf_g, xf_o = rfft2(x_g), rfft2(x_o)
    yf = _label_spectrum(y).astype(xf_g.dtype)
    state_g = AdmmState.start(w_g, params.gamma0)
    state_o = AdmmState.start(w_o, params.gamma0)
    sx_g, sx_o = _bin_energy(xf_g), _bin_energy(xf_o)
    for _ in range(params.admm_iters):
        prev_g = w_g
        w_g = admm_step(w_o, state_g, xf_g, yf, support, params, sx_g)
        partner = w_g if schedule == "sequential" else prev_g
        w_o = admm_step(partner, state_o, xf_o, yf, support, params, sx_o)
    return DualFilter(w_g, w_o, state_g, state_o)


def train_single(x, y, support, params=None, init=None):
    """Single background-aware filter (no partner, no coupling)."""
    params = params or SolverParams()
    solo = SolverParams(params.lambda1, 0.0, params.gamma0, params.gamma_max,
                        params.beta, params.admm_iters)
    x = as_float(x)
    w = np.zeros_like(x) if init is None else np.where(support[..., None], init, 0.0)
    w = w.astype(x.dtype, copy=False)
    xf = rfft2(x)
    yf = _label_spectrum(y).astype(xf.dtype)
    state = AdmmState.start(w, solo.gamma0)
    zero = np.zeros_like(x)
    sx = _bin_energy(xf)
    for _ in range(solo.admm_iters):
        w = admm_step(zero, state, xf, yf, support, solo, sx)
    return w, state


def regression_loss(w, x, y):
    """``1/2 ||sum_c w_c * x_c - y||^2``."""
    r = correlation_response(fft2(w), fft2(x)) - y
    return 0.5 * float(np.sum(r ** 2))


def dual_objective(w_g, w_o, x_g, x_o, y, lambda1=0.01, mu=200.0):
    """Joint objective of the two filters (data, ridge and coupling terms)."""
    total = 0.0
    for w, x in ((w_g, x_g), (w_o, x_o)):
        total += regression_loss(w, x, y) + 0.5 * lambda1 * float(np.sum(w ** 2))
    return total + 0.5 * mu * float(np.sum((w_g - w_o) ** 2))


def fused_response(w_g, w_o, z_g, z_o, psi=0.02):
    """Context response plus ``psi`` times the target-filter response."""
    if w_g.shape != z_g.shape or w_o.shape != z_o.shape:
        raise ValueError("filter and feature shapes must match")
    return fused_response_spectral(rfft2(w_g), rfft2(w_o) if psi else None,
                                   rfft2(z_g), rfft2(z_o) if psi else None, psi,
                                   z_g.shape[:2])


def fused_response_spectral(wf_g, wf_o, zf_g, zf_o, psi, shape):
    """:func:`fused_response` on precomputed half spectra; ``shape`` is the grid."""
    spec = np.sum(np.conj(wf_g) * zf_g, axis=2)
    if psi:
        spec = spec + psi * np.sum(np.conj(wf_o) * zf_o, axis=2)
    return irfft2(spec, shape)


class DualCorrelationFilter(BaseEstimator):
    """Estimator wrapper around :func:`train_dual`.

    ``fit(X, y, X_target=..., support=...)`` learns the context filter
    ``coef_`` on ``X`` and the target filter ``coef_target_`` on
    ``X_target``; ``response`` evaluates the fused correlation map on new
    feature maps.  With ``warm_start=True`` a second ``fit`` starts from
    the previous filters.  With ``dual=False`` only the context filter is
    trained and ``coef_target_`` mirrors it.
    """

    def __init__(self, lambda1=0.01, mu=200.0, gamma0=1.0, gamma_max=1e4,
                 beta=10.0, admm_iters=3, psi=0.02, dual=True, schedule="sequential",
                 warm_start=False):
        self.lambda1 = lambda1
        self.mu = mu
        self.gamma0 = gamma0
        self.gamma_max = gamma_max
        self.beta = beta
        self.admm_iters = admm_iters
        self.psi = psi
        self.dual = dual
        self.schedule = schedule
        self.warm_start = warm_start

    def _params(self):
        return SolverParams(self.lambda1, self.mu, self.gamma0, self.gamma_max,
                            self.beta, int(self.admm_iters))

    def fit(self, X, y, X_target=None, support=None):
        X = as_float(X)
        if X.ndim != 3:
            raise ValueError(f"features must be (rows, cols, D), got {X.shape}")
        y = np.asarray(y, dtype=X.dtype)
        if support is None:
            support = np.ones(X.shape[:2], dtype=bool)
        warm = self.warm_start and getattr(self, "coef_", None) is not None
        if warm and self.coef_.shape != X.shape:
            warm = False
        if self.dual:
            X_target = X if X_target is None else np.asarray(X_target, dtype=X.dtype)
            init = (self.coef_, self.coef_target_) if warm else None
            result = train_dual(X, X_target, y, support, self._params(), init,
                                self.schedule)
            self.coef_, self.coef_target_ = result.w_g, result.w_o
            self.residuals_ = result.state_g.residuals
            self.spectra_ = result.spectra
        else:
            init = self.coef_ if warm else None
            w, state = train_single(X, y, support, self._params(), init)
            self.coef_ = self.coef_target_ = w
            self.residuals_ = state.residuals
            wf = rfft2(w) if state.wf is None else state.wf
            self.spectra_ = (wf, wf)
        self.support_ = support
        return self

    def response(self, Z, Z_target=None):
        check_is_fitted(self, "coef_")
        Z = np.asarray(Z, dtype=self.coef_.dtype)
        if Z.shape != self.coef_.shape:
            raise ValueError(f"feature shape {Z.shape} != filter shape {self.coef_.shape}")
        wf_g, wf_o = self.spectra_
        if not self.dual or not self.psi:
            return fused_response_spectral(wf_g, None, rfft2(Z), None, 0.0, Z.shape[:2])
        Z_target = Z if Z_target is None else np.asarray(Z_target, dtype=Z.dtype)
        return fused_response_spectral(wf_g, wf_o, rfft2(Z), rfft2(Z_target), self.psi,
                                       Z.shape[:2])
