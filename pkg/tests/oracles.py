"""Slow reference implementations used as test oracles.

Each one is written from the defining formula with plain loops or dense
linear algebra and shares no code with the package paths it checks.
"""

import math

import numpy as np


def brute_correlate(w, x):
    """r[t] = sum_n w[n] x[n + t] over a periodic 2-D grid (single channel)."""
    rows, cols = w.shape
    r = np.zeros((rows, cols))
    for tr in range(rows):
        for tc in range(cols):
            acc = 0.0
            for nr in range(rows):
                for nc in range(cols):
                    acc += w[nr, nc] * x[(nr + tr) % rows, (nc + tc) % cols]
            r[tr, tc] = acc
    return r


def dense_v_solve(xf, yf, thetaf, wf, gamma):
    """Solve (x x^H + T gamma I) v = y x - T theta + gamma T w bin by bin."""
    rows, cols, d = xf.shape
    T = rows * cols
    out = np.empty_like(xf, dtype=np.complex128)
    for i in range(rows):
        for j in range(cols):
            x = xf[i, j]
            A = np.outer(x, x.conj()) + gamma * T * np.eye(d)
            b = yf[i, j] * x - T * thetaf[i, j] + gamma * T * wf[i, j]
            out[i, j] = np.linalg.solve(A, b)
    return out


def reference_single_filter(x, y, support, lambda1, gamma0, beta, gamma_max, iters):
    """Single-filter ADMM on full complex spectra with dense per-bin solves."""
    rows, cols, d = x.shape
    T = rows * cols
    xf = np.fft.fft2(x, axes=(0, 1))
    yf = np.conj(np.fft.fft2(y))
    w = np.zeros_like(x)
    vf = np.fft.fft2(w, axes=(0, 1))
    thetaf = np.zeros_like(vf)
    gamma = gamma0
    for _ in range(iters):
        theta = np.fft.ifft2(thetaf, axes=(0, 1)).real
        v = np.fft.ifft2(vf, axes=(0, 1)).real
        w = (T * theta + gamma * T * v) / (lambda1 + gamma * T)
        w = w * support[..., None]
        wf = np.fft.fft2(w, axes=(0, 1))
        vf = dense_v_solve(xf, yf, thetaf, wf, gamma)
        thetaf = thetaf + gamma * (vf - wf)
        gamma = min(beta * gamma, gamma_max)
    return w


def correlation_matrix(x, support):
    """Dense operator A with (A w)[t] = sum_{n,c} w_c[n] x_c[n + t], w on the support."""
    rows, cols, d = x.shape
    cells = [(r, c) for r in range(rows) for c in range(cols) if support[r, c]]
    A = np.zeros((rows * cols, len(cells) * d))
    for t in range(rows * cols):
        tr, tc = divmod(t, cols)
        for k, (nr, nc) in enumerate(cells):
            A[t, k * d:(k + 1) * d] = x[(nr + tr) % rows, (nc + tc) % cols]
    return A, cells


def exact_single_filter(x, y, support, lambda1):
    """Minimiser of 1/2 ||A w - y||^2 + lambda1/2 ||w||^2 over supported filters."""
    A, cells = correlation_matrix(x, support)
    coef = np.linalg.solve(A.T @ A + lambda1 * np.eye(A.shape[1]), A.T @ y.ravel())
    w = np.zeros_like(x)
    for k, (r, c) in enumerate(cells):
        w[r, c] = coef[k * x.shape[2]:(k + 1) * x.shape[2]]
    return w


def naive_fhog(gray, cell=4, n_orients=9, eps=1e-6, clip=0.2, texture=0.2357):
    """Per-pixel loop version of the 31-channel HOG."""
    h, w = gray.shape
    ny, nx = h // cell, w // cell
    n_bins = 2 * n_orients
    hist = np.zeros((ny, nx, n_bins))
    for i in range(h):
        for j in range(w):
            if 0 < j < w - 1:
                gx = (gray[i, j + 1] - gray[i, j - 1]) / 2.0
            else:
                gx = gray[i, min(j + 1, w - 1)] - gray[i, max(j - 1, 0)]
            if 0 < i < h - 1:
                gy = (gray[i + 1, j] - gray[i - 1, j]) / 2.0
            else:
                gy = gray[min(i + 1, h - 1), j] - gray[max(i - 1, 0), j]
            mag = math.sqrt(gx * gx + gy * gy)
            ang = math.atan2(gy, gx) % (2 * math.pi)
            opos = ang / (2 * math.pi / n_bins)
            o0 = int(math.floor(opos))
            of = opos - o0
            yp = (i + 0.5) / cell - 0.5
            xp = (j + 0.5) / cell - 0.5
            y0, x0 = int(math.floor(yp)), int(math.floor(xp))
            fy, fx = yp - y0, xp - x0
            for cy, wy in ((y0, 1 - fy), (y0 + 1, fy)):
                for cx, wx in ((x0, 1 - fx), (x0 + 1, fx)):
                    if not (0 <= cy < ny and 0 <= cx < nx):
                        continue
                    for ob, wo in ((o0 % n_bins, 1 - of), ((o0 + 1) % n_bins, of)):
                        hist[cy, cx, ob] += mag * wy * wx * wo
    ins = hist[:, :, :n_orients] + hist[:, :, n_orients:]
    energy = (ins ** 2).sum(axis=2)

    def e(r, c):
        return energy[min(max(r, 0), ny - 1), min(max(c, 0), nx - 1)]

    out = np.zeros((ny, nx, 3 * n_orients + 4))
    for r in range(ny):
        for c in range(nx):
            norms = []
            for dr, dc in ((-1, -1), (-1, 0), (0, -1), (0, 0)):
                s = e(r + dr, c + dc) + e(r + dr + 1, c + dc) + \
                    e(r + dr, c + dc + 1) + e(r + dr + 1, c + dc + 1)
                norms.append(1.0 / math.sqrt(s + eps))
            for o in range(n_bins):
                out[r, c, o] = 0.5 * sum(min(hist[r, c, o] * n, clip) for n in norms)
            for o in range(n_orients):
                out[r, c, n_bins + o] = 0.5 * sum(min(ins[r, c, o] * n, clip) for n in norms)
            for k, n in enumerate(norms):
                out[r, c, 3 * n_orients + k] = texture * sum(
                    min(hist[r, c, o] * n, clip) for o in range(n_bins))
    return out


def naive_cn(patch, table, cell=4):
    h, w, _ = patch.shape
    out = np.zeros((h // cell, w // cell, table.shape[1]))
    for i in range(h):
        for j in range(w):
            r, g, b = (int(math.floor(v * 255 + 0.5)) for v in patch[i, j])
            out[i // cell, j // cell] += table[r // 8 + 32 * (g // 8) + 1024 * (b // 8)]
    return out / (cell * cell)


def brute_scores(pred, gt, dp_threshold=20.0):
    """DP and AUC by explicit loops over frames and thresholds."""
    errs, ious = [], []
    for p, g in zip(pred, gt):
        pcx, pcy = p[0] + p[2] / 2, p[1] + p[3] / 2
        gcx, gcy = g[0] + g[2] / 2, g[1] + g[3] / 2
        errs.append(math.hypot(pcx - gcx, pcy - gcy))
        ix = max(0.0, min(p[0] + p[2], g[0] + g[2]) - max(p[0], g[0]))
        iy = max(0.0, min(p[1] + p[3], g[1] + g[3]) - max(p[1], g[1]))
        inter = ix * iy
        ious.append(inter / (p[2] * p[3] + g[2] * g[3] - inter))
    dp = sum(1 for e in errs if e <= dp_threshold) / len(errs)
    thresholds = [k / 50 for k in range(51)]
    # mean over thresholds of hits / n, evaluated as one exact rational
    hits = sum(1 for t in thresholds for o in ious if o > 0 and o >= t)
    return dp, hits / (len(ious) * len(thresholds))
