"""Seeded synthetic low-light sequences for tests and smoke benchmarks."""

from pathlib import Path

import numpy as np

from .imgproc import save_image


def moving_square(n_frames=100, size=(320, 240), square=20, velocity=(1.6, 1.2),
                  start=None, background=0.08, foreground=0.9, noise=0.02, dim=1.0,
                  zoom=1.0, texture=0.5, seed=0):
    """Bright square drifting over a dark textured background.

    Returns ``(frames, gt)`` where ``frames`` is (N, H, W, 3) float64 in
    [0, 1] and ``gt`` is (N, 4) top-left ``x, y, w, h``.  ``dim`` scales the
    finished noisy frames (e.g. 0.1 for a very dark clip) and ``zoom`` is
    the per-frame growth factor of the square side.  ``texture`` is the
    relative amplitude of a static random pattern on the background.  The
    square bounces off the frame borders.
    """
    rng = np.random.default_rng(seed)
    width, height = size
    # faint static texture keeps the background from being perfectly flat
    base = background * (1.0 + texture * rng.random((height, width)))
    tint = np.array([1.0, 0.9, 0.8])
    fg_color = foreground * np.array([1.0, 0.85, 0.6])
    yy, xx = np.mgrid[0:height, 0:width] + 0.5
    pos = np.array(start if start is not None else (width / 4.0, height / 4.0), float)
    vel = np.array(velocity, dtype=np.float64)
    frames = np.empty((n_frames, height, width, 3))
    gt = np.empty((n_frames, 4))
    for t in range(n_frames):
        side = square * zoom ** t
        x0, y0 = pos
        # anti-aliased coverage of the square
        cov_x = np.clip(np.minimum(xx + 0.5 - x0, x0 + side - (xx - 0.5)), 0, 1)
        cov_y = np.clip(np.minimum(yy + 0.5 - y0, y0 + side - (yy - 0.5)), 0, 1)
        cov = (cov_x * cov_y)[..., None]
        img = base[..., None] * tint * (1 - cov) + fg_color * cov
        img = img + noise * rng.standard_normal(img.shape)
        frames[t] = dim * np.clip(img, 0.0, 1.0)
        gt[t] = (x0, y0, side, side)
        pos = pos + vel
        for k, limit in enumerate((width, height)):
            if pos[k] < 0 or pos[k] + side * zoom > limit:
                vel[k] = -vel[k]
                pos[k] = np.clip(pos[k], 0, limit - side * zoom)
    return frames, gt


def write_sequence(root, frames, gt, name="synthetic"):
    """Write ``root/name/img/%04d.png`` and ``root/name/groundtruth_rect.txt``."""
    seq_dir = Path(root) / name
    img_dir = seq_dir / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames, start=1):
        save_image(img_dir / f"{i:04d}.png", frame)
    lines = [",".join(f"{v:.2f}" for v in row) for row in gt]
    (seq_dir / "groundtruth_rect.txt").write_text("\n".join(lines) + "\n")
    return seq_dir
