"""Sequence loading, per-frame errors and precision / success metrics.

Boxes on disk are top-left ``x, y, w, h``; internally centers are used.
Absent ground truth (a line of NaNs, zeros or an empty box) is kept as a NaN
row so frame counts always line up, and such frames are skipped by the
metrics.
"""

import csv
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imgproc import BBox, load_image

ATTRIBUTES = ("IV", "OCC", "LR", "FM", "VC")
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
GT_NAMES = ("groundtruth_rect.txt", "groundtruth.txt", "gt.txt")

PRECISION_THRESHOLDS = np.arange(0, 51, dtype=np.float64)
# k / 50 is the correctly rounded value of each threshold (linspace is not)
SUCCESS_THRESHOLDS = np.arange(51) / 50.0
DP_THRESHOLD = 20.0


class SequenceError(ValueError):
    """Malformed sequence directory or ground-truth file."""


@dataclass
class Sequence:
    """Frames on disk plus per-frame ground truth.

    ``gt`` is (N, 4) top-left ``x, y, w, h`` with NaN rows for frames
    without annotation.
    """

    name: str
    frames: list
    gt: np.ndarray
    attributes: frozenset = frozenset()

    def __post_init__(self):
        if len(self.frames) < 2:
            raise SequenceError(f"sequence {self.name!r} needs at least 2 frames")
        if len(self.gt) != len(self.frames):
            raise SequenceError(
                f"sequence {self.name!r}: {len(self.frames)} frames but "
                f"{len(self.gt)} ground-truth lines")

    def __len__(self):
        return len(self.frames)

    def boxes(self):
        return [None if np.isnan(row).any() else BBox.from_xywh(*row) for row in self.gt]

    def init_box(self):
        box = self.boxes()[0]
        if box is None:
            raise SequenceError(f"sequence {self.name!r} has no first-frame annotation")
        return box


def _natural_key(path):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", path.name)]


def list_frames(directory):
    directory = Path(directory)
    img_dir = directory / "img" if (directory / "img").is_dir() else directory
    frames = [p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
    return sorted(frames, key=_natural_key)


def parse_groundtruth(path):
    """Parse one ``x,y,w,h`` line per frame (comma, tab or space separated)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SequenceError(f"cannot read ground truth {path}: {exc.strerror}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = [p for p in re.split(r"[,\t ]+", line.strip()) if p]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            vals = []
        if len(vals) != 4:
            raise SequenceError(f"{path}:{lineno}: expected 'x,y,w,h', got {line.strip()!r}")
        if not (vals[2] > 0 and vals[3] > 0):
            vals = [np.nan] * 4
        rows.append(vals)
    return np.array(rows, dtype=np.float64).reshape(-1, 4)


def find_groundtruth(directory):
    directory = Path(directory)
    for name in GT_NAMES:
        if (directory / name).is_file():
            return directory / name
    raise SequenceError(f"no ground-truth file ({', '.join(GT_NAMES)}) in {directory}")


def read_attributes(directory):
    path = Path(directory) / "attributes.txt"
    if not path.is_file():
        return frozenset()
    tags = {t.upper() for t in re.split(r"[,\s]+", path.read_text()) if t}
    unknown = tags - set(ATTRIBUTES)
    if unknown:
        raise SequenceError(f"{path}: unknown attributes {sorted(unknown)}")
    return frozenset(tags)


def load_sequence(directory, gt_file=None, name=None):
    directory = Path(directory)
    if not directory.is_dir():
        raise SequenceError(f"sequence directory not found: {directory}")
    frames = list_frames(directory)
    gt = parse_groundtruth(gt_file if gt_file is not None else find_groundtruth(directory))
    if len(gt) != len(frames):
        raise SequenceError(
            f"{directory}: {len(frames)} frames but {len(gt)} ground-truth lines")
    return Sequence(name or directory.name, frames, gt, read_attributes(directory))


def load_dataset(root):
    """Every subdirectory of ``root`` holding a ground-truth file, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise SequenceError(f"dataset directory not found: {root}")
    seqs = [load_sequence(d) for d in sorted(root.iterdir())
            if d.is_dir() and any((d / n).is_file() for n in GT_NAMES)]
    if not seqs:
        raise SequenceError(f"no sequences found under {root}")
    return seqs


# -- per-frame errors ---------------------------------------------------------

def _centers(xywh):
    xywh = np.asarray(xywh, dtype=np.float64).reshape(-1, 4)
    return xywh[:, :2] + xywh[:, 2:] / 2.0


def cle(pred, gt):
    """Center location error in pixels; accepts :class:`BBox` or xywh arrays."""
    if isinstance(pred, BBox) and isinstance(gt, BBox):
        return float(np.hypot(pred.cx - gt.cx, pred.cy - gt.cy))
    d = _centers(pred) - _centers(gt)
    return np.hypot(d[:, 0], d[:, 1])


def iou(pred, gt):
    """Intersection over union; accepts :class:`BBox` or xywh arrays."""
    scalar = isinstance(pred, BBox) and isinstance(gt, BBox)
    if scalar:
        pred, gt = pred.to_xywh(), gt.to_xywh()
    a = np.asarray(pred, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(gt, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    ih = np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    out = inter / union
    return float(out[0]) if scalar else out


def precision_curve(errors, thresholds=PRECISION_THRESHOLDS):
    """Fraction of frames with CLE at most each threshold."""
    errors = np.asarray(errors, dtype=np.float64)
    errors = errors[~np.isnan(errors)]
    if errors.size == 0:
        raise ValueError("no annotated frames to score")
    return (errors[None, :] <= np.asarray(thresholds)[:, None]).mean(axis=1)


def success_curve(overlaps, thresholds=SUCCESS_THRESHOLDS):
    """Fraction of frames whose IoU reaches each threshold.

    A frame counts at threshold ``t`` when ``IoU >= t`` and the boxes
    overlap at all, so perfect tracking scores 1 everywhere and disjoint
    predictions score 0 everywhere.
    """
    overlaps = np.asarray(overlaps, dtype=np.float64)
    overlaps = overlaps[~np.isnan(overlaps)]
    if overlaps.size == 0:
        raise ValueError("no annotated frames to score")
    hit = (overlaps[None, :] >= np.asarray(thresholds)[:, None]) & (overlaps[None, :] > 0)
    return hit.mean(axis=1)


def _value_at(curve, thresholds, t):
    idx = np.flatnonzero(np.isclose(thresholds, t))
    if idx.size == 0:
        raise ValueError(f"threshold {t} is not on the precision grid")
    return float(curve[idx[0]])


# -- results and reports ------------------------------------------------------

@dataclass
class TrackResult:
    """Predicted top-left boxes and per-frame tracking seconds for one sequence."""

    name: str
    boxes: np.ndarray
    seconds: np.ndarray
    flat: np.ndarray = None
    attributes: frozenset = frozenset()

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        self.seconds = np.asarray(self.seconds, dtype=np.float64)
        if self.flat is None:
            self.flat = np.zeros(len(self.boxes), dtype=bool)
        self.flat = np.asarray(self.flat, dtype=bool)
        if not len(self.boxes) == len(self.seconds) == len(self.flat):
            raise ValueError("boxes, seconds and flags must have one entry per frame")


@dataclass
class SequenceScore:
    name: str
    cle: np.ndarray
    iou: np.ndarray
    precision: np.ndarray
    success: np.ndarray
    frames: int
    seconds: float
    attributes: frozenset = frozenset()

    @property
    def dp(self):
        return _value_at(self.precision, PRECISION_THRESHOLDS, DP_THRESHOLD)

    @property
    def auc(self):
        # total hit count over one division, so the value is correctly rounded
        n = int(np.count_nonzero(~np.isnan(self.iou)))
        hits = np.rint(self.success * n).sum()
        return float(hits / (n * len(self.success)))


def score_sequence(result, gt, attributes=None):
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 4)
    if len(gt) != len(result.boxes):
        raise ValueError(
            f"{result.name}: {len(result.boxes)} predictions for {len(gt)} frames")
    annotated = ~np.isnan(gt).any(axis=1)
    errors = np.full(len(gt), np.nan)
    overlaps = np.full(len(gt), np.nan)
    errors[annotated] = cle(result.boxes[annotated], gt[annotated])
    overlaps[annotated] = iou(result.boxes[annotated], gt[annotated])
    attrs = result.attributes if attributes is None else frozenset(attributes)
    return SequenceScore(result.name, errors, overlaps, precision_curve(errors),
                         success_curve(overlaps), len(gt), float(result.seconds.sum()),
                         attrs)


@dataclass
class MetricReport:
    precision: np.ndarray
    success: np.ndarray
    dp: float
    auc: float
    fps: float
    n_sequences: int
    per_sequence: dict = field(default_factory=dict)
    by_attribute: dict = field(default_factory=dict)

    def summary(self):
        return {"DP": self.dp, "AUC": self.auc, "FPS": self.fps,
                "sequences": self.n_sequences}


def _aggregate(scores):
    precision = np.mean([s.precision for s in scores], axis=0)
    success = np.mean([s.success for s in scores], axis=0)
    seconds = sum(s.seconds for s in scores)
    frames = sum(s.frames for s in scores)
    fps = frames / seconds if seconds > 0 else float("inf")
    return precision, success, fps


def report(scores, attribute_breakdown=True):
    """Average per-sequence curves with equal weight per sequence."""
    scores = list(scores)
    if not scores:
        raise ValueError("report needs at least one sequence")
    precision, success, fps = _aggregate(scores)
    rep = MetricReport(
        precision=precision, success=success,
        dp=_value_at(precision, PRECISION_THRESHOLDS, DP_THRESHOLD),
        auc=float(success.mean()), fps=fps, n_sequences=len(scores),
        per_sequence={s.name: {"DP": s.dp, "AUC": s.auc,
                               "mean_CLE": float(np.nanmean(s.cle)),
                               "FPS": s.frames / s.seconds if s.seconds > 0 else None}
                      for s in scores})
    if attribute_breakdown:
        for attr in ATTRIBUTES:
            subset = [s for s in scores if attr in s.attributes]
            if subset:
                sub = report(subset, attribute_breakdown=False)
                rep.by_attribute[attr] = sub.summary()
    return rep


def filter_by_attribute(items, attr):
    """Keep sequences / scores flagged with ``attr`` (``None`` keeps all)."""
    if attr is None:
        return list(items)
    attr = attr.upper()
    if attr not in ATTRIBUTES:
        raise ValueError(f"unknown attribute {attr!r}; choose from {ATTRIBUTES}")
    return [it for it in items if attr in it.attributes]


# -- running ------------------------------------------------------------------

def run_tracker(tracker, sequence, on_frame=None):
    """Track a sequence; decode time is excluded from the per-frame seconds.

    ``on_frame(index, tracker)`` is called after every frame (for debug
    dumps).
    """
    n = len(sequence)
    boxes = np.empty((n, 4))
    seconds = np.zeros(n)
    flat = np.zeros(n, dtype=bool)
    for i, path in enumerate(sequence.frames):
        frame = load_image(path)
        t0 = time.perf_counter()
        if i == 0:
            tracker.fit(frame, sequence.init_box())
            box = tracker.bbox_
        else:
            box = tracker.update(frame)
            flat[i] = tracker.state_.flat
        seconds[i] = time.perf_counter() - t0
        boxes[i] = box.to_xywh()
        if on_frame is not None:
            on_frame(i, tracker)
    return TrackResult(sequence.name, boxes, seconds, flat, sequence.attributes)


# -- files --------------------------------------------------------------------

RESULT_FIELDS = ("frame", "x", "y", "w", "h", "cle", "iou", "seconds", "flat")


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


def write_results_csv(path, result, gt=None):
    gt = None if gt is None else np.asarray(gt, dtype=np.float64)
    if gt is not None:
        errors, overlaps = cle(result.boxes, gt), iou(result.boxes, gt)
    else:
        errors = overlaps = np.full(len(result.boxes), np.nan)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS)
        for i, (box, sec, fl) in enumerate(zip(result.boxes, result.seconds, result.flat)):
            writer.writerow([i + 1, *map(_fmt, box), _fmt(errors[i]), _fmt(overlaps[i]),
                             _fmt(sec), int(fl)])


def read_results_csv(path, name=None):
    """Load a result CSV (ours or an external tracker's in the same schema)."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise SequenceError(f"cannot read results {path}: {exc.strerror}") from exc
    if not rows:
        raise SequenceError(f"{path}: no result rows")
    missing = {"x", "y", "w", "h"} - set(rows[0])
    if missing:
        raise SequenceError(f"{path}: missing columns {sorted(missing)}")
    try:
        boxes = [[float(r[k]) for k in "xywh"] for r in rows]
        seconds = [float(r["seconds"]) if r.get("seconds") else 0.0 for r in rows]
        flat = [bool(int(r["flat"])) if r.get("flat") else False for r in rows]
    except ValueError as exc:
        raise SequenceError(f"{path}: {exc}") from exc
    return TrackResult(name or path.stem, boxes, seconds, flat)


def write_curves_csv(path, thresholds, values, header):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, v in zip(thresholds, values):
            writer.writerow([repr(float(t)), repr(float(v))])


def write_report(out_dir, rep, config=None):
    """``summary.json``, ``precision.csv`` and ``success.csv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {**rep.summary(), "per_sequence": rep.per_sequence,
               "by_attribute": rep.by_attribute, "config": config or {}}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_curves_csv(out_dir / "precision.csv", PRECISION_THRESHOLDS, rep.precision,
                     ("cle_threshold", "precision"))
    write_curves_csv(out_dir / "success.csv", SUCCESS_THRESHOLDS, rep.success,
                     ("iou_threshold", "success"))
    return summary
