"""Command-line interface: ``darktrack {enhance,track,bench,score}``.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
input), 3 numeric failure.
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import DarkPatchError
from .bench import (SequenceError, filter_by_attribute, load_dataset, load_sequence,
                    read_results_csv, report, run_tracker, score_sequence, write_report,
                    write_results_csv)
from .colornames import ColorTableError
from .config import ConfigError, json_safe, resolve_config
from .enhance import (build_mask, enhance_patch, illumination_change,
                      log_average_luminance, world_illumination)
from .imgproc import BBox, load_image, save_image
from .tracker import ABLATIONS, VARIANTS, DarkTracker

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_config_flags(p):
    p.add_argument("--config", type=Path, help="flat key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--variant", choices=sorted(VARIANTS),
                   help="ablation-ladder tracker version")
    p.add_argument("--ablate", action="append", default=[], choices=sorted(ABLATIONS),
                   help="switch off one component (repeatable)")


def build_parser():
    parser = _Parser(prog="darktrack", description="Low-light correlation-filter tracker.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enhance", help="enhance one image and write its target mask")
    p.add_argument("image", type=Path)
    p.add_argument("out_dir", type=Path)
    p.add_argument("--box", type=float, nargs=4, metavar=("X", "Y", "W", "H"),
                   help="target box (top-left x, y, w, h); default: whole image")
    _add_config_flags(p)

    p = sub.add_parser("track", help="track one sequence")
    p.add_argument("sequence", type=Path, help="sequence directory (frames in img/ or directly)")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--gt", type=Path, help="ground-truth file (default: found in the sequence)")
    p.add_argument("--debug-dumps", action="store_true",
                   help="write per-frame response maps and masks")
    _add_config_flags(p)

    p = sub.add_parser("bench", help="track and score every sequence of a dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("out_dir", type=Path)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--attr", help="only sequences with this attribute (IV, OCC, LR, FM, VC)")
    _add_config_flags(p)

    p = sub.add_parser("score", help="re-score existing result CSVs against a dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("results", type=Path, help="directory of <sequence>.csv result files")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--attr")
    return parser


def _config(args):
    return resolve_config(args.config, args.set, args.variant, args.ablate)


def cmd_enhance(args):
    cfg = _config(args)
    img = load_image(args.image)
    h, w = img.shape[:2]
    box = BBox.from_xywh(*args.box) if args.box else BBox(w / 2.0, h / 2.0, w, h)
    enhanced = enhance_patch(img, cfg["alpha"], cfg["delta"])
    theta = illumination_change(img, cfg["alpha"], cfg["delta"])
    mask, stats = build_mask(theta, box, return_stats=True)
    lw = world_illumination(img, cfg["alpha"])
    args.out_dir.mkdir(parents=True, exist_ok=True)
    save_image(args.out_dir / "enhanced.png", enhanced)
    save_image(args.out_dir / "mask.png", mask)
    info = {"log_average": log_average_luminance(lw, cfg["delta"]),
            "max_illumination": float(lw.max()), "mu": stats.mu, "sigma": stats.sigma,
            "box": list(box.to_xywh())}
    (args.out_dir / "enhance.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _dump_hook(out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)

    def hook(index, tracker):
        if tracker.last_response_ is not None:
            np.save(out_dir / f"response_{index + 1:05d}.npy", tracker.last_response_)
        if getattr(tracker, "last_mask_", None) is not None:
            save_image(out_dir / f"mask_{index + 1:05d}.png", tracker.last_mask_)
    return hook


def _track_one(seq, cfg, out_dir, dumps=False):
    tracker = DarkTracker(**cfg)
    hook = _dump_hook(out_dir / "debug" / seq.name) if dumps else None
    result = run_tracker(tracker, seq, hook)
    if not np.all(np.isfinite(result.boxes)):
        raise FloatingPointError(f"{seq.name}: non-finite box estimate")
    write_results_csv(out_dir / f"{seq.name}.csv", result, seq.gt)
    return result


def cmd_track(args):
    cfg = _config(args)
    seq = load_sequence(args.sequence, args.gt)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    result = _track_one(seq, cfg, args.out_dir, args.debug_dumps)
    rep = report([score_sequence(result, seq.gt)])
    write_report(args.out_dir, rep, json_safe(cfg))
    print(f"{seq.name}: DP={rep.dp:.3f} AUC={rep.auc:.3f} FPS={rep.fps:.1f}")
    return EXIT_OK


def _bench_worker(job):
    seq, cfg, out_dir = job
    return _track_one(seq, cfg, out_dir)


def _print_report(rep):
    print(f"sequences={rep.n_sequences} DP={rep.dp:.3f} AUC={rep.auc:.3f} FPS={rep.fps:.1f}")
    for attr, vals in rep.by_attribute.items():
        print(f"  {attr}: DP={vals['DP']:.3f} AUC={vals['AUC']:.3f}")


def cmd_bench(args):
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    cfg = _config(args)
    seqs = filter_by_attribute(load_dataset(args.dataset), args.attr)
    if not seqs:
        raise SequenceError(f"no sequences with attribute {args.attr}")
    out = args.out_dir / "sequences"
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(s, cfg, out) for s in seqs]
    if args.jobs == 1:
        results = [_bench_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_worker, jobs))
    scores = [score_sequence(r, s.gt, s.attributes) for r, s in zip(results, seqs)]
    rep = report(scores)
    summary_cfg = {**json_safe(cfg), "variant": args.variant, "ablate": args.ablate,
                   "attr": args.attr}
    write_report(args.out_dir, rep, summary_cfg)
    _print_report(rep)
    return EXIT_OK


def cmd_score(args):
    seqs = filter_by_attribute(load_dataset(args.dataset), args.attr)
    scores = []
    for seq in seqs:
        path = args.results / f"{seq.name}.csv"
        if not path.is_file():
            raise SequenceError(f"missing results for {seq.name}: {path}")
        scores.append(score_sequence(read_results_csv(path, seq.name), seq.gt, seq.attributes))
    if not scores:
        raise SequenceError("nothing to score")
    rep = report(scores)
    write_report(args.out_dir, rep, {"results": str(args.results), "attr": args.attr})
    _print_report(rep)
    return EXIT_OK


COMMANDS = {"enhance": cmd_enhance, "track": cmd_track, "bench": cmd_bench,
            "score": cmd_score}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"darktrack: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DarkPatchError as exc:
        print(f"darktrack: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SequenceError, ColorTableError, OSError, ValueError) as exc:
        print(f"darktrack: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"darktrack: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
