"""Flat ``key = value`` configuration files.

Every constructor argument of :class:`darktrack.tracker.DarkTracker` is a
key, with the tracker default as the default value.  Values are Python
literals (numbers, booleans, strings, tuples); ``#`` starts a comment.
"""

import ast
import inspect
from pathlib import Path

from .tracker import ABLATIONS, VARIANTS, DarkTracker


class ConfigError(ValueError):
    """Unknown key or malformed value in a configuration."""


def default_config():
    sig = inspect.signature(DarkTracker.__init__)
    return {name: p.default for name, p in sig.parameters.items() if name != "self"}


def _parse_value(key, text, where):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        # bare words are strings (e.g. ``schedule = sequential``)
        if text and all(ch.isalnum() or ch in "_-./" for ch in text):
            return text
        raise ConfigError(f"{where}: cannot parse value for {key!r}: {text!r}") from None


def _check_key(key, known, where):
    if key not in known:
        raise ConfigError(f"{where}: unknown key {key!r}")


def parse_config(text, source="<config>"):
    known = default_config()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        _check_key(key, known, where)
        out[key] = _parse_value(key, value, where)
    return out


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def parse_overrides(items):
    """``["mu=0", "psi=0.1"]`` -> dict, with the same rules as a config file."""
    return parse_config("\n".join(items or []), "--set")


def resolve_config(path=None, overrides=None, variant=None, ablate=None):
    """Defaults <- variant <- ablation <- file <- overrides, validated."""
    cfg = default_config()
    if variant is not None:
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}")
        cfg.update(VARIANTS[variant])
    for name in ablate or []:
        if name not in ABLATIONS:
            raise ConfigError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
        cfg.update(ABLATIONS[name])
    if path is not None:
        cfg.update(load_config(path))
    cfg.update(parse_overrides(overrides))
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    def positive(*keys):
        for k in keys:
            if not (isinstance(cfg[k], (int, float)) and cfg[k] > 0):
                raise ConfigError(f"{k} must be positive, got {cfg[k]!r}")

    def non_negative(*keys):
        for k in keys:
            if not (isinstance(cfg[k], (int, float)) and cfg[k] >= 0):
                raise ConfigError(f"{k} must be non-negative, got {cfg[k]!r}")

    positive("delta", "cell_size", "gamma0", "gamma_max", "template_size", "n_scales",
             "lambda2", "scale_sigma_factor", "scale_model_max_area", "output_sigma_factor")
    non_negative("lambda1", "mu", "psi", "padding", "admm_iters")
    for k in ("learning_rate", "scale_lr"):
        if not 0 <= cfg[k] <= 1:
            raise ConfigError(f"{k} must lie in [0, 1], got {cfg[k]!r}")
    if cfg["beta"] < 1:
        raise ConfigError(f"beta must be at least 1, got {cfg['beta']!r}")
    if cfg["scale_step"] <= 1:
        raise ConfigError(f"scale_step must exceed 1, got {cfg['scale_step']!r}")
    if int(cfg["n_scales"]) % 2 == 0:
        raise ConfigError(f"n_scales must be odd, got {cfg['n_scales']!r}")
    if cfg["schedule"] not in ("sequential", "simultaneous"):
        raise ConfigError(f"schedule must be sequential or simultaneous, got {cfg['schedule']!r}")
    if cfg["detect_mask"] not in ("previous", "ones"):
        raise ConfigError(f"detect_mask must be previous or ones, got {cfg['detect_mask']!r}")
    if cfg["dtype"] not in ("float32", "float64"):
        raise ConfigError(f"dtype must be float32 or float64, got {cfg['dtype']!r}")
    if len(tuple(cfg["alpha"])) != 3:
        raise ConfigError(f"alpha needs three channel weights, got {cfg['alpha']!r}")
    return cfg


def format_config(cfg):
    """Render a config dict in the file format (round-trips through :func:`parse_config`)."""
    return "".join(f"{k} = {v!r}\n" for k, v in cfg.items())


def json_safe(cfg):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.items()}
