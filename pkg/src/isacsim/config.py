"""Plain-text configuration for the command line.

Format: ``key = value`` lines, ``#`` comments, blank lines ignored.  List
keys (snr_db, n_subcarriers, methods) accept comma-separated values and
accumulate across repeated lines.  Scalar keys must appear at most once.
Overrides (``key=value`` strings) replace the file's value for that key
entirely; a repeated override of a list key accumulates like repeated
lines.
"""

from __future__ import annotations

import numpy as np

from .arrays import ArrayConfig
from .exceptions import ConfigError
from .harness import ExperimentConfig

__all__ = [
    "KNOWN_KEYS",
    "LIST_KEYS",
    "parse_config_text",
    "load_config",
    "apply_overrides",
    "build_experiment",
    "effective_lines",
]

# key -> (parser, is_list)
LIST_KEYS = ("snr_db", "n_subcarriers", "methods")

_DEFAULT_ARRAY = ArrayConfig(n_tx=16, n_rx=16, g_tx=32, g_rx=32)
_DEFAULTS = ExperimentConfig(array=_DEFAULT_ARRAY)

_KEY_ORDER = (
    "n_tx", "n_rx", "g_tx", "g_rx",
    "snr_db", "n_subcarriers", "trials", "seed", "methods", "k_paths",
    "lobe_radius_override", "sage_outer_iters", "sage_step_angle", "sage_step_gain",
    "sage_mode",
)


def _parse_int(key, text):
    try:
        return int(text, 0)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _parse_float(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if not np.isfinite(value):
        raise ConfigError(f"{key}: must be finite, got {text!r}")
    return value


def _parse_optional_int(key, text):
    if text.lower() in ("none", ""):
        return None
    return _parse_int(key, text)


def _parse_str(key, text):
    return text


KNOWN_KEYS = {
    "n_tx": _parse_int,
    "n_rx": _parse_int,
    "g_tx": _parse_int,
    "g_rx": _parse_int,
    "snr_db": _parse_float,
    "n_subcarriers": _parse_int,
    "trials": _parse_int,
    "seed": _parse_int,
    "methods": _parse_str,
    "k_paths": _parse_int,
    "lobe_radius_override": _parse_optional_int,
    "sage_outer_iters": _parse_int,
    "sage_step_angle": _parse_float,
    "sage_step_gain": _parse_float,
    "sage_mode": _parse_str,
}


def _split_values(text: str) -> list:
    return [part.strip() for part in text.split(",") if part.strip() != ""] or [""]


def parse_config_text(text: str, source: str = "config") -> dict:
    """Parse config text into {key: value-or-tuple}; unknown keys fail."""
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        _accumulate(raw, key, value, f"{source}:{lineno}")
    return _typed(raw)


def _accumulate(raw: dict, key: str, value: str, where: str):
    if key not in KNOWN_KEYS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    parts = _split_values(value)
    if key in LIST_KEYS:
        raw.setdefault(key, []).extend(parts)
    else:
        if key in raw or len(parts) != 1:
            raise ConfigError(f"{where}: key {key!r} takes a single value")
        raw[key] = parts[0]


def _typed(raw: dict) -> dict:
    parser_of = KNOWN_KEYS
    out = {}
    for key, value in raw.items():
        if key in LIST_KEYS:
            out[key] = tuple(parser_of[key](key, v) for v in value)
        else:
            out[key] = parser_of[key](key, value)
    return out


def load_config(path) -> dict:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, source=str(path))


def apply_overrides(values: dict, overrides) -> dict:
    """Overlay ``key=value`` strings; an overridden key replaces the file's
    value, repeated overrides of a list key accumulate."""
    raw: dict = {}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        _accumulate(raw, key, value, f"override {key!r}")
    merged = dict(values)
    merged.update(_typed(raw))
    return merged


def build_experiment(values: dict) -> tuple:
    """Materialize (ExperimentConfig, sage_mode) from typed values."""
    d = _DEFAULTS
    try:
        array = ArrayConfig(
            n_tx=values.get("n_tx", _DEFAULT_ARRAY.n_tx),
            n_rx=values.get("n_rx", _DEFAULT_ARRAY.n_rx),
            g_tx=values.get("g_tx", _DEFAULT_ARRAY.g_tx),
            g_rx=values.get("g_rx", _DEFAULT_ARRAY.g_rx),
        )
        cfg = ExperimentConfig(
            array=array,
            snr_grid_db=values.get("snr_db", d.snr_grid_db),
            n_subcarriers_list=values.get("n_subcarriers", d.n_subcarriers_list),
            trials=values.get("trials", d.trials),
            seed=values.get("seed", d.seed),
            methods=values.get("methods", d.methods),
            k_paths=values.get("k_paths", d.k_paths),
            lobe_radius_override=values.get("lobe_radius_override", d.lobe_radius_override),
            sage_outer_iters=values.get("sage_outer_iters", d.sage_outer_iters),
            sage_step_angle=values.get("sage_step_angle", d.sage_step_angle),
            sage_step_gain=values.get("sage_step_gain", d.sage_step_gain),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sage_mode = values.get("sage_mode", "joint")
    if sage_mode not in ("joint", "comm_only", "sens_only"):
        raise ConfigError(f"sage_mode: expected joint, comm_only, or sens_only, got {sage_mode!r}")
    return cfg, sage_mode


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    if value is None:
        return "none"
    return str(value)


def effective_lines(cfg: ExperimentConfig, sage_mode: str = "joint") -> list:
    """Canonical `key = value` lines describing the effective config."""
    a = cfg.array
    values = {
        "n_tx": a.n_tx, "n_rx": a.n_rx, "g_tx": a.g_tx, "g_rx": a.g_rx,
        "snr_db": ", ".join(_fmt(float(s)) for s in cfg.snr_grid_db),
        "n_subcarriers": ", ".join(str(n) for n in cfg.n_subcarriers_list),
        "trials": cfg.trials,
        "seed": cfg.seed,
        "methods": ", ".join(cfg.methods),
        "k_paths": cfg.k_paths,
        "lobe_radius_override": cfg.lobe_radius_override,
        "sage_outer_iters": cfg.sage_outer_iters,
        "sage_step_angle": float(cfg.sage_step_angle),
        "sage_step_gain": float(cfg.sage_step_gain),
        "sage_mode": sage_mode,
    }
    return [f"{key} = {_fmt(values[key])}" for key in _KEY_ORDER]
