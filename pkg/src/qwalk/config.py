"""
Flat ``key = value`` run configuration.

Each command has a fixed key set with typed defaults; unknown keys are
rejected. Angles are given in units of pi (``theta = 1/4`` is the Hadamard
coin), and grids are comma-separated lists or ``start:stop:count`` ranges.
Numbers may be written as fractions such as ``1/6``.

Precedence, lowest first: defaults, config file, ``QWALK_SEED``, CLI flags.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigError

SEED_ENV = "QWALK_SEED"


def _number(token: str) -> float:
    token = token.strip()
    try:
        return float(Fraction(token))
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"not a number: {token!r}") from None


def parse_grid(text: str) -> list[float]:
    """``"0.1, 1/4"`` or ``"start:stop:count"`` (inclusive, evenly spaced)."""
    text = text.strip()
    if not text:
        raise ConfigError("grid must not be empty")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range grid must be start:stop:count, got {text!r}")
        start, stop = _number(parts[0]), _number(parts[1])
        count = int(_number(parts[2]))
        if count < 1:
            raise ConfigError("range grid needs a positive count")
        return [float(v) for v in np.linspace(start, stop, count)]
    return [_number(tok) for tok in text.split(",") if tok.strip()] or _empty_grid()


def _empty_grid() -> list[float]:
    raise ConfigError("grid must not be empty")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    value = _number(text)
    if value != int(value):
        raise ConfigError(f"not an integer: {text!r}")
    return int(value)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        text = text.strip()
        if text not in options:
            raise ConfigError(f"expected one of {options}, got {text!r}")
        return text

    return parse


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: str
    help: str = ""


_COMMON = {
    "seed": Key(_int, "20080501", "master seed of all random streams"),
    "out_dir": Key(str.strip, "out", "output directory"),
    "workers": Key(_int, "1", "worker processes for ensembles (results do not depend on it)"),
}

_ENSEMBLE = {
    "walkers": Key(_int, "1000", "trajectories per ensemble"),
    "steps": Key(_int, "1000", "time steps per trajectory"),
    "window_multiplier": Key(_number, "5", "regression starts at multiplier / p"),
    "min_start": Key(_int, "20", "earliest regression start"),
    "variance": Key(_choice("mixture", "per_trajectory"), "mixture", "ensemble variance definition"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "analytic-sweep": {
        **_COMMON,
        "theta": Key(parse_grid, "-1/2:1/2:41", "coin angles in units of pi"),
        "p": Key(parse_grid, "0.01, 0.02, 0.1", "bit-flip probabilities"),
        "grid_n": Key(_int, "2048", "quadrature nodes"),
    },
    "sim-sweep": {
        **_COMMON,
        **_ENSEMBLE,
        "theta": Key(parse_grid, "1/6, 1/4, 1/3", "coin angles in units of pi"),
        "p": Key(parse_grid, "0.01, 0.02, 0.1", "noise probabilities (p or p_tilde)"),
        "noise": Key(_choice("bitflip", "broken_links", "coherent"), "bitflip", "noise model"),
    },
    "purity": {
        **_COMMON,
        "theta": Key(_number, "1/4", "coin angle in units of pi"),
        "p": Key(_number, "0.1", "noise probability"),
        "t_final": Key(_int, "500", "last time step"),
        "method": Key(_choice("exact", "mc"), "exact", "exact density matrix or Monte Carlo"),
        "noise": Key(_choice("bitflip", "broken_links"), "bitflip", "noise model (mc only)"),
        "walkers": Key(_int, "1000", "trajectories (mc only)"),
        "mc_points": Key(_int, "12", "log-spaced purity times (mc only)"),
        "max_dim": Key(_int, "4096", "density-matrix dimension guard"),
        "svg": Key(_bool, "true", "also write a log-log plot"),
    },
    "compare": {
        **_COMMON,
        **_ENSEMBLE,
        "theta": Key(parse_grid, "-1/3, -1/4, -1/6, 1/6, 1/4, 1/3", "coin angles in units of pi"),
        "p": Key(parse_grid, "0.01, 0.02, 0.1", "bit-flip probabilities"),
        "tolerance": Key(_number, "0.10", "maximum relative deviation"),
        "exclude_singular": Key(_bool, "true", "skip angles near +-pi/2"),
        "exclusion_width": Key(_number, "0.05", "exclusion half-width in units of pi"),
    },
}


def read_pairs(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment.

    Run manifests are accepted too: only their ``config.*`` entries are used.
    """
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            break  # manifest checksum block
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    if any(k.startswith("config.") for k in pairs):
        pairs = {k[len("config."):]: v for k, v in pairs.items() if k.startswith("config.")}
    return pairs


def build_config(
    command: str,
    file_pairs: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
    environ: dict[str, str] | None = None,
) -> dict[str, Any]:
    """Effective typed configuration of ``command``."""
    try:
        schema = SCHEMAS[command]
    except KeyError:
        raise ConfigError(f"unknown command {command!r}") from None
    environ = os.environ if environ is None else environ
    raw = {key: spec.default for key, spec in schema.items()}
    layers = [file_pairs or {}]
    if SEED_ENV in environ:
        layers.append({"seed": environ[SEED_ENV]})
    layers.append(overrides or {})
    for layer in layers:
        unknown = sorted(set(layer) - set(schema))
        if unknown:
            raise ConfigError(f"unknown keys for {command}: {', '.join(unknown)}")
        raw.update(layer)
    return {key: schema[key].parse(value) for key, value in raw.items()}


def serialize_config(config: dict[str, Any]) -> dict[str, str]:
    """String form of every effective parameter; parses back to ``config``."""
    return {key: _format(value) for key, value in config.items()}
