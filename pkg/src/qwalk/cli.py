"""
Command-line driver: ``qwalk {analytic-sweep,sim-sweep,purity,compare}``.

Every run writes headered CSV output plus a manifest that echoes the full
effective configuration, the code version, the master seed, the wall-clock
duration and a sha256 checksum of each output. A manifest is itself a valid
``--config`` file, so a run can be reproduced from it.

Exit codes: 0 success, 2 config error, 3 tolerance failure, 4 numerical guard.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .channel import QuadratureGrid, gbar33_closed, spectral_check, spreading_rate_closed
from .config import SCHEMAS, build_config, read_pairs, serialize_config
from .ensemble import EnsembleConfig, estimate_dq, run_ensemble
from .errors import (
    ConfigError,
    DimensionGuardError,
    DivergentRateError,
    QuadratureSingularityError,
    WindowTooShortError,
)
from .noise import BitFlip, BrokenLinks, Coherent, effective_rate
from .purity import purity_exact_bitflip
from .rng import mix64
from .svgplot import loglog_svg

log = logging.getLogger("qwalk")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TOLERANCE = 3
EXIT_GUARD = 4


def fmt(value: float) -> str:
    """17 significant digits: every double round-trips through the CSV."""
    return format(float(value) + 0.0, ".17g")  # + 0.0 folds -0 into 0


def _write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _radians(theta_pi: float) -> float:
    # endpoints land exactly on +-pi/2 so the limit branches fire
    if abs(theta_pi) == 0.5:
        return math.copysign(math.pi / 2, theta_pi)
    return math.pi * theta_pi


def _noise(kind: str, p: float):
    if kind == "bitflip":
        return BitFlip(p)
    if kind == "broken_links":
        return BrokenLinks(p)
    return Coherent()


def _simulate(cfg: dict[str, Any], theta: float, p: float, kind: str, seed: int) -> tuple[float, float]:
    """Regression estimate (dq, stderr) of one ensemble; nan where no estimate exists."""
    noise = _noise(kind, p)
    p_eff = effective_rate(noise)
    if p_eff == 0.0:
        log.warning("theta=%.6g p=%.6g: coherent walk, variance grows quadratically; no D_q", theta, p)
        return math.nan, math.nan
    ens = EnsembleConfig(
        theta=theta, noise=noise, steps=cfg["steps"], walkers=cfg["walkers"],
        master_seed=seed, variance=cfg["variance"],
    )
    result = run_ensemble(ens, workers=cfg["workers"])
    try:
        est = estimate_dq(result, p_eff, multiplier=cfg["window_multiplier"], min_start=cfg["min_start"])
    except WindowTooShortError as exc:
        log.warning("theta=%.6g p=%.6g: %s", theta, p, exc)
        return math.nan, math.nan
    return est.slope, est.stderr


def _closed_or_inf(theta: float, p: float) -> float:
    try:
        return spreading_rate_closed(theta, p).dq
    except DivergentRateError:
        return math.inf


def cmd_analytic_sweep(cfg: dict[str, Any], out: Path) -> tuple[dict[str, Path], int]:
    grid = QuadratureGrid(n=cfg["grid_n"])
    rows = []
    for theta_pi in cfg["theta"]:
        theta = _radians(theta_pi)
        for p in cfg["p"]:
            try:
                dq = spreading_rate_closed(theta, p).dq
                g33 = gbar33_closed(theta, p)
            except DivergentRateError as exc:
                log.warning("theta=%.6g p=%.6g: %s", theta, p, exc)
                dq = g33 = math.inf
            rows.append([theta, float(p), dq, g33, spectral_check(theta, p, grid)])
    path = out / "analytic_sweep.csv"
    _write_csv(path, ["theta", "p", "dq_closed", "gbar33", "max_eig"], rows)
    return {path.name: path}, EXIT_OK


def cmd_sim_sweep(cfg: dict[str, Any], out: Path) -> tuple[dict[str, Path], int]:
    rows = []
    index = 0
    for theta_pi in cfg["theta"]:
        theta = _radians(theta_pi)
        for p in cfg["p"]:
            seed = mix64(cfg["seed"], index)
            index += 1
            log.info("sim-sweep theta=%.6g p=%.6g", theta, p)
            dq, err = _simulate(cfg, theta, p, cfg["noise"], seed)
            closed = math.nan
            if cfg["noise"] == "bitflip":
                closed = _closed_or_inf(theta, p)
            rows.append([theta, float(p), cfg["noise"], dq, err, closed, cfg["walkers"], cfg["steps"], seed])
    path = out / "sim_sweep.csv"
    header = ["theta", "p", "noise", "dq_sim", "dq_stderr", "dq_closed_or_nan", "walkers", "steps", "seed"]
    _write_csv(path, header, rows)
    return {path.name: path}, EXIT_OK


def cmd_purity(cfg: dict[str, Any], out: Path) -> tuple[dict[str, Path], int]:
    theta, p, t_final = _radians(cfg["theta"]), cfg["p"], cfg["t_final"]
    if t_final < 1:
        raise ConfigError("t_final must be >= 1")
    if cfg["method"] == "exact":
        if cfg["noise"] != "bitflip":
            raise ConfigError("exact purity is only available for the bit-flip model")
        t = np.arange(t_final + 1)
        purity = purity_exact_bitflip(theta, p, t_final, max_dim=cfg["max_dim"])
    else:
        times = tuple(int(v) for v in np.unique(np.geomspace(1, t_final, cfg["mc_points"]).round()))
        ens = EnsembleConfig(
            theta=theta, noise=_noise(cfg["noise"], p), steps=t_final, walkers=cfg["walkers"],
            master_seed=cfg["seed"], record_purity=True, purity_times=times,
        )
        result = run_ensemble(ens, workers=cfg["workers"])
        t, purity = result.purity_times, result.purity
    method = cfg["method"]
    path = out / "purity.csv"
    _write_csv(path, ["t", "purity", "method"], [[int(ti), float(v), method] for ti, v in zip(t, purity)])
    outputs = {path.name: path}
    if cfg["svg"]:
        ts = [float(v) for v in t if v > 0]
        ps = [float(v) for v, ti in zip(purity, t) if ti > 0]
        # guide line t^(-1/2), lifted above the data so both stay visible
        scale = 2.0 * ps[-1] * math.sqrt(ts[-1])
        guide = [min(1.0, scale / math.sqrt(v)) for v in ts]
        svg = loglog_svg(
            [(f"{method}, p={p:g}", ts, ps, ""), ("t^-1/2", ts, guide, "4,4")],
            xlabel="t", ylabel="purity", title=f"purity, theta={cfg['theta']:g} pi",
        )
        svg_path = out / "purity.svg"
        svg_path.write_text(svg)
        outputs[svg_path.name] = svg_path
    return outputs, EXIT_OK


def cmd_compare(cfg: dict[str, Any], out: Path) -> tuple[dict[str, Path], int]:
    rows = []
    worst = 0.0
    failed = False
    index = 0
    for theta_pi in cfg["theta"]:
        theta = _radians(theta_pi)
        excluded = cfg["exclude_singular"] and abs(abs(theta_pi) - 0.5) <= cfg["exclusion_width"] + 1e-12
        for p in cfg["p"]:
            seed = mix64(cfg["seed"], index)
            index += 1
            closed = _closed_or_inf(theta, p)
            if excluded:
                rows.append([theta, float(p), closed, math.nan, math.nan, math.nan, 1])
                continue
            log.info("compare theta=%.6g p=%.6g", theta, p)
            dq, err = _simulate(cfg, theta, p, "bitflip", seed)
            dev = abs(dq - closed) / abs(closed) if math.isfinite(closed) else math.nan
            if not math.isfinite(dev) or dev >= cfg["tolerance"]:
                failed = True
            if math.isfinite(dev):
                worst = max(worst, dev)
            rows.append([theta, float(p), closed, dq, err, dev, 0])
    path = out / "compare.csv"
    _write_csv(path, ["theta", "p", "dq_closed", "dq_sim", "dq_stderr", "rel_dev", "excluded"], rows)
    verdict = "FAIL" if failed else "PASS"
    print(f"compare: max relative deviation {worst:.4f} (tolerance {cfg['tolerance']:g}) {verdict}")
    return {path.name: path}, EXIT_TOLERANCE if failed else EXIT_OK


COMMANDS = {
    "analytic-sweep": cmd_analytic_sweep,
    "sim-sweep": cmd_sim_sweep,
    "purity": cmd_purity,
    "compare": cmd_compare,
}


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(
    out: Path, command: str, cfg: dict[str, Any], outputs: dict[str, Path], seconds: float
) -> Path:
    lines = [
        "# qwalk run manifest; usable as --config to rerun",
        f"command = {command}",
        f"code_version = {__version__}",
        f"master_seed = {cfg['seed']}",
        f"wall_clock_seconds = {seconds:.3f}",
    ]
    lines += [f"config.{k} = {v}" for k, v in serialize_config(cfg).items()]
    lines.append("[checksums]")
    lines += [f"{name} = sha256:{sha256(path)}" for name, path in sorted(outputs.items())]
    path = out / f"manifest_{command.replace('-', '_')}.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_set(items: list[str]) -> dict[str, str]:
    pairs = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qwalk", description="Noisy discrete-time quantum walk experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        keys = ", ".join(SCHEMAS[name])
        cmd = sub.add_parser(name, help=f"run {name}", epilog=f"config keys: {keys}")
        cmd.add_argument("--config", type=Path, help="key = value file (a run manifest also works)")
        cmd.add_argument("--out-dir", help="output directory")
        cmd.add_argument("--workers", help="worker processes (does not change results)")
        cmd.add_argument("--seed", help="master seed (overrides QWALK_SEED)")
        cmd.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        file_pairs = read_pairs(args.config) if args.config else {}
        overrides = _parse_set(args.set)
        for key, value in (("out_dir", args.out_dir), ("workers", args.workers), ("seed", args.seed)):
            if value is not None:
                overrides[key] = value
        cfg = build_config(args.command, file_pairs, overrides)
        if cfg["workers"] < 1:
            raise ConfigError("workers must be >= 1")
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".qwalk_write_probe"
        probe.write_text("")
        probe.unlink()
    except (ConfigError, OSError) as exc:
        print(f"qwalk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        outputs, code = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"qwalk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DimensionGuardError, QuadratureSingularityError) as exc:
        print(f"qwalk: numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    manifest = write_manifest(out, args.command, cfg, outputs, time.perf_counter() - start)
    for path in [*outputs.values(), manifest]:
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
