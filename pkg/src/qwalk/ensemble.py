"""
Trajectory ensembles, spreading-rate regression and Monte Carlo purity.

Trajectories are processed in fixed-size chunks, each trajectory with its own
generator from :func:`qwalk.rng.trajectory_rng`. Chunk boundaries and the final
reduction never depend on the number of workers, so results are bit-identical
for any ``workers``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from . import _kernels
from .errors import ConfigError, DivergentRateError, WindowTooShortError
from .noise import BitFlip, BrokenLinks, Coherent, NoiseModel, sample_link_history
from .rng import trajectory_rng
from .walk import InitialCoinState, check_theta

__all__ = [
    "EnsembleConfig",
    "EnsembleResult",
    "DqEstimate",
    "run_ensemble",
    "estimate_dq",
    "fit_window",
    "purity_mc_pairwise",
]

CHUNK = 32
VARIANCE_MODES = ("mixture", "per_trajectory")


@dataclass(frozen=True)
class EnsembleConfig:
    theta: float
    noise: NoiseModel
    steps: int
    walkers: int
    master_seed: int = 0
    initial: InitialCoinState = field(default_factory=InitialCoinState)
    record_purity: bool = False
    purity_times: tuple[int, ...] | None = None
    variance: str = "mixture"

    def __post_init__(self) -> None:
        check_theta(self.theta)
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.walkers < 1:
            raise ConfigError("walkers must be >= 1")
        if self.variance not in VARIANCE_MODES:
            raise ConfigError(f"variance must be one of {VARIANCE_MODES}")
        if not isinstance(self.noise, (Coherent, BitFlip, BrokenLinks)):
            raise ConfigError(f"unknown noise model {self.noise!r}")
        if self.record_purity and self.walkers < 2:
            raise ConfigError("purity estimation needs at least two walkers")
        if self.purity_times is not None:
            if any(t < 0 or t > self.steps for t in self.purity_times):
                raise ConfigError("purity times must lie in [0, steps]")

    def snapshot_times(self) -> NDArray[np.int64]:
        if not self.record_purity:
            return np.zeros(0, dtype=np.int64)
        if self.purity_times is not None:
            return np.unique(np.asarray(self.purity_times, dtype=np.int64))
        # log-spaced by default; states at late times dominate memory
        return np.unique(np.geomspace(1, self.steps, 12).round().astype(np.int64))


@dataclass
class DqEstimate:
    slope: float
    intercept: float
    stderr: float
    window: tuple[int, int]


@dataclass
class EnsembleResult:
    t: NDArray[np.int64]
    mean_x: NDArray[np.float64]
    var_x: NDArray[np.float64]
    purity: NDArray[np.float64] | None = None
    purity_stderr: NDArray[np.float64] | None = None
    purity_times: NDArray[np.int64] | None = None
    dq: DqEstimate | None = None


def _noise_mode(noise: NoiseModel) -> int:
    if isinstance(noise, BitFlip):
        return _kernels.BITFLIP
    if isinstance(noise, BrokenLinks):
        return _kernels.BROKEN_LINKS
    return _kernels.COHERENT


def _run_chunk(config: EnsembleConfig, start: int, stop: int):
    steps = config.steps
    mode = _noise_mode(config.noise)
    c, s = math.cos(config.theta), math.sin(config.theta)
    snap_times = config.snapshot_times()
    n = stop - start
    means = np.empty((n, steps + 1))
    seconds = np.empty((n, steps + 1))
    buf = np.zeros((len(snap_times), 2, 2 * steps + 1), dtype=np.complex128)
    # light cone: only sites |x| <= t can be occupied at time t
    cones = [np.empty((n, 2, 2 * t + 1), dtype=np.complex128) for t in snap_times]
    no_flips = np.zeros(0, dtype=np.bool_)
    no_links = np.zeros(0, dtype=np.bool_)
    for row, i in enumerate(range(start, stop)):
        flips, links = no_flips, no_links
        if mode == _kernels.BITFLIP:
            flips = trajectory_rng(config.master_seed, i).random(steps) < config.noise.p
        elif mode == _kernels.BROKEN_LINKS:
            links = sample_link_history(config.noise.p_tilde, steps, trajectory_rng(config.master_seed, i))
        _kernels.evolve_trajectory(
            complex(config.initial.a0), complex(config.initial.b0), c, s, steps, mode,
            flips, links, snap_times, buf, means[row], seconds[row],
        )
        for j, t in enumerate(snap_times):
            cones[j][row] = buf[j, :, steps - t : steps + t + 1]
    return means, seconds, cones


def run_ensemble(config: EnsembleConfig, workers: int = 1) -> EnsembleResult:
    """Evolve ``config.walkers`` independent trajectories and average their moments.

    ``var_x`` is the variance of the noise-averaged distribution,
    E[<x^2>] - E[<x>]^2, unless ``config.variance == "per_trajectory"``, which
    gives E[<x^2> - <x>^2].
    """
    bounds = [(i, min(i + CHUNK, config.walkers)) for i in range(0, config.walkers, CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [config] * len(bounds), *zip(*bounds)))
    else:
        parts = [_run_chunk(config, lo, hi) for lo, hi in bounds]

    means = np.concatenate([m for m, _, _ in parts])
    seconds = np.concatenate([s for _, s, _ in parts])
    mean_x = means.mean(axis=0)
    if config.variance == "mixture":
        var_x = seconds.mean(axis=0) - mean_x**2
    else:
        var_x = (seconds - means**2).mean(axis=0)
    var_x = np.maximum(var_x, 0.0)

    result = EnsembleResult(t=np.arange(config.steps + 1), mean_x=mean_x, var_x=var_x)
    times = config.snapshot_times()
    if len(times):
        purity = np.empty(len(times))
        err = np.empty(len(times))
        for j in range(len(times)):
            states = np.concatenate([cones[j] for _, _, cones in parts])
            purity[j], err[j] = purity_mc_pairwise(states.reshape(config.walkers, -1), return_stderr=True)
        result.purity, result.purity_stderr, result.purity_times = purity, err, times
    return result


def fit_window(steps: int, p_effective: float, multiplier: float = 10.0, min_start: int = 20) -> tuple[int, int]:
    """Default regression window [max(min_start, ceil(multiplier / p)), steps]."""
    if p_effective <= 0.0:
        raise DivergentRateError("no spreading rate for a coherent walk (p_effective = 0)")
    return max(min_start, math.ceil(multiplier / p_effective)), steps


def estimate_dq(
    result: EnsembleResult,
    p_effective: float,
    multiplier: float = 10.0,
    min_start: int = 20,
    min_samples: int = 100,
    t_hi: int | None = None,
) -> DqEstimate:
    """Least-squares slope of var_x(t) over the asymptotic window.

    Raises
    ------
    WindowTooShortError
        If the window holds fewer than ``min_samples`` points.
    DivergentRateError
        If ``p_effective`` is zero (coherent walk).
    """
    t_last = int(result.t[-1])
    t_lo, t_top = fit_window(t_last, p_effective, multiplier, min_start)
    t_hi = t_top if t_hi is None else min(t_hi, t_top)
    if t_hi - t_lo < min_samples:
        raise WindowTooShortError(
            f"window [{t_lo}, {t_hi}] has fewer than {min_samples} samples; "
            f"run longer than {t_lo + min_samples} steps or lower the multiplier"
        )
    sel = (result.t >= t_lo) & (result.t <= t_hi)
    fit = stats.linregress(result.t[sel].astype(np.float64), result.var_x[sel])
    est = DqEstimate(float(fit.slope), float(fit.intercept), float(fit.stderr), (t_lo, t_hi))
    result.dq = est
    return est


def purity_mc_pairwise(states, return_stderr: bool = False):
    """U-statistic estimate of tr(rho^2) for rho = E|psi><psi|.

    ``states`` is an (N, D) array of normalized state vectors (or a sequence of
    :class:`~qwalk.walk.WalkerState`). The estimator is
    sum_{i != j} |<psi_i|psi_j>|^2 / (N (N - 1)); with ``return_stderr`` the
    first-order U-statistic standard error is returned as well.
    """
    if not isinstance(states, np.ndarray):
        states = np.array([np.concatenate([st.a, st.b]) for st in states])
    n = states.shape[0]
    if n < 2:
        raise ValueError("pairwise purity needs at least two trajectories")
    gram = states.conj() @ states.T
    w = gram.real**2 + gram.imag**2
    np.fill_diagonal(w, 0.0)
    row = w.sum(axis=1) / (n - 1)
    estimate = float(row.mean())
    if not return_stderr:
        return estimate
    return estimate, float(2.0 * row.std(ddof=1) / math.sqrt(n))
