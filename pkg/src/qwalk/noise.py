"""
Noise models and single-realization steps.

Both models are unitary per realization:

* bit flip: after a coherent step, the chirality of every site is swapped
  (I (x) X) with probability p;
* broken links: every link (x, x+1) is independently broken with probability
  p_tilde for one step; flux that would cross a broken link is diverted to the
  other chirality at the same site.

These functions are the reference implementation. Ensembles run the fused
kernels in :mod:`qwalk._kernels`, which are tested against them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray

from .errors import LatticeBoundsError
from .walk import WalkerState, apply_coin, step

__all__ = [
    "Coherent",
    "BitFlip",
    "BrokenLinks",
    "NoiseModel",
    "LinkMask",
    "effective_rate",
    "step_bitflip_trajectory",
    "sample_link_mask",
    "sample_link_history",
    "history_offset",
    "history_mask",
    "step_broken_links",
]


def _check_prob(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class Coherent:
    name = "coherent"


@dataclass(frozen=True)
class BitFlip:
    p: float
    name = "bitflip"

    def __post_init__(self) -> None:
        _check_prob(self.p, "p")


@dataclass(frozen=True)
class BrokenLinks:
    p_tilde: float
    name = "broken_links"

    def __post_init__(self) -> None:
        _check_prob(self.p_tilde, "p_tilde")


NoiseModel = Union[Coherent, BitFlip, BrokenLinks]


def effective_rate(noise: NoiseModel) -> float:
    """Rate of decoherent events per step, min(p, 1 - p); zero for coherent walks.

    p = 1 is as coherent as p = 0 for both models, so the asymptotic regime is
    governed by the distance to the nearest coherent endpoint.
    """
    if isinstance(noise, BitFlip):
        return min(noise.p, 1.0 - noise.p)
    if isinstance(noise, BrokenLinks):
        return min(noise.p_tilde, 1.0 - noise.p_tilde)
    return 0.0


@dataclass
class LinkMask:
    """Broken flags for links (x, x+1), x = -t_max .. t_max-1 (index x + t_max)."""

    t_max: int
    broken: NDArray[np.bool_]

    def __post_init__(self) -> None:
        if self.broken.shape != (2 * self.t_max,):
            raise ValueError(f"link mask must have {2 * self.t_max} entries")


def step_bitflip_trajectory(
    state: WalkerState, theta: float, p: float, rng: np.random.Generator
) -> WalkerState:
    """Coherent step followed by I (x) X with probability ``p``."""
    _check_prob(p, "p")
    new = step(state, theta)
    if rng.random() < p:
        new.a, new.b = new.b, new.a
    return new


def _bernoulli(p: float, n: int, rng: np.random.Generator) -> NDArray[np.bool_]:
    """``n`` independent Bernoulli(p) flags.

    Sparse rates draw geometric gaps between successes instead of one uniform
    per flag.
    """
    mask = np.zeros(n, dtype=bool)
    if p <= 0.0 or n == 0:
        return mask
    if p >= 1.0:
        mask[:] = True
        return mask
    if p > 0.25:
        return rng.random(n) < p
    log_q = np.log1p(-p)
    pos = -1
    while True:
        m = int(1.1 * p * (n - pos - 1)) + 16
        # inverse CDF of the geometric distribution on {1, 2, ...}
        gaps = np.floor(np.log1p(-rng.random(m)) / log_q).astype(np.int64) + 1
        idx = pos + np.cumsum(gaps)
        inside = idx[idx < n]
        mask[inside] = True
        if idx[-1] >= n:
            return mask
        pos = int(idx[-1])


def sample_link_mask(p_tilde: float, t_max: int, rng: np.random.Generator) -> LinkMask:
    """Break each of the 2 * t_max links independently with probability ``p_tilde``."""
    _check_prob(p_tilde, "p_tilde")
    return LinkMask(t_max, _bernoulli(p_tilde, 2 * t_max, rng))


def history_offset(s: int) -> int:
    """Start of step ``s`` in a flat link history (step s covers 2 * (s + 1) links)."""
    return s * (s + 1)


def sample_link_history(p_tilde: float, steps: int, rng: np.random.Generator) -> NDArray[np.bool_]:
    """Broken-link flags for ``steps`` consecutive steps, restricted to the light cone.

    Step ``s`` only needs the links x = -(s+1) .. s, i.e. a mask of half-width
    s + 1. They are stored back to back; step ``s`` starts at
    :func:`history_offset`.
    """
    _check_prob(p_tilde, "p_tilde")
    return _bernoulli(p_tilde, steps * (steps + 1), rng)


def history_mask(history: NDArray[np.bool_], s: int, t_max: int) -> LinkMask:
    """Embed step ``s`` of a link history into a full lattice mask of half-width ``t_max``."""
    h = s + 1
    if h > t_max:
        raise LatticeBoundsError(f"step {s} needs links beyond t_max={t_max}")
    broken = np.zeros(2 * t_max, dtype=bool)
    off = history_offset(s)
    broken[t_max - h : t_max + h] = history[off : off + 2 * h]
    return LinkMask(t_max, broken)


def step_broken_links(state: WalkerState, theta: float, mask: LinkMask) -> WalkerState:
    """Coin, then shift with flux across broken links diverted in place."""
    if mask.t_max != state.t_max:
        raise ValueError("link mask and state use different lattices")
    if state.t >= state.t_max:
        raise LatticeBoundsError(
            f"light cone t={state.t} reaches the lattice edge (t_max={state.t_max})"
        )
    coined = apply_coin(state, theta)
    ap, bp = coined.a, coined.b
    broken = mask.broken
    a = np.zeros_like(ap)
    b = np.zeros_like(bp)
    # right mover at index i crosses link i; left mover at index i crosses link i-1
    a[1:] = np.where(broken, 0.0, ap[:-1])
    b[:-1] = np.where(broken, 0.0, bp[1:])
    b[:-1] += np.where(broken, ap[:-1], 0.0)
    a[1:] += np.where(broken, bp[1:], 0.0)
    return WalkerState(state.t_max, a, b, state.t + 1)

