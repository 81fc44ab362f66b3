"""
Coherent discrete-time quantum walk on a bounded line.

The walker lives on sites x = -t_max .. t_max with two chirality amplitudes per
site: ``a`` (right movers, |R>) and ``b`` (left movers, |L>). One step is the
coin U_C(theta) applied at every site followed by the conditional shift S_0.

The lattice is preallocated and never wraps. Amplitudes are exactly zero
outside the light cone |x| <= t, so a state built for ``t_max`` steps behaves
exactly like a walk on the infinite line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import LatticeBoundsError

__all__ = [
    "InitialCoinState",
    "WalkerState",
    "check_theta",
    "coin_matrix",
    "origin_state",
    "apply_coin",
    "apply_shift",
    "step",
    "evolve_coherent",
    "position_distribution",
    "moments",
]

_SQRT_HALF = 1.0 / math.sqrt(2.0)


def check_theta(theta: float) -> float:
    """Validate a coin angle (radians) and return it as float."""
    theta = float(theta)
    # admit the endpoints when they come from e.g. 0.5 * math.pi
    if not -math.pi / 2 - 1e-12 <= theta <= math.pi / 2 + 1e-12:
        raise ValueError(f"coin angle must lie in [-pi/2, pi/2], got {theta!r}")
    return theta


@dataclass(frozen=True)
class InitialCoinState:
    """Coin state (a0, b0) of a walker localized at the origin."""

    a0: complex = _SQRT_HALF
    b0: complex = 1j * _SQRT_HALF

    def __post_init__(self) -> None:
        norm = abs(self.a0) ** 2 + abs(self.b0) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"initial coin state is not normalized (|a0|^2+|b0|^2 = {norm!r})")

    def bloch(self) -> NDArray[np.float64]:
        """Pauli components (r1, r2, r3) of |chi><chi| = 1/2 I + sum r_j sigma_j."""
        a, b = complex(self.a0), complex(self.b0)
        ab = a.conjugate() * b
        return np.array([ab.real, ab.imag, (abs(a) ** 2 - abs(b) ** 2) / 2.0])


@dataclass
class WalkerState:
    """Pure walker state on the sites -t_max..t_max after ``t`` steps."""

    t_max: int
    a: NDArray[np.complex128]
    b: NDArray[np.complex128]
    t: int = 0
    x: NDArray[np.int64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        size = 2 * self.t_max + 1
        if self.a.shape != (size,) or self.b.shape != (size,):
            raise ValueError(f"amplitude arrays must have shape ({size},)")
        self.x = np.arange(-self.t_max, self.t_max + 1)

    def copy(self) -> WalkerState:
        return WalkerState(self.t_max, self.a.copy(), self.b.copy(), self.t)

    def index(self, x: int) -> int:
        """Array index of lattice site ``x``."""
        return x + self.t_max

    def norm_squared(self) -> float:
        return float(np.vdot(self.a, self.a).real + np.vdot(self.b, self.b).real)


def coin_matrix(theta: float) -> NDArray[np.complex128]:
    """Return the one-parameter coin [[cos, sin], [sin, -cos]] at angle ``theta``."""
    theta = check_theta(theta)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [s, -c]], dtype=np.complex128)


def origin_state(t_max: int, initial: InitialCoinState | None = None) -> WalkerState:
    """Walker localized at x = 0 with coin state ``initial`` on a lattice of half-width ``t_max``."""
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    initial = initial or InitialCoinState()
    a = np.zeros(2 * t_max + 1, dtype=np.complex128)
    b = np.zeros_like(a)
    a[t_max] = initial.a0
    b[t_max] = initial.b0
    return WalkerState(t_max, a, b, 0)


def apply_coin(state: WalkerState, theta: float) -> WalkerState:
    """Apply U_C(theta) at every site; ``t`` is unchanged."""
    theta = check_theta(theta)
    c, s = math.cos(theta), math.sin(theta)
    a = c * state.a + s * state.b
    b = s * state.a - c * state.b
    return WalkerState(state.t_max, a, b, state.t)


def apply_shift(state: WalkerState) -> WalkerState:
    """Move right movers one site right and left movers one site left."""
    if state.t >= state.t_max:
        raise LatticeBoundsError(
            f"light cone t={state.t} reaches the lattice edge (t_max={state.t_max})"
        )
    a = np.zeros_like(state.a)
    b = np.zeros_like(state.b)
    a[1:] = state.a[:-1]
    b[:-1] = state.b[1:]
    return WalkerState(state.t_max, a, b, state.t + 1)


def step(state: WalkerState, theta: float) -> WalkerState:
    """One coherent step, coin then shift."""
    return apply_shift(apply_coin(state, theta))


def evolve_coherent(
    initial: InitialCoinState | None,
    theta: float,
    steps: int,
    t_max: int | None = None,
) -> WalkerState:
    """Evolve a walker from the origin for ``steps`` coherent steps.

    ``t_max`` defaults to ``steps``; passing a smaller value raises
    :class:`LatticeBoundsError` once the light cone reaches the edge.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    state = origin_state(steps if t_max is None else t_max, initial)
    for _ in range(steps):
        state = step(state, theta)
    return state


def position_distribution(state: WalkerState) -> NDArray[np.float64]:
    """P(x) = |a_x|^2 + |b_x|^2 over the lattice sites ``state.x``."""
    return state.a.real**2 + state.a.imag**2 + state.b.real**2 + state.b.imag**2


def moments(state: WalkerState) -> tuple[float, float, float]:
    """Return (mean, second moment, variance) of the position distribution."""
    prob = position_distribution(state)
    x = state.x.astype(np.float64)
    mean = float(np.dot(prob, x))
    second = float(np.dot(prob, x * x))
    return mean, second, max(second - mean * mean, 0.0)
