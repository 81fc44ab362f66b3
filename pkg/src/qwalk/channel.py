"""
Bit-flip channel in the Pauli (Bloch) representation.

At wavenumber k the coin-reduced density operator chi = 1/2 I + sum_j r_j sigma_j
is advanced by the noisy step chi -> p U_k X chi X U_k^+ + (1-p) U_k chi U_k^+,
which acts linearly on R = (r1, r2, r3) through a real 3x3 transfer matrix M_k.
The long-time spreading rate follows from the k-average of the resolvent
G_k = (I - M_k)^-1 M_k; finite-time moments follow from powers of M_k.

Every k-space integral is realized as a uniform trapezoid average over
:class:`QuadratureGrid`. M_k depends on k only through cos 2k and sin 2k, so one
period is [-pi/2, pi/2) and the grid covers exactly that period by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DivergentRateError, QuadratureSingularityError
from .walk import InitialCoinState, check_theta

__all__ = [
    "QuadratureGrid",
    "TransferMatrix",
    "Regime",
    "SpreadingRate",
    "check_pauli_vector",
    "transfer_matrix_bitflip",
    "bitflip_matrices",
    "step_channel",
    "det_resolvent",
    "gbar33_closed",
    "spreading_rate_closed",
    "gbar_numeric",
    "moments_finite_time",
    "spectral_check",
    "kspace_average",
]

# |cos 2theta| below this is treated as the Hadamard point theta = +-pi/4
_HADAMARD_TOL = 1e-9


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    return p


@dataclass(frozen=True)
class QuadratureGrid:
    """Half-step offset uniform grid for averages over k.

    Nodes are ``k_j = -period/2 + (j + 1/2) * period / n``. No node ever lands
    on k = 0 or k = +-pi/2, where I - M_k is singular for theta in {0, +-pi/2}.
    ``period=2*pi`` gives the full Brillouin zone; the default ``pi`` matches
    the periodicity of M_k and doubles the resolution for the same ``n``.
    """

    n: int = 2048
    period: float = math.pi

    def __post_init__(self) -> None:
        # an odd count would put a node on k = 0
        if self.n < 2 or self.n % 2:
            raise ValueError(f"quadrature grid needs a positive even node count, got {self.n}")
        if not (math.isclose(self.period, math.pi) or math.isclose(self.period, 2 * math.pi)):
            raise ValueError("grid period must be pi or 2*pi")

    @property
    def nodes(self) -> NDArray[np.float64]:
        h = self.period / self.n
        return -self.period / 2 + (np.arange(self.n) + 0.5) * h

    @property
    def weights(self) -> NDArray[np.float64]:
        """Weights of the trapezoid rule for the measure dk (they sum to ``period``)."""
        return np.full(self.n, self.period / self.n)


@dataclass(frozen=True)
class TransferMatrix:
    m: NDArray[np.float64]
    k: float
    theta: float
    q: float


class Regime(str, Enum):
    GENERIC = "generic"
    HADAMARD_LIMIT = "hadamard_limit"
    THETA_ZERO = "theta_zero"
    THETA_HALF_PI = "theta_half_pi"
    CLASSICAL_P_HALF = "classical_p_half"


@dataclass(frozen=True)
class SpreadingRate:
    dq: float
    regime: Regime


def check_pauli_vector(r: ArrayLike) -> NDArray[np.float64]:
    """Validate a Bloch vector (r1, r2, r3) against the bound |R|^2 <= 1/4."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3,):
        raise ValueError("Pauli vector must have three components")
    if float(r @ r) > 0.25 + 1e-12:
        raise ValueError("Pauli vector lies outside the Bloch ball |R|^2 <= 1/4")
    return r


def kspace_average(values: ArrayLike, axis: int = 0) -> NDArray[np.float64] | float:
    """Average over quadrature nodes along ``axis`` with exactly rounded sums.

    math.fsum makes the reduction independent of node order.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[axis]
    out = np.apply_along_axis(math.fsum, axis, values) / n
    return float(out) if np.ndim(out) == 0 else out


def bitflip_matrices(k: ArrayLike, theta: float, p: float) -> NDArray[np.float64]:
    """Stack of M_k for every wavenumber in ``k``; shape ``k.shape + (3, 3)``."""
    theta = check_theta(theta)
    q = 1.0 - 2.0 * _check_p(p)
    k = np.asarray(k, dtype=np.float64)
    c2t, s2t = math.cos(2 * theta), math.sin(2 * theta)
    c2k, s2k = np.cos(2 * k), np.sin(2 * k)
    m = np.zeros(k.shape + (3, 3))
    m[..., 0, 0] = -c2t * c2k
    m[..., 0, 1] = q * s2k
    m[..., 0, 2] = q * s2t * c2k
    m[..., 1, 0] = -c2t * s2k
    m[..., 1, 1] = -q * c2k
    m[..., 1, 2] = q * s2t * s2k
    m[..., 2, 0] = s2t
    m[..., 2, 2] = q * c2t
    return m


def transfer_matrix_bitflip(k: float, theta: float, p: float) -> TransferMatrix:
    """M_k for the bit-flip channel with flip probability ``p`` (q = 1 - 2p)."""
    if not -math.pi <= k <= math.pi:
        raise ValueError(f"wavenumber must lie in [-pi, pi], got {k!r}")
    m = bitflip_matrices(k, theta, p)
    return TransferMatrix(m=m, k=float(k), theta=float(theta), q=1.0 - 2.0 * p)


def step_channel(r: ArrayLike, tm: TransferMatrix) -> NDArray[np.float64]:
    """Advance a Bloch vector one noisy step: R' = M_k R."""
    return tm.m @ np.asarray(r, dtype=np.float64)


def det_resolvent(k: ArrayLike, theta: float, p: float) -> NDArray[np.float64] | float:
    """det(I - M_k) = (1 - q^2)(1 + cos 2theta cos 2k)."""
    theta = check_theta(theta)
    p = _check_p(p)
    one_minus_q2 = 4.0 * p * (1.0 - p)
    out = one_minus_q2 * (1.0 + math.cos(2 * theta) * np.cos(2 * np.asarray(k, dtype=np.float64)))
    return float(out) if np.ndim(out) == 0 else out


def _coin_bracket(theta: float) -> float:
    """(1 - |sin 2theta|) / cos 2theta with its removable singularity filled in."""
    c2t = math.cos(2 * theta)
    if abs(c2t) < _HADAMARD_TOL:
        return 0.0
    if theta == 0.0:
        return 1.0
    if abs(theta) == math.pi / 2:
        return -1.0
    return (1.0 - abs(math.sin(2 * theta))) / c2t


def _check_open_p(p: float) -> float:
    p = _check_p(p)
    if p == 0.0 or p == 1.0:
        raise DivergentRateError(
            f"p={p} is a coherent walk: variance grows quadratically and D_q diverges"
        )
    return p


def gbar33_closed(theta: float, p: float) -> float:
    """k-averaged resolvent element G_33 in closed form."""
    theta = check_theta(theta)
    p = _check_open_p(p)
    q = 1.0 - 2.0 * p
    return q / (4.0 * p * (1.0 - p)) * (q + _coin_bracket(theta))


def _regime(theta: float, p: float) -> Regime:
    if p == 0.5:
        return Regime.CLASSICAL_P_HALF
    if abs(math.cos(2 * theta)) < _HADAMARD_TOL:
        return Regime.HADAMARD_LIMIT
    if theta == 0.0:
        return Regime.THETA_ZERO
    if abs(theta) == math.pi / 2:
        return Regime.THETA_HALF_PI
    return Regime.GENERIC


def spreading_rate_closed(theta: float, p: float) -> SpreadingRate:
    """Asymptotic spreading rate D_q = 1 + 2 Gbar_33 of the bit-flip walk.

    Raises
    ------
    DivergentRateError
        For p in {0, 1}, where the walk is coherent.
    """
    g = gbar33_closed(theta, p)
    return SpreadingRate(dq=1.0 + 2.0 * g, regime=_regime(float(theta), float(p)))


def gbar_numeric(theta: float, p: float, grid: QuadratureGrid | None = None) -> NDArray[np.float64]:
    """Trapezoid average of G_k = (I - M_k)^-1 M_k over ``grid``."""
    grid = grid or QuadratureGrid()
    p = _check_open_p(p)
    k = grid.nodes
    m = bitflip_matrices(k, theta, p)
    det = det_resolvent(k, theta, p)
    bad = np.abs(det) < 1e-14
    if np.any(bad):
        raise QuadratureSingularityError(f"I - M_k is singular at k = {k[bad][0]!r}")
    g = np.linalg.solve(np.eye(3) - m, m)
    return kspace_average(g, axis=0)


def moments_finite_time(
    initial: ArrayLike | InitialCoinState,
    theta: float,
    p: float,
    t: int,
    grid: QuadratureGrid | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Exact first and second position moments of the channel walk for times 0..t.

    Uses <x>(t) = 2 avg_k sum_{j<=t} (M_k^j R)_3 and
    <x^2>(t) = t + 2 avg_k sum_{j<=t} sum_{j'<j} (M_k^(j-j') e_3)_3.
    Both arrays have length ``t + 1`` and are indexed by time.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    grid = grid or QuadratureGrid()
    if isinstance(initial, InitialCoinState):
        r0 = initial.bloch()
    else:
        r0 = check_pauli_vector(initial)
    p = _check_open_p(p)

    m = bitflip_matrices(grid.nodes, theta, p)
    n = grid.n
    v = np.tile(r0, (n, 1))  # M^j R per node
    w = np.tile([0.0, 0.0, 1.0], (n, 1))  # M^j e3 per node
    first = np.zeros(n)  # sum_{j<=t} (M^j R)_3
    partial = np.zeros(n)  # S_{t-1} = sum_{1<=m<t} (M^m e3)_3
    double = np.zeros(n)  # sum_{j<=t} S_{j-1}
    first_hist = np.zeros((t + 1, n))
    double_hist = np.zeros((t + 1, n))
    for j in range(1, t + 1):
        v = np.einsum("nab,nb->na", m, v)
        first += v[:, 2]
        double += partial
        w = np.einsum("nab,nb->na", m, w)
        partial += w[:, 2]
        first_hist[j] = first
        double_hist[j] = double

    mean = 2.0 * kspace_average(first_hist, axis=1)
    second = np.arange(t + 1, dtype=np.float64) + 2.0 * kspace_average(double_hist, axis=1)
    return mean, second


def spectral_check(theta: float, p: float, grid: QuadratureGrid | None = None) -> float:
    """Largest eigenvalue modulus of M_k over the grid nodes."""
    grid = grid or QuadratureGrid()
    m = bitflip_matrices(grid.nodes, theta, p)
    return float(np.max(np.abs(np.linalg.eigvals(m))))
