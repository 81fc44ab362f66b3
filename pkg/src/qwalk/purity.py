"""
Exact density-matrix evolution of the bit-flip walk and its purity.

rho is stored as an array indexed [c, x, c', x'] (chirality, site) holding
only the light cone, so it grows by one site on each side per step. A step is

    rho -> (1 - p) U rho U^+ + p X U rho U^+ X        (order="after")
    rho -> U [(1 - p) rho + p X rho X] U^+             (order="before")

"after" matches the trajectory simulation (flip after the full step);
"before" is the Fourier-space channel used by :mod:`qwalk.channel`.
"""

from __future__ import annotations

import math
from collections.abc import Iterator

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import DimensionGuardError
from .walk import InitialCoinState, check_theta

__all__ = [
    "MAX_DIM",
    "evolve_density_bitflip",
    "density_moments",
    "purity_exact_bitflip",
    "purity_symmetry_check",
]

MAX_DIM = 4096


def _dagger(rho: NDArray[np.complex128]) -> NDArray[np.complex128]:
    return rho.conj().transpose(2, 3, 0, 1)


def evolve_density_bitflip(
    theta: float,
    p: float,
    t_final: int,
    initial: InitialCoinState | None = None,
    order: str = "after",
    max_dim: int = MAX_DIM,
) -> Iterator[NDArray[np.complex128]]:
    """Yield rho_t for t = 0..t_final; rho_t has shape (2, 2t+1, 2, 2t+1)."""
    theta = check_theta(theta)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if order not in ("after", "before"):
        raise ValueError("order must be 'after' or 'before'")
    dim = 2 * (2 * t_final + 1)
    if dim > max_dim:
        raise DimensionGuardError(
            f"density matrix of dimension {dim} exceeds the guard ({max_dim}); lower t_final"
        )
    initial = initial or InitialCoinState()
    c, s = math.cos(theta), math.sin(theta)

    psi = np.array([initial.a0, initial.b0], dtype=np.complex128)
    rho = np.einsum("i,j->ij", psi, psi.conj()).reshape(2, 1, 2, 1)
    yield rho
    for _ in range(t_final):
        rho, _ = _kernels.density_step(rho, c, s, float(p), order == "before")
        yield rho


def density_moments(rho: NDArray[np.complex128]) -> tuple[float, float, float]:
    """(trace, <x>, <x^2>) of a light-cone density matrix."""
    h = (rho.shape[1] - 1) // 2
    diag = np.einsum("cxcx->x", rho).real
    x = np.arange(-h, h + 1, dtype=np.float64)
    return float(diag.sum()), float(diag @ x), float(diag @ (x * x))


def purity_exact_bitflip(
    theta: float,
    p: float,
    t_final: int,
    t_max: int | None = None,
    initial: InitialCoinState | None = None,
    max_dim: int = MAX_DIM,
    validate: bool = False,
) -> NDArray[np.float64]:
    """Purity tr(rho_t^2) for t = 0..t_final of the bit-flip walk (flip after step).

    ``t_max`` only sets the lattice used for the dimension guard and must be
    at least ``t_final``. With ``validate`` the trace and Hermiticity are
    checked at every step and positivity of the final rho by diagonalization.
    """
    t_max = t_final if t_max is None else t_max
    if t_final > t_max:
        raise ValueError("t_final must not exceed t_max")
    if 2 * (2 * t_max + 1) > max_dim:
        raise DimensionGuardError(
            f"density matrix of dimension {2 * (2 * t_max + 1)} exceeds the guard ({max_dim})"
        )
    theta = check_theta(theta)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    initial = initial or InitialCoinState()
    c, s = math.cos(theta), math.sin(theta)
    psi = np.array([initial.a0, initial.b0], dtype=np.complex128)
    rho = np.einsum("i,j->ij", psi, psi.conj()).reshape(2, 1, 2, 1)
    out = np.empty(t_final + 1)
    out[0] = np.vdot(rho, rho).real
    for t in range(1, t_final + 1):
        rho, out[t] = _kernels.density_step(rho, c, s, float(p), False)
        if validate:
            tr = np.einsum("cxcx->", rho)
            if abs(tr - 1.0) > 1e-10:
                raise ArithmeticError(f"trace drifted to {tr!r} at t={t}")
            if np.max(np.abs(rho - _dagger(rho))) > 1e-10:
                raise ArithmeticError(f"rho lost Hermiticity at t={t}")
    if validate:
        d = rho.shape[0] * rho.shape[1]
        low = np.linalg.eigvalsh(rho.reshape(d, d))[0]
        if low < -1e-10:
            raise ArithmeticError(f"rho is not positive semidefinite (min eigenvalue {low!r})")
    return out


def purity_symmetry_check(
    p: float, theta: float = math.pi / 4, t_final: int = 200, tol: float = 1e-10
) -> bool:
    """True if the purity series for ``p`` and ``1 - p`` agree within ``tol``.

    Exchanging p and 1 - p folds a flip into every step, which turns the coin
    angle theta into pi/2 - theta; purity is also even in theta. The two
    series therefore coincide at theta = +-pi/4 (the default) but not at a
    generic angle, where purity(1 - p, theta) = purity(p, pi/2 - |theta|).
    """
    a = purity_exact_bitflip(theta, p, t_final)
    b = purity_exact_bitflip(theta, 1.0 - p, t_final)
    return bool(np.max(np.abs(a - b)) < tol)
