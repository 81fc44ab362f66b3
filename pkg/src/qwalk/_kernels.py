"""Fused single-trajectory kernels (coin + shift + noise + moments in one pass).

Only the light cone |x| <= t is touched, so a trajectory of T steps costs
O(T^2) site updates instead of O(T * lattice). Real and imaginary parts live
in separate arrays so the inner loops vectorize.
"""

import numba
import numpy as np

COHERENT = 0
BITFLIP = 1
BROKEN_LINKS = 2


# The loops below run over zero-based slice views: with non-negative indices
# numba drops the wraparound checks and vectorizes.


@numba.njit(cache=True)
def _coin_shift(ar, ai, br, bi, nar, nai, nbr, nbi, c, s, lo, hi):
    m = hi - lo + 1
    nar[lo] = 0.0
    nai[lo] = 0.0
    nbr[hi] = 0.0
    nbi[hi] = 0.0
    a_r, a_i, b_r, b_i = ar[lo : hi + 1], ai[lo : hi + 1], br[lo : hi + 1], bi[lo : hi + 1]
    na_r, na_i = nar[lo + 1 : hi + 2], nai[lo + 1 : hi + 2]
    nb_r, nb_i = nbr[lo - 1 : hi], nbi[lo - 1 : hi]
    for i in range(m):
        na_r[i] = c * a_r[i] + s * b_r[i]
        na_i[i] = c * a_i[i] + s * b_i[i]
        nb_r[i] = s * a_r[i] - c * b_r[i]
        nb_i[i] = s * a_i[i] - c * b_i[i]


@numba.njit(cache=True)
def _coin_shift_links(ar, ai, br, bi, nar, nai, nbr, nbi, c, s, lo, hi, links, off):
    # Gather form: the right mover arriving at site j crosses link (j-1, j);
    # when that link is broken site j instead keeps its own coined left mover.
    # Step links are numbered 0..m from link (lo-1, lo).
    m = hi - lo + 1
    step_links = links[off : off + m + 1]
    a_r, a_i = ar[lo - 1 : hi + 2], ai[lo - 1 : hi + 2]
    b_r, b_i = br[lo - 1 : hi + 2], bi[lo - 1 : hi + 2]
    na_r, na_i = nar[lo - 1 : hi + 2], nai[lo - 1 : hi + 2]
    nb_r, nb_i = nbr[lo - 1 : hi + 2], nbi[lo - 1 : hi + 2]
    na_r[0] = 0.0
    na_i[0] = 0.0
    nb_r[m + 1] = 0.0
    nb_i[m + 1] = 0.0
    for i in range(m + 1):
        # site j = lo + i (view index i + 1) receives a through link i
        brk = step_links[i]
        na_r[i + 1] = (s * a_r[i + 1] - c * b_r[i + 1]) if brk else (c * a_r[i] + s * b_r[i])
        na_i[i + 1] = (s * a_i[i + 1] - c * b_i[i + 1]) if brk else (c * a_i[i] + s * b_i[i])
    for i in range(m + 1):
        # site j = lo - 1 + i (view index i) receives b through link i
        brk = step_links[i]
        nb_r[i] = (c * a_r[i] + s * b_r[i]) if brk else (s * a_r[i + 1] - c * b_r[i + 1])
        nb_i[i] = (c * a_i[i] + s * b_i[i]) if brk else (s * a_i[i + 1] - c * b_i[i + 1])


@numba.njit(cache=True)
def _moments(ar, ai, br, bi, lo, hi, center):
    a_r, a_i, b_r, b_i = ar[lo : hi + 1], ai[lo : hi + 1], br[lo : hi + 1], bi[lo : hi + 1]
    x0 = float(lo - center)
    m1 = 0.0
    m2 = 0.0
    for i in range(hi - lo + 1):
        prob = a_r[i] * a_r[i] + a_i[i] * a_i[i] + b_r[i] * b_r[i] + b_i[i] * b_i[i]
        x = x0 + i
        m1 += prob * x
        m2 += prob * x * x
    return m1, m2


@numba.njit(cache=True)
def evolve_trajectory(a0, b0, c, s, steps, mode, flips, links, snap_times, snaps, mean_out, second_out):
    """Evolve one walker from the origin for ``steps`` steps.

    flips[t] (bit flip) or links[t*(t+1) : (t+1)*(t+2)] (broken links) hold the
    noise of step t. Writes <x> and <x^2> of every time 0..steps into
    ``mean_out``/``second_out`` and copies the state (2, 2*steps+1) into
    ``snaps[k]`` at time ``snap_times[k]``.
    """
    size = 2 * steps + 1
    center = steps
    ar = np.zeros(size)
    ai = np.zeros(size)
    br = np.zeros(size)
    bi = np.zeros(size)
    nar = np.zeros(size)
    nai = np.zeros(size)
    nbr = np.zeros(size)
    nbi = np.zeros(size)
    ar[center] = a0.real
    ai[center] = a0.imag
    br[center] = b0.real
    bi[center] = b0.imag
    mean_out[0] = 0.0
    second_out[0] = 0.0
    k_snap = 0
    if k_snap < snap_times.shape[0] and snap_times[k_snap] == 0:
        for i in range(size):
            snaps[k_snap, 0, i] = complex(ar[i], ai[i])
            snaps[k_snap, 1, i] = complex(br[i], bi[i])
        k_snap += 1

    for t in range(steps):
        lo = center - t
        hi = center + t
        if mode == BROKEN_LINKS:
            _coin_shift_links(ar, ai, br, bi, nar, nai, nbr, nbi, c, s, lo, hi, links, t * (t + 1))
        else:
            _coin_shift(ar, ai, br, bi, nar, nai, nbr, nbi, c, s, lo, hi)
        if mode == BITFLIP and flips[t]:
            ar, ai, br, bi, nar, nai, nbr, nbi = nbr, nbi, nar, nai, ar, ai, br, bi
        else:
            ar, ai, br, bi, nar, nai, nbr, nbi = nar, nai, nbr, nbi, ar, ai, br, bi

        m1, m2 = _moments(ar, ai, br, bi, lo - 1, hi + 1, center)
        mean_out[t + 1] = m1
        second_out[t + 1] = m2
        if k_snap < snap_times.shape[0] and snap_times[k_snap] == t + 1:
            for i in range(size):
                snaps[k_snap, 0, i] = complex(ar[i], ai[i])
                snaps[k_snap, 1, i] = complex(br[i], bi[i])
            k_snap += 1


@numba.njit(cache=True)
def density_step(rho, c, s, p, flip_before):
    """One bit-flip step of a light-cone density matrix rho[c, x, c', x'].

    Returns (rho', tr(rho'^2)); rho' has two more sites per axis. The flip
    mixing rho -> (1-p) rho + p X rho X is applied before the walk step when
    ``flip_before`` is set and after it otherwise.
    """
    n = rho.shape[1]
    q = 1.0 - p
    # rows: A[c, x, :, :] = U acting on the left index
    rows = np.empty((2, n + 2, 2, n), dtype=np.complex128)
    rows[0, :2] = 0.0
    rows[1, n:] = 0.0
    for x in range(n):
        for e in range(2):
            for y in range(n):
                v0 = rho[0, x, e, y]
                v1 = rho[1, x, e, y]
                if flip_before:
                    w0 = q * v0 + p * rho[1, x, 1 - e, y]
                    w1 = q * v1 + p * rho[0, x, 1 - e, y]
                    v0, v1 = w0, w1
                rows[0, x + 2, e, y] = c * v0 + s * v1
                rows[1, x, e, y] = s * v0 - c * v1
    # columns, then the optional flip mixing on both indices
    out = np.empty((2, n + 2, 2, n + 2), dtype=np.complex128)
    purity = 0.0
    for x in range(n + 2):
        for y in range(n + 2):
            b00 = 0j
            b01 = 0j
            b10 = 0j
            b11 = 0j
            if y >= 2:
                b00 = c * rows[0, x, 0, y - 2] + s * rows[0, x, 1, y - 2]
                b10 = c * rows[1, x, 0, y - 2] + s * rows[1, x, 1, y - 2]
            if y < n:
                b01 = s * rows[0, x, 0, y] - c * rows[0, x, 1, y]
                b11 = s * rows[1, x, 0, y] - c * rows[1, x, 1, y]
            if not flip_before:
                b00, b01, b10, b11 = (
                    q * b00 + p * b11,
                    q * b01 + p * b10,
                    q * b10 + p * b01,
                    q * b11 + p * b00,
                )
            out[0, x, 0, y] = b00
            out[0, x, 1, y] = b01
            out[1, x, 0, y] = b10
            out[1, x, 1, y] = b11
            purity += (
                b00.real * b00.real + b00.imag * b00.imag
                + b01.real * b01.real + b01.imag * b01.imag
                + b10.real * b10.real + b10.imag * b10.imag
                + b11.real * b11.real + b11.imag * b11.imag
            )
    return out, purity
