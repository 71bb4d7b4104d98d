"""Pure-Python/numpy implementations of the Fock-space kernels.

Selected by :mod:`bosegibbs.kernels` when the compiled ``_ckernels`` module is
unavailable. Every function here has an identical twin in ``_ckernels.pyx``.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np


def grade_count(n_sites: int, n: int) -> int:
    """Number of occupation vectors on ``n_sites`` sites with total ``n``."""
    if n < 0:
        return 0
    return math.comb(n + n_sites - 1, n_sites - 1)


def grade_states(n_sites: int, n: int) -> np.ndarray:
    """All occupation vectors with total ``n``, lexicographically ascending."""
    count = grade_count(n_sites, n)
    out = np.zeros((count, n_sites), dtype=np.int64)
    if n_sites == 1:
        out[0, 0] = n
        return out
    # stars and bars; lexicographic bar positions give lexicographic occupations
    row = 0
    for bars in combinations(range(n + n_sites - 1), n_sites - 1):
        prev = -1
        for i, b in enumerate(bars):
            out[row, i] = b - prev - 1
            prev = b
        out[row, n_sites - 1] = n + n_sites - 2 - prev
        row += 1
    return out


def _binom_table(nmax: int, kmax: int) -> np.ndarray:
    tab = np.zeros((nmax + 1, kmax + 1), dtype=np.int64)
    for a in range(nmax + 1):
        for b in range(min(a, kmax) + 1):
            tab[a, b] = math.comb(a, b)
    return tab


def rank_states(states: np.ndarray, n: int) -> np.ndarray:
    """Position of each row of ``states`` (all of total ``n``) in ``grade_states``."""
    states = np.asarray(states, dtype=np.int64)
    count, n_sites = states.shape
    ranks = np.zeros(count, dtype=np.int64)
    if n_sites == 1 or count == 0:
        return ranks
    tab = _binom_table(n + n_sites, n_sites)
    remaining = np.full(count, n, dtype=np.int64)
    for i in range(n_sites - 1):
        p = n_sites - i - 2
        s_i = states[:, i]
        # sum_{v < s_i} C(R - v + p, p) = C(R + p + 1, p + 1) - C(R - s_i + p + 1, p + 1)
        ranks += tab[remaining + p + 1, p + 1] - tab[remaining - s_i + p + 1, p + 1]
        remaining -= s_i
    return ranks


def second_quantize_block(states: np.ndarray, n: int, B: np.ndarray) -> np.ndarray:
    """Dense grade-``n`` block of ``sum_{xy} a*_x B_xy a_y``."""
    states = np.asarray(states, dtype=np.int64)
    B = np.asarray(B)
    count, n_sites = states.shape
    dtype = np.result_type(B.dtype, np.float64)
    out = np.zeros((count, count), dtype=dtype)
    if count == 0:
        return out
    cols = np.arange(count)
    for y in range(n_sites):
        occ_y = states[:, y]
        src = occ_y > 0
        if not np.any(src):
            continue
        for x in range(n_sites):
            b = B[x, y]
            if b == 0:
                continue
            tgt = states[src].copy()
            tgt[:, y] -= 1
            tgt[:, x] += 1
            amp = np.sqrt(occ_y[src] * tgt[:, x].astype(np.float64))
            rows = rank_states(tgt, n)
            np.add.at(out, (rows, cols[src]), b * amp)
    return out


def lowering_map(states: np.ndarray, n: int, x: int):
    """Sparse data of ``a_x`` from grade ``n`` into grade ``n - 1``.

    Returns ``(rows, cols, vals)`` with rows indexing grade ``n - 1``.
    """
    states = np.asarray(states, dtype=np.int64)
    cols = np.nonzero(states[:, x] > 0)[0]
    tgt = states[cols].copy()
    vals = np.sqrt(tgt[:, x].astype(np.float64))
    tgt[:, x] -= 1
    rows = rank_states(tgt, n - 1) if n > 0 else np.zeros(0, dtype=np.int64)
    return rows, cols.astype(np.int64), vals


def laguerre_diagonal(x: float, nmax: int) -> np.ndarray:
    """``exp(-x/2) L_n(x)`` for ``n = 0..nmax`` (diagonal of a displacement)."""
    x = float(x)
    out = np.empty(nmax + 1)
    lag = 1.0
    diff = 1.0
    out[0] = 1.0
    for k in range(nmax):
        # difference form keeps x explicit; the textbook three-term form
        # loses it to rounding once 2k+1 >> x
        diff = (k * diff - x * lag) / (k + 1)
        lag += diff
        out[k + 1] = lag
    return out * math.exp(-x / 2)


def displacement_matrix(alpha: complex, nmax: int) -> np.ndarray:
    """Exact ``<n| exp(alpha a* - conj(alpha) a) |m>`` for ``n, m <= nmax``.

    Generalized Laguerre recurrence along each diagonal ``n - m = k``,
    normalized by ``sqrt(m!/(m+k)!)`` so nothing overflows; vectorized over k.
    """
    alpha = complex(alpha)
    x = abs(alpha) ** 2
    size = nmax + 1
    ks = np.arange(size, dtype=np.float64)
    # c_k = exp(-x/2) alpha^k / sqrt(k!), underflows gracefully
    c_lower = np.empty(size, dtype=complex)
    c_upper = np.empty(size, dtype=complex)
    c_lower[0] = c_upper[0] = math.exp(-x / 2)
    for k in range(1, size):
        c_lower[k] = c_lower[k - 1] * alpha / math.sqrt(k)
        c_upper[k] = c_upper[k - 1] * (-alpha.conjugate()) / math.sqrt(k)
    out = np.zeros((size, size), dtype=complex)
    g = np.ones(size)
    e = np.ones(size)
    idx = np.arange(size)
    for m in range(size):
        live = size - m  # diagonals k with m + k <= nmax
        k = idx[:live]
        out[m + k, m] = c_lower[:live] * g[:live]
        out[m, m + k] = c_upper[:live] * g[:live]
        if m == nmax:
            break
        kk = ks[: live - 1]
        e_next = ((m + kk) * e[: live - 1] - x * g[: live - 1]) / np.sqrt((m + 1) * (m + kk + 1))
        g[: live - 1] = g[: live - 1] * np.sqrt((m + 1) / (m + kk + 1)) + e_next
        e[: live - 1] = e_next
    return out
