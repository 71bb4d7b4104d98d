# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Fock-space kernels; same API as ``_pykernels``."""

import math

import numpy as np

cimport cython
from libc.math cimport exp, sqrt


def grade_count(int n_sites, long n):
    if n < 0:
        return 0
    return math.comb(n + n_sites - 1, n_sites - 1)


def grade_states(int n_sites, long n):
    cdef long count = grade_count(n_sites, n)
    out_arr = np.zeros((count, n_sites), dtype=np.int64)
    cdef long[:, ::1] out = out_arr
    cdef long[::1] cur = np.zeros(n_sites, dtype=np.int64)
    cdef long row, i, j, rest
    if count == 0:
        return out_arr
    # odometer over compositions in ascending lex order; the last entry absorbs the rest
    cur[n_sites - 1] = n
    for row in range(count):
        for j in range(n_sites):
            out[row, j] = cur[j]
        if row == count - 1:
            break
        # rightmost i <= V-2 whose tail sum is positive takes one unit from the tail
        i = n_sites - 2
        rest = cur[n_sites - 1]
        while rest == 0:
            rest += cur[i]
            i -= 1
        cur[i] += 1
        for j in range(i + 1, n_sites):
            cur[j] = 0
        cur[n_sites - 1] = rest - 1
    return out_arr


cdef long[:, ::1] _binom_table(long nmax, long kmax):
    tab_arr = np.zeros((nmax + 1, kmax + 1), dtype=np.int64)
    cdef long[:, ::1] tab = tab_arr
    cdef long a, b
    for a in range(nmax + 1):
        tab[a, 0] = 1
        for b in range(1, min(a, kmax) + 1):
            tab[a, b] = tab[a - 1, b - 1] + tab[a - 1, b]
    return tab


def rank_states(states, long n):
    cdef long[:, ::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef long count = st.shape[0]
    cdef int n_sites = st.shape[1]
    ranks_arr = np.zeros(count, dtype=np.int64)
    cdef long[::1] ranks = ranks_arr
    if n_sites == 1 or count == 0:
        return ranks_arr
    cdef long[:, ::1] tab = _binom_table(n + n_sites, n_sites)
    cdef long r, rem, s_i, p, acc
    cdef int i
    for r in range(count):
        rem = n
        acc = 0
        for i in range(n_sites - 1):
            p = n_sites - i - 2
            s_i = st[r, i]
            acc += tab[rem + p + 1, p + 1] - tab[rem - s_i + p + 1, p + 1]
            rem -= s_i
        ranks[r] = acc
    return ranks_arr


cdef inline long _rank_one(long[::1] s, long n, int n_sites, long[:, ::1] tab):
    cdef long rem = n, acc = 0, p
    cdef int i
    for i in range(n_sites - 1):
        p = n_sites - i - 2
        acc += tab[rem + p + 1, p + 1] - tab[rem - s[i] + p + 1, p + 1]
        rem -= s[i]
    return acc


def second_quantize_block(states, long n, B):
    Bc = np.asarray(B)
    is_complex = np.iscomplexobj(Bc)
    cdef double complex[:, ::1] Bv = np.ascontiguousarray(Bc, dtype=complex)
    cdef long[:, ::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef long count = st.shape[0]
    cdef int n_sites = st.shape[1]
    out_arr = np.zeros((count, count), dtype=complex)
    cdef double complex[:, ::1] out = out_arr
    if count == 0:
        return out_arr if is_complex else out_arr.real.copy()
    cdef long[:, ::1] tab = _binom_table(n + n_sites, n_sites)
    cdef long[::1] tgt = np.zeros(n_sites, dtype=np.int64)
    cdef long c, row, j
    cdef int x, y
    cdef double amp
    for c in range(count):
        for y in range(n_sites):
            if st[c, y] == 0:
                continue
            for x in range(n_sites):
                if Bv[x, y] == 0:
                    continue
                for j in range(n_sites):
                    tgt[j] = st[c, j]
                tgt[y] -= 1
                tgt[x] += 1
                amp = sqrt(<double>st[c, y] * <double>tgt[x])
                row = _rank_one(tgt, n, n_sites, tab)
                out[row, c] += Bv[x, y] * amp
    return out_arr if is_complex else out_arr.real.copy()


def lowering_map(states, long n, int x):
    cdef long[:, ::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef long count = st.shape[0]
    cdef int n_sites = st.shape[1]
    cdef long nnz = 0, c, j, k = 0
    for c in range(count):
        if st[c, x] > 0:
            nnz += 1
    rows_arr = np.zeros(nnz, dtype=np.int64)
    cols_arr = np.zeros(nnz, dtype=np.int64)
    vals_arr = np.zeros(nnz)
    if nnz == 0:
        return rows_arr, cols_arr, vals_arr
    cdef long[::1] rows = rows_arr
    cdef long[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr
    cdef long[:, ::1] tab = _binom_table(n + n_sites, n_sites)
    cdef long[::1] tgt = np.zeros(n_sites, dtype=np.int64)
    for c in range(count):
        if st[c, x] == 0:
            continue
        for j in range(n_sites):
            tgt[j] = st[c, j]
        vals[k] = sqrt(<double>tgt[x])
        tgt[x] -= 1
        rows[k] = _rank_one(tgt, n - 1, n_sites, tab)
        cols[k] = c
        k += 1
    return rows_arr, cols_arr, vals_arr


def laguerre_diagonal(double x, long nmax):
    out_arr = np.empty(nmax + 1)
    cdef double[::1] out = out_arr
    cdef double lag = 1.0, diff = 1.0, pre = exp(-x / 2)
    cdef long k
    out[0] = pre
    for k in range(nmax):
        diff = (k * diff - x * lag) / (k + 1)
        lag += diff
        out[k + 1] = lag * pre
    return out_arr


def displacement_matrix(alpha, long nmax):
    cdef double complex a = complex(alpha)
    cdef double x = a.real * a.real + a.imag * a.imag
    cdef long size = nmax + 1
    out_arr = np.zeros((size, size), dtype=complex)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex cl = exp(-x / 2), cu = exp(-x / 2)
    cdef double complex ma = -a.conjugate()
    cdef long k, m
    cdef double g, e, e_next
    for k in range(size):
        # walk diagonal n - m = k
        g = 1.0
        e = 1.0
        for m in range(size - k):
            out[m + k, m] = cl * g
            out[m, m + k] = cu * g
            if m + k == nmax:
                break
            e_next = ((m + k) * e - x * g) / sqrt(<double>(m + 1) * (m + k + 1))
            g = g * sqrt((m + 1.0) / (m + k + 1.0)) + e_next
            e = e_next
        cl = cl * a / sqrt(k + 1.0)
        cu = cu * ma / sqrt(k + 1.0)
    return out_arr
