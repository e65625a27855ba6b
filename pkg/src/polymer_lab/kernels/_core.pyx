# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled lattice kernels; semantics mirror kernels/fallback.py.

Zero-temperature dp_solve is bit-identical to the fallback (same candidate
order, same tie rule).  The log-space kernels agree with the fallback only
to ~1e-12 relative: summation order and libm exp differ in the last ulp.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


def dp_solve(double[:, ::1] site_cost, double[:, ::1] edge_cost,
             int d_lo, int j_src, int j_dst):
    cdef int n = site_cost.shape[0]
    cdef int S = site_cost.shape[1]
    cdef int D = edge_cost.shape[1]
    cdef int d_hi = d_lo + D - 1
    cdef int k, j, src, lo, hi, arg
    cdef double cand, best

    L_arr = np.full(S, np.inf)
    Ltil_arr = np.empty(S)
    bp_arr = np.zeros((n, S), dtype=np.int32)
    cdef double[::1] L = L_arr
    cdef double[::1] Ltil = Ltil_arr
    cdef int[:, ::1] bp = bp_arr
    L[j_src] = 0.0

    for k in range(n):
        for j in range(S):
            Ltil[j] = L[j] + site_cost[k, j]
        for j in range(S):
            lo = j - d_hi
            if lo < 0:
                lo = 0
            hi = j - d_lo
            if hi > S - 1:
                hi = S - 1
            best = INFINITY
            arg = lo
            for src in range(lo, hi + 1):
                cand = Ltil[src] + edge_cost[k, j - src - d_lo]
                if cand < best:
                    best = cand
                    arg = src
            L[j] = best
            bp[k, j] = arg

    path_arr = np.empty(n + 1, dtype=np.int64)
    cdef long long[::1] path = path_arr
    path[n] = j_dst
    for k in range(n - 1, -1, -1):
        path[k] = bp[k, path[k + 1]]
    return float(L[j_dst]), path_arr


def transfer_forward(double[:, ::1] site_cost, double[:, ::1] edge_cost,
                     int d_lo, double log_dx, int j_src):
    cdef int n = site_cost.shape[0]
    cdef int S = site_cost.shape[1]
    cdef int D = edge_cost.shape[1]
    cdef int d_hi = d_lo + D - 1
    cdef int k, j, src, lo, hi
    cdef double m, s, val, add

    L_arr = np.full((n + 1, S), -np.inf)
    Ltil_arr = np.empty(S)
    cdef double[:, ::1] L = L_arr
    cdef double[::1] Ltil = Ltil_arr
    L[0, j_src] = 0.0

    for k in range(n):
        for j in range(S):
            Ltil[j] = L[k, j] - site_cost[k, j]
        add = log_dx if k < n - 1 else 0.0
        for j in range(S):
            lo = j - d_hi
            if lo < 0:
                lo = 0
            hi = j - d_lo
            if hi > S - 1:
                hi = S - 1
            m = -INFINITY
            for src in range(lo, hi + 1):
                val = Ltil[src] - edge_cost[k, j - src - d_lo]
                if val > m:
                    m = val
            if m == -INFINITY:
                continue
            s = 0.0
            for src in range(lo, hi + 1):
                s += exp(Ltil[src] - edge_cost[k, j - src - d_lo] - m)
            L[k + 1, j] = m + log(s) + add
    return L_arr


def transfer_backward(double[:, ::1] site_cost, double[:, ::1] edge_cost,
                      int d_lo, double log_dx, int j_dst):
    cdef int n = site_cost.shape[0]
    cdef int S = site_cost.shape[1]
    cdef int D = edge_cost.shape[1]
    cdef int d_hi = d_lo + D - 1
    cdef int k, j, tgt, lo, hi
    cdef double m, s, val, add

    R_arr = np.full((n + 1, S), -np.inf)
    cdef double[:, ::1] R = R_arr
    R[n, j_dst] = 0.0

    for k in range(n - 1, -1, -1):
        add = log_dx if k < n - 1 else 0.0
        for j in range(S):
            lo = j + d_lo
            if lo < 0:
                lo = 0
            hi = j + d_hi
            if hi > S - 1:
                hi = S - 1
            m = -INFINITY
            for tgt in range(lo, hi + 1):
                val = R[k + 1, tgt] - edge_cost[k, tgt - j - d_lo]
                if val > m:
                    m = val
            if m == -INFINITY:
                continue
            s = 0.0
            for tgt in range(lo, hi + 1):
                s += exp(R[k + 1, tgt] - edge_cost[k, tgt - j - d_lo] - m)
            R[k, j] = m + log(s) - site_cost[k, j] + add
    return R_arr


def transfer_marginals(double[:, ::1] L, double[:, ::1] R,
                       double[:, ::1] site_cost, double[:, ::1] edge_cost,
                       int d_lo, double log_dx, double log_z):
    cdef int n = site_cost.shape[0]
    cdef int S = site_cost.shape[1]
    cdef int D = edge_cost.shape[1]
    cdef int k, j, c, tgt
    cdef double add, base, lp

    pdelta_arr = np.zeros((n, D))
    psite_arr = np.zeros((n, S))
    cdef double[:, ::1] pdelta = pdelta_arr
    cdef double[:, ::1] psite = psite_arr

    for k in range(n):
        add = log_dx if k < n - 1 else 0.0
        for j in range(S):
            if L[k, j] == -INFINITY:
                continue
            base = L[k, j] - site_cost[k, j] + add - log_z
            for c in range(D):
                tgt = j + d_lo + c
                if tgt < 0 or tgt > S - 1:
                    continue
                lp = base - edge_cost[k, c] + R[k + 1, tgt]
                if lp == -INFINITY:
                    continue
                lp = exp(lp)
                pdelta[k, c] += lp
                psite[k, j] += lp
    return pdelta_arr, psite_arr
