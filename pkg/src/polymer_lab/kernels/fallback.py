"""Pure-numpy lattice kernels.

Reference implementations of the hot recursions; the compiled lane in
``_core.pyx`` mirrors these semantics.  Shared conventions:

- ``site_cost``  float64 (n, S): cost attached to occupying node j when
  leaving slice k (slice n carries no site cost).
- ``edge_cost``  float64 (n, D): cost of the jump offset ``d_lo + c`` at
  step k -> k+1, column c = 0..D-1.
- node indices j live in [0, S); a path is an int array of length n+1.

Min-plus ties are broken toward the smallest source index j, which the
candidate matrices realize by ordering axis 1 by ascending source index
and taking the first minimum.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NEG_INF = -np.inf


def _window(padded, pad, d_hi, S, D):
    # rows: candidate values ordered by ascending source index
    return sliding_window_view(padded, D)[pad - d_hi: pad - d_hi + S]


def dp_solve(site_cost, edge_cost, d_lo, j_src, j_dst):
    """Min-plus forward recursion; returns (value, path).

    Unreachable targets carry +inf; the caller is responsible for pinning
    inside the window so the returned value is finite.
    """
    n, S = site_cost.shape
    D = edge_cost.shape[1]
    d_hi = d_lo + D - 1
    pad = max(d_hi, -d_lo, 0)
    edge_rev = np.ascontiguousarray(edge_cost[:, ::-1])

    L = np.full(S, np.inf)
    L[j_src] = 0.0
    bp = np.empty((n, S), dtype=np.int32)
    padded = np.full(S + 2 * pad, np.inf)
    for k in range(n):
        padded[pad: pad + S] = L + site_cost[k]
        cand = _window(padded, pad, d_hi, S, D) + edge_rev[k]
        bp[k] = np.argmin(cand, axis=1)
        L = cand[np.arange(S), bp[k]]

    path = np.empty(n + 1, dtype=np.int64)
    path[n] = j_dst
    for k in range(n - 1, -1, -1):
        path[k] = path[k + 1] - d_hi + bp[k, path[k + 1]]
    return float(L[j_dst]), path


def _lse_rows(cand):
    # row-wise logsumexp; rows that are entirely -inf stay -inf
    m = np.max(cand, axis=1)
    finite = m > NEG_INF
    out = np.full(cand.shape[0], NEG_INF)
    if np.any(finite):
        rows = cand[finite] - m[finite, None]
        out[finite] = m[finite] + np.log(np.sum(np.exp(rows), axis=1))
    return out


def transfer_forward(site_cost, edge_cost, d_lo, log_dx, j_src):
    """Log-space forward recursion; returns table L of shape (n+1, S).

    The quadrature factor log_dx is attached to every interior slice
    (k = 1..n-1) and not to the pinned final slice.
    """
    n, S = site_cost.shape
    D = edge_cost.shape[1]
    d_hi = d_lo + D - 1
    pad = max(d_hi, -d_lo, 0)
    edge_rev = np.ascontiguousarray(edge_cost[:, ::-1])

    L = np.full((n + 1, S), NEG_INF)
    L[0, j_src] = 0.0
    padded = np.full(S + 2 * pad, NEG_INF)
    for k in range(n):
        padded[pad: pad + S] = L[k] - site_cost[k]
        cand = _window(padded, pad, d_hi, S, D) - edge_rev[k]
        L[k + 1] = _lse_rows(cand)
        if k < n - 1:
            L[k + 1] += log_dx
    return L


def transfer_backward(site_cost, edge_cost, d_lo, log_dx, j_dst):
    """Adjoint recursion; returns table R with R[k, j] aggregating k -> n."""
    n, S = site_cost.shape
    D = edge_cost.shape[1]
    d_hi = d_lo + D - 1
    pad = max(d_hi, -d_lo, 0)

    R = np.full((n + 1, S), NEG_INF)
    R[n, j_dst] = 0.0
    padded = np.full(S + 2 * pad, NEG_INF)
    for k in range(n - 1, -1, -1):
        padded[pad: pad + S] = R[k + 1]
        # target index j + d_lo + c, ordered by ascending target = ascending c
        cand = sliding_window_view(padded, D)[pad + d_lo: pad + d_lo + S] \
            - edge_cost[k]
        R[k] = _lse_rows(cand) - site_cost[k]
        if k < n - 1:
            R[k] += log_dx
    return R


def transfer_marginals(L, R, site_cost, edge_cost, d_lo, log_dx, log_z):
    """Pairwise step marginals from the two tables.

    Returns (pdelta, psite): pdelta[k, c] is the probability of jump offset
    d_lo + c at step k, psite[k, j] the occupation probability of node j at
    slice k.  Row sums of pdelta are the mass check.
    """
    n, S = site_cost.shape
    D = edge_cost.shape[1]
    pad = max(d_lo + D - 1, -d_lo, 0)

    pdelta = np.zeros((n, D))
    psite = np.zeros((n, S))
    padded = np.full(S + 2 * pad, NEG_INF)
    for k in range(n):
        add = log_dx if k < n - 1 else 0.0
        padded[pad: pad + S] = R[k + 1]
        rnext = sliding_window_view(padded, D)[pad + d_lo: pad + d_lo + S]
        logp = (L[k] - site_cost[k] + add - log_z)[:, None] \
            + (rnext - edge_cost[k])
        p = np.exp(logp)
        pdelta[k] = p.sum(axis=0)
        psite[k] = p.sum(axis=1)
    return pdelta, psite
