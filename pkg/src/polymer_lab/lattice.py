"""Tilted space-time lattices and shared problem assembly.

A path problem lives on nodes x_k(j) = base + slope*k + j*dx, j in
[-half_width, half_width], k = 0..n.  Both solvers consume the same cost
arrays: per-slice site costs beta*F_k(x_k(j)) for k = 0..n-1 (the start
slice carries a site cost, the final pinned slice does not) and a single
edge-cost row alpha*V(drift + delta*dx) over jump offsets delta, constant
in k because every problem here has constant per-step drift.
"""

import math
from dataclasses import dataclass

import numpy as np


class WindowExhaustedError(RuntimeError):
    """Raised when the path mass keeps touching the window boundary after
    the automatic width doublings."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


@dataclass(frozen=True)
class TiltedLattice:
    """Lattice with per-slice offset v_tilt*k and spacing dx.

    The width guidance dx*half_width >= 4|v_tilt| + 4 is advisory: solvers
    detect boundary contact at run time and double the window, so narrow
    lattices degrade to retries instead of wrong answers.
    """

    n: int
    v_tilt: float
    dx: float
    half_width: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.dx <= 0:
            raise ValueError("dx must be > 0")
        if self.half_width < 1:
            raise ValueError("half_width must be >= 1")

    @property
    def node_count(self):
        return 2 * self.half_width + 1

    def positions(self, k):
        j = np.arange(-self.half_width, self.half_width + 1)
        return self.v_tilt * k + j * self.dx

    def meets_width_guidance(self):
        return self.dx * self.half_width >= 4.0 * abs(self.v_tilt) + 4.0


def recommended_half_width(v_tilt, dx, n=None):
    """Width guidance: 4|v|+4, widened ~sqrt(n) for long polymers whose
    transversal wander grows diffusively.

    The sqrt coefficient is calibrated so that the pinned-bridge occupancy
    of the four outermost lattice nodes stays below 1e-10 for unit-stiffness
    kinetic energies, leaving two decades of margin before the adaptive
    window doubling triggers at 1e-8.
    """
    target = 4.0 * abs(v_tilt) + 4.0
    if n is not None:
        target = max(target, 2.2 * math.sqrt(max(n, 1)) + 4.0 * abs(v_tilt) + 2.0)
    return max(1, int(math.ceil(target / dx)))


@dataclass
class ProblemCosts:
    """Assembled cost arrays for one pinned lattice problem."""

    n: int
    half_width: int
    dx: float
    drift: float
    fsite: np.ndarray     # (n, S), raw F_k at node positions
    site: np.ndarray      # (n, S), beta * fsite
    offsets: np.ndarray   # all jump offsets, -2W..2W
    vrow: np.ndarray      # alpha * V(drift + offsets*dx)
    base: float
    slope: float
    start_time: int

    @property
    def node_index_center(self):
        return self.half_width

    def edge_arrays(self, keep_lo, keep_hi):
        """Edge-cost matrix for the contiguous offset range [keep_lo, keep_hi]."""
        c0 = keep_lo + 2 * self.half_width
        c1 = keep_hi + 2 * self.half_width
        row = self.vrow[c0:c1 + 1]
        return np.ascontiguousarray(np.tile(row, (self.n, 1))), int(keep_lo)


def assemble_costs(field, V, n, base, slope, dx, half_width, alpha, beta,
                   start_time=0, v_extra=0.0):
    """Site and edge costs for paths on base + slope*k + j*dx.

    v_extra is an additional drift inside V only (the sheared problems
    evaluate V at increment + v while the field stays on the lattice).
    """
    W = int(half_width)
    S = 2 * W + 1
    j = np.arange(-W, W + 1)
    fsite = np.empty((n, S))
    for k in range(n):
        pos = base + slope * k + j * dx
        fsite[k] = field.evaluate_slice(start_time + k, pos)
    drift = slope + v_extra
    offsets = np.arange(-2 * W, 2 * W + 1)
    vrow = alpha * V.eval(drift + offsets * dx)
    return ProblemCosts(n=n, half_width=W, dx=dx, drift=drift, fsite=fsite,
                        site=np.ascontiguousarray(beta * fsite),
                        offsets=offsets, vrow=vrow, base=base, slope=slope,
                        start_time=start_time)


def hull_from_mask(keep, offsets, must_cover=(0, 0)):
    """Contiguous offset hull of a keep-mask, stretched to cover a range."""
    idx = np.flatnonzero(keep)
    lo = int(offsets[idx[0]]) if idx.size else 0
    hi = int(offsets[idx[-1]]) if idx.size else 0
    lo = min(lo, int(must_cover[0]))
    hi = max(hi, int(must_cover[1]))
    return lo, hi


def staircase(j_src, j_dst, n):
    """Monotone integer path from j_src to j_dst in n steps (a feasible
    reference path used for cost upper bounds)."""
    ks = np.arange(n + 1)
    return np.rint(j_src + (j_dst - j_src) * ks / n).astype(np.int64)
