"""Monte Carlo shape-function curves and their consistency diagnostics.

A ShapeCurve aggregates per-seed runs of the sheared solvers over a velocity
grid: Lambda estimates (value/n at zero temperature, -log_Z/n at positive
temperature), their standard errors, the per-path derivative statistic, and
centered finite-difference slopes.  Every curve carries a companion estimated
at half the grid spacing as the discretization control.

Statistical comparisons keep the per-seed sample matrices: the same
environment realization is reused across the velocity grid (common random
numbers), so finite-difference slopes and derivative statistics are strongly
correlated and their difference must be assessed per seed, not from the
marginal error bars.
"""

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import finite_temp, zero_temp
from .lattice import (TiltedLattice, WindowExhaustedError,
                      recommended_half_width)

MODELS = ("zero_temp", "finite_temp")

# z-score floor: several checks compare quantities that coincide to float
# precision (quadratic kinetic energies make the gap identically zero in
# exact arithmetic), where both the mean and its standard error are rounding
# noise of the same size and their ratio is meaningless.
Z_FLOOR = 1e-12


def derive_task_seed(master_seed, seed_index):
    """Stable per-seed-index stream id.

    The velocity and the path length are deliberately excluded, so one
    environment realization serves the whole grid; this induces the positive
    correlation across v that sharpens finite-difference slopes.
    """
    msg = f"{int(master_seed)}:{int(seed_index)}".encode()
    return int.from_bytes(hashlib.sha256(msg).digest()[:8], "big") >> 1


@dataclass
class ShapeCurve:
    model: str
    v_grid: np.ndarray
    n: int
    dx: float
    alpha: float
    beta: float
    seeds: int
    master_seed: int
    mean_Lambda: np.ndarray
    stderr: np.ndarray
    mean_deriv_stat: np.ndarray
    fd_slope: np.ndarray            # NaN at the two edge grid points
    lambda_samples: np.ndarray      # (seeds, v) matrices
    deriv_samples: np.ndarray
    vbar_samples: np.ndarray
    hess_samples: np.ndarray
    delta_halved: Optional["ShapeCurve"] = None
    info: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"model": self.model, "v_grid": self.v_grid.tolist(),
             "n": self.n, "dx": self.dx, "alpha": self.alpha,
             "beta": self.beta, "seeds": self.seeds,
             "master_seed": self.master_seed,
             "mean_Lambda": self.mean_Lambda.tolist(),
             "stderr": self.stderr.tolist(),
             "mean_deriv_stat": self.mean_deriv_stat.tolist(),
             "fd_slope": self.fd_slope.tolist(),
             "info": dict(self.info)}
        if self.delta_halved is not None:
            d["delta_halved"] = self.delta_halved.to_dict()
        return d


@dataclass
class DominationReport:
    v0: float
    dominated: bool
    g_n_sequence: np.ndarray
    bracket: tuple
    h_quadratic_coefficient: float
    n_list: tuple
    min_slack: float
    violations: list

    def to_dict(self):
        return {"v0": self.v0, "dominated": self.dominated,
                "g_n_sequence": self.g_n_sequence.tolist(),
                "bracket": list(self.bracket),
                "h_quadratic_coefficient": self.h_quadratic_coefficient,
                "n_list": list(self.n_list), "min_slack": self.min_slack,
                "violations": list(self.violations)}


def _single(model, fld, V, n, v, dx, half_width, alpha, beta):
    """One sheared run -> (Lambda sample, deriv stat, Vbar, hess-sup stat)."""
    lat = TiltedLattice(n=n, v_tilt=0.0, dx=dx, half_width=half_width)
    if model == "zero_temp":
        r = zero_temp.solve_sheared(fld, V, lat, v, alpha=alpha, beta=beta)
        s = r.stats
        return (r.value / n, s.vprime_bar, s.vbar, s.hess_sup_bar)
    p = finite_temp.log_partition_sheared(fld, V, lat, v,
                                          alpha=alpha, beta=beta)
    e = p.expectations
    return (-p.log_z / n, e["vprime_bar"], e["vbar"], e["hess_sup_bar"])


def _task(args):
    (idx, seed_index, v, model, field_spec, V, n, dx, half_width,
     alpha, beta, master_seed) = args
    fld = field_spec.make(derive_task_seed(master_seed, seed_index))
    try:
        main = _single(model, fld, V, n, v, dx, half_width, alpha, beta)
        fine = _single(model, fld, V, n, v, dx / 2, 2 * half_width,
                       alpha, beta)
    except WindowExhaustedError as err:
        raise WindowExhaustedError(
            f"{err} (seed_index={seed_index}, v={v})", **err.context) \
            from None
    return idx, main, fine


def _reduce(curve_args, rows, nv, seeds):
    mats = [np.empty((seeds, nv)) for _ in range(4)]
    for idx, vals in rows:
        s, i = divmod(idx, nv)
        for m, x in zip(mats, vals):
            m[s, i] = x
    lam, deriv, vbar, hess = mats
    v_grid = curve_args["v_grid"]
    mean = lam.mean(axis=0)
    stderr = lam.std(axis=0, ddof=1) / math.sqrt(seeds)
    fd = np.full(nv, math.nan)
    fd[1:-1] = (mean[2:] - mean[:-2]) / (v_grid[2:] - v_grid[:-2])
    return ShapeCurve(mean_Lambda=mean, stderr=stderr,
                      mean_deriv_stat=deriv.mean(axis=0), fd_slope=fd,
                      lambda_samples=lam, deriv_samples=deriv,
                      vbar_samples=vbar, hess_samples=hess, **curve_args)


def estimate_shape(model, field_spec, V, v_grid, n, dx, half_width,
                   alpha=1.0, beta=1.0, seeds=2, master_seed=0, workers=1):
    """Monte Carlo shape curve over v_grid, plus its half-spacing companion.

    Deterministic given (master_seed, arguments): per-task seeds come from
    derive_task_seed, tasks are reduced in index order, and worker count
    does not affect the result.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    v_grid = np.asarray(v_grid, dtype=float)
    if v_grid.ndim != 1 or len(v_grid) < 3:
        raise ValueError("v_grid needs at least 3 points")
    if np.any(np.diff(v_grid) <= 0):
        raise ValueError("v_grid must be strictly increasing")
    if seeds < 2:
        raise ValueError("need seeds >= 2 for standard errors")
    if half_width is None:
        half_width = recommended_half_width(
            float(np.max(np.abs(v_grid))), dx, n)
    nv = len(v_grid)
    tasks = [(s * nv + i, s, float(v), model, field_spec, V, n, dx,
              half_width, alpha, beta, master_seed)
             for s in range(seeds) for i, v in enumerate(v_grid)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=4))
    else:
        results = [_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    common = {"model": model, "v_grid": v_grid, "n": n, "alpha": alpha,
              "beta": beta, "seeds": seeds, "master_seed": master_seed}
    fine = _reduce({**common, "dx": dx / 2}, [(i, f) for i, _, f in results],
                   nv, seeds)
    curve = _reduce({**common, "dx": dx}, [(i, m) for i, m, _ in results],
                    nv, seeds)
    curve.delta_halved = fine
    curve.info = {"half_width": half_width, "workers_invariant": True}
    return curve


def derivative_consistency(curve):
    """Per interior v: finite-difference slope vs the derivative statistic.

    The combined standard error is taken over the per-seed differences
    (same-seed runs are correlated by construction), and the z-score floor
    guards the degenerate case where the gap is identically zero.
    """
    v = curve.v_grid
    out = []
    for i in range(1, len(v) - 1):
        span = v[i + 1] - v[i - 1]
        per_seed_fd = (curve.lambda_samples[:, i + 1]
                       - curve.lambda_samples[:, i - 1]) / span
        diff = per_seed_fd - curve.deriv_samples[:, i]
        se = float(diff.std(ddof=1) / math.sqrt(curve.seeds))
        gap = curve.fd_slope[i] - curve.mean_deriv_stat[i]
        out.append({"v": float(v[i]), "fd_slope": float(curve.fd_slope[i]),
                    "mean_deriv_stat": float(curve.mean_deriv_stat[i]),
                    "stderr_combined": se,
                    "z_score": abs(gap) / max(se, Z_FLOOR)})
    return out


def convexity_report(curve):
    """Midpoint-convexity audit of mean_Lambda over interior grid triples."""
    v, lam = curve.v_grid, curve.lambda_samples
    violations, z_scores = [], []
    for i in range(1, len(v) - 1):
        t = (v[i + 1] - v[i]) / (v[i + 1] - v[i - 1])
        slack = t * lam[:, i - 1] + (1 - t) * lam[:, i + 1] - lam[:, i]
        mean = float(slack.mean())
        se = float(slack.std(ddof=1) / math.sqrt(curve.seeds))
        violation = max(0.0, -mean)
        violations.append(violation)
        z_scores.append(violation / max(se, Z_FLOOR))
    return {"max_midpoint_violation": max(violations, default=0.0),
            "z_scores": np.asarray(z_scores),
            "worst_z": max(z_scores, default=0.0)}


def _concavity_triples(xs):
    for i in range(1, len(xs) - 1):
        yield i, (xs[i + 1] - xs[i]) / (xs[i + 1] - xs[i - 1])


def alpha_beta_concavity(model, field_spec, V, v, n, alphas, betas, seed,
                         dx, half_width=None):
    """Worst midpoint-concavity violation of the per-node energy over an
    (alpha, beta) grid, one fixed realization; axis-aligned and diagonal
    triples.  Contract: <= 1e-9 (exact inequality on the discrete sums)."""
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if np.any(alphas <= 0) or np.any(betas <= 0):
        raise ValueError("grid points must be positive")
    if half_width is None:
        half_width = recommended_half_width(abs(v), dx, n)
    fld = field_spec.make(seed)
    f = np.empty((len(alphas), len(betas)))
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            f[i, j] = _single(model, fld, V, n, v, dx, half_width, a, b)[0]
    worst = -math.inf
    for i, t in _concavity_triples(alphas):
        worst = max(worst, np.max(t * f[i - 1] + (1 - t) * f[i + 1] - f[i]))
    for j, t in _concavity_triples(betas):
        worst = max(worst, np.max(
            t * f[:, j - 1] + (1 - t) * f[:, j + 1] - f[:, j]))
    for i, ta in _concavity_triples(alphas):
        for j, tb in _concavity_triples(betas):
            if abs(ta - tb) <= 1e-12:
                worst = max(worst,
                            ta * f[i - 1, j - 1] + (1 - ta) * f[i + 1, j + 1]
                            - f[i, j])
            if abs(ta - (1 - tb)) <= 1e-12:
                worst = max(worst,
                            ta * f[i - 1, j + 1] + (1 - ta) * f[i + 1, j - 1]
                            - f[i, j])
    return float(worst)


def alpha_slope_bracket(model, field_spec, V, v, n, dx, half_width, alpha,
                        beta, seed, h=0.05):
    """One-sided slopes of the per-node energy in alpha bracket Vbar.

    Concavity puts the derivative (which is the Vbar expectation) between
    the forward and backward difference quotients.
    """
    fld = field_spec.make(seed)

    def at(a):
        return _single(model, fld, V, n, v, dx, half_width, a, beta)

    lo_val = at(alpha - h)[0]
    mid = at(alpha)
    hi_val = at(alpha + h)[0]
    return {"lo_slope": (hi_val - mid[0]) / h,
            "hi_slope": (mid[0] - lo_val) / h,
            "vbar": mid[2]}


def domination_check(model, field_spec, V, v0, n_list, w_offsets, seed_panel,
                     dx, half_width=None, alpha=1.0, beta=1.0):
    """Approximate linear domination of the per-node energy around v0.

    For every (seed, n, w): f_n(w) - f_n(v0) <= (w - v0)*g_n
    + (w - v0)^2/2 * (M_hat + 1), where g_n and M_hat are the derivative and
    window-sup-curvature statistics of the v0 run itself.  The bracket is
    the min/max of the per-n mean slope coefficients over the largest half
    of n_list (a finite-data stand-in for liminf/limsup).
    """
    w_offsets = [float(w) for w in w_offsets]
    if any(w == 0.0 or abs(w) > 1.0 for w in w_offsets):
        raise ValueError("offsets must lie in [-1, 1] excluding 0")
    n_list = sorted(int(n) for n in n_list)
    violations = []
    min_slack = math.inf
    g_rows = np.empty((len(n_list), len(seed_panel)))
    m_hat_max = -math.inf
    for ni, n in enumerate(n_list):
        W = half_width if half_width is not None else \
            recommended_half_width(abs(v0) + 1.0, dx, n)
        for si, seed in enumerate(seed_panel):
            fld = field_spec.make(seed)
            f0, g, _, m_hat = _single(model, fld, V, n, v0, dx, W,
                                      alpha, beta)
            g_rows[ni, si] = g
            m_hat_max = max(m_hat_max, m_hat)
            for off in w_offsets:
                w = v0 + off
                fw = _single(model, fld, V, n, w, dx, W, alpha, beta)[0]
                slack = off * g + 0.5 * off * off * (m_hat + 1.0) \
                    - (fw - f0)
                min_slack = min(min_slack, slack)
                if slack < -1e-9:
                    violations.append({"n": n, "w": w, "seed": seed,
                                       "slack": slack})
    g_seq = g_rows.mean(axis=1)
    tail = g_seq[len(n_list) // 2:] if len(n_list) > 1 else g_seq
    return DominationReport(
        v0=v0, dominated=not violations, g_n_sequence=g_seq,
        bracket=(float(np.min(tail)), float(np.max(tail))),
        h_quadratic_coefficient=0.5 * (m_hat_max + 1.0),
        n_list=tuple(n_list), min_slack=float(min_slack),
        violations=violations)


def curve_rows(curve):
    """Flatten a curve (and its half-spacing companion) to CSV-ready rows."""
    rows = []
    for c in (curve, curve.delta_halved):
        if c is None:
            continue
        zmap = {r["v"]: r["z_score"] for r in derivative_consistency(c)}
        for i, v in enumerate(c.v_grid):
            rows.append({
                "v": float(v), "n": c.n, "delta": c.dx,
                "mean_lambda": float(c.mean_Lambda[i]),
                "stderr": float(c.stderr[i]),
                "deriv_stat": float(c.mean_deriv_stat[i]),
                "fd_slope": float(c.fd_slope[i]),
                "z": zmap.get(float(v), math.nan),
            })
    return rows
