"""Kinetic energies V(x) with certified bounds and a self-audit.

Supported kinds: ``polynomial`` (coefficients low to high), ``quadratic``
(a*x^2, a convenience alias), and ``custom_table`` (natural cubic spline
through sampled values; the audit is the guard against unsuitable tables).

The solvers rely on three certified quantities:

- ``lower_bound``     a true global minimum M_V (root isolation for
  polynomials, dense sampling with a Lipschitz margin for tables);
- ``window_sup_hess`` sup of V'' over [x-1, x+1], exact for polynomials via
  the roots of V''';
- ``domination_witnesses`` constants (A, C, b) with
  window_sup_hess(d) <= A + C*(V(d) - b) for every feasible increment d,
  which turns the second-order Taylor envelope into a per-path bound.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import quad

KINETIC_KINDS = ("polynomial", "quadratic", "custom_table")


def _horner(coeffs, x):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, coeffs[-1] if len(coeffs) else 0.0)
    for c in reversed(coeffs[:-1]):
        out = out * x + c
    return out


def _real_roots(coeffs):
    """Real roots of the polynomial, Newton-polished."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if c.size <= 1:
        return np.empty(0)
    roots = npoly.polyroots(c)
    scale = 1.0 + np.max(np.abs(roots.real)) if roots.size else 1.0
    real = roots[np.abs(roots.imag) <= 1e-9 * scale].real
    if real.size == 0:
        return real
    dc = npoly.polyder(c)
    for _ in range(3):
        f = npoly.polyval(real, c)
        df = npoly.polyval(real, dc)
        step = np.where(np.abs(df) > 0, f / np.where(df == 0, 1.0, df), 0.0)
        real = real - step
    return np.sort(real)


@dataclass(frozen=True)
class KineticEnergy:
    kind: str
    coefficients: tuple = ()
    theta: float = 0.5
    table_x: Optional[tuple] = None
    table_v: Optional[tuple] = None
    _spline: object = field(default=None, repr=False, compare=False)

    # -- pointwise ------------------------------------------------------------

    def eval(self, x):
        if self.kind == "custom_table":
            return np.asarray(self._spline(x), dtype=float)
        return _horner(self.coefficients, x)

    def grad(self, x):
        if self.kind == "custom_table":
            return np.asarray(self._spline(x, 1), dtype=float)
        return _horner(tuple(npoly.polyder(self.coefficients)), x)

    def hess(self, x):
        if self.kind == "custom_table":
            return np.asarray(self._spline(x, 2), dtype=float)
        return _horner(tuple(npoly.polyder(self.coefficients, 2)), x)

    def __call__(self, x):
        return self.eval(x)

    # -- certified bounds -------------------------------------------------------

    @property
    def lower_bound(self):
        """True global lower bound M_V."""
        if self.kind == "custom_table":
            xs = np.linspace(self.table_x[0], self.table_x[-1], 200_001)
            step = xs[1] - xs[0]
            lip = float(np.max(np.abs(self.grad(xs))))
            return float(np.min(self.eval(xs))) - lip * step / 2.0
        crit = _real_roots(tuple(npoly.polyder(self.coefficients)))
        vals = self.eval(crit) if crit.size else np.empty(0)
        lo = float(np.min(vals)) if vals.size else float(self.coefficients[0])
        return lo - 1e-12 * (1.0 + abs(lo))

    def window_sup_hess(self, x, half_width=1.0):
        """sup of V'' over [x - half_width, x + half_width], elementwise.

        Exact for polynomials (endpoints plus the real roots of V''');
        dense sampling with a Lipschitz margin for tables.
        """
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "custom_table":
            out = np.empty(xs.shape)
            m3 = 6.0 * float(np.max(np.abs(self._spline.c[0])))
            for i, xi in enumerate(xs):
                grid = np.linspace(xi - half_width, xi + half_width, 4001)
                step = grid[1] - grid[0]
                out[i] = float(np.max(self.hess(grid))) + m3 * step / 2.0
        else:
            d3 = tuple(npoly.polyder(self.coefficients, 3))
            out = np.maximum(self.hess(xs - half_width), self.hess(xs + half_width))
            for r in _real_roots(d3):
                inside = np.abs(xs - r) <= half_width
                if np.any(inside):
                    out = np.where(inside, np.maximum(out, self.hess(r)), out)
        return out if np.ndim(x) else float(out[0])

    def domination_witnesses(self, v, increments, cutoff=None):
        """Constants (A, C, b, cutoff) certifying the per-path envelope bound.

        For every increment d in ``increments`` (the lattice's feasible jump
        values, shifted by v inside the solvers):
        window_sup_hess(d + v) <= A + C * (V(d + v) - b).
        A is the exact sup of V'' over the near window |d| <= cutoff (+1),
        C the exact max of the ratio over the far increments, b = min(M_V, 0).
        """
        b = min(self.lower_bound, 0.0)
        incs = np.asarray(increments, dtype=float)
        if cutoff is None:
            crit = _real_roots(tuple(npoly.polyder(self.coefficients))) \
                if self.kind != "custom_table" else np.array([0.0])
            reach = float(np.max(np.abs(crit))) if crit.size else 0.0
            # far increments must keep V(d + v) strictly above its floor
            cutoff = max(2.0, reach + abs(v) + 1.0)
        if self.kind == "custom_table":
            grid = np.linspace(v - cutoff - 1.0, v + cutoff + 1.0, 8001)
            A = float(np.max(self.hess(grid)))
        else:
            mid = np.array([v])
            A = float(self.window_sup_hess(mid, half_width=cutoff + 1.0)[0])
        far = incs[np.abs(incs) > cutoff]
        if far.size:
            num = self.window_sup_hess(far + v)
            den = self.eval(far + v) - b
            if np.any(den <= 0):
                raise ValueError("cutoff too small: V reaches its floor beyond it")
            C = float(np.max(num / den))
        else:
            C = 0.0
        return A, max(C, 0.0), b, cutoff


def make_kinetic(kind, params):
    """Validate parameters and build a KineticEnergy."""
    if kind not in KINETIC_KINDS:
        raise ValueError(f"unknown kinetic kind {kind!r}")
    if kind == "quadratic":
        a = float(params.get("a", 1.0))
        if a <= 0:
            raise ValueError("quadratic coefficient a must be > 0")
        return KineticEnergy(kind="quadratic", coefficients=(0.0, 0.0, a),
                             theta=float(params.get("theta", 0.5)))
    if kind == "polynomial":
        coeffs = tuple(float(c) for c in params["coefficients"])
        if len(coeffs) < 3:
            raise ValueError("polynomial needs degree >= 2")
        deg = len(coeffs) - 1
        if deg % 2 or coeffs[-1] <= 0:
            raise ValueError("polynomial must have even degree and positive leading coefficient")
        theta = float(params.get("theta", (deg - 1) / deg))
        if not 0.0 < theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        return KineticEnergy(kind="polynomial", coefficients=coeffs, theta=theta)
    xs = tuple(float(t) for t in params["x"])
    vals = tuple(float(t) for t in params["values"])
    if len(xs) != len(vals) or len(xs) < 4:
        raise ValueError("custom_table needs matching x/values with >= 4 points")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("custom_table x must be strictly increasing")
    theta = float(params.get("theta", 0.5))
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    from scipy.interpolate import CubicSpline
    spline = CubicSpline(np.asarray(xs), np.asarray(vals), bc_type="not-a-knot")
    return KineticEnergy(kind="custom_table", theta=theta,
                         table_x=xs, table_v=vals, _spline=spline)


def presets():
    return {
        "quadratic": make_kinetic("quadratic", {"a": 1.0}),
        "quartic": make_kinetic("polynomial", {"coefficients": [0, 0, 0, 0, 1.0]}),
        "double_well": make_kinetic("polynomial", {"coefficients": [0, 0, -3.0, 0, 1.0]}),
    }


# -- audit ---------------------------------------------------------------------


@dataclass
class AuditReport:
    kind: str
    theta: float
    x_max: float
    x_tail: float
    coercivity_ok: bool
    second_over_v: float
    second_over_v_ok: bool
    grad_floor_tail: float
    grad_floor_ok: bool
    grad_over_v_theta: float
    grad_over_v_theta_ok: bool
    window_hess_over_v: float
    window_hess_over_v_ok: bool
    tail_constant: float
    tail_cutoff: float
    tail_quadrature_ok: bool
    lower_bound: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def _tail_grid(x_tail, x_hi, m=4000):
    right = np.linspace(x_tail, x_hi, m)
    return np.concatenate([-right[::-1], right])


def tail_mass_ratios(V, xs):
    """Quadrature ratios integral_x^inf e^{-V} dy / e^{-V(x)} at each x > 0."""
    out = []
    for x in np.atleast_1d(xs):
        val, _ = quad(lambda y: math.exp(-(V.eval(y) - V.eval(x))), x, np.inf, limit=200)
        out.append(val)
    return np.asarray(out)


def audit(V, x_max=10.0):
    """Check the growth/regularity assumptions on [x_tail, x_max] with a
    doubling probe at 2*x_max; every statistic must not deteriorate under
    doubling for its flag to hold."""
    if x_max < 10.0:
        raise ValueError("x_max must be >= 10")
    x_tail = x_max / 10.0

    def stats(hi):
        g = _tail_grid(x_tail, hi)
        vv = V.eval(g)
        if np.any(vv <= 0):
            # tails must eventually dominate any level; shift by the floor
            vv = vv - min(V.lower_bound, 0.0) + 1.0
        gv = np.abs(V.grad(g))
        hv = V.hess(g)
        wv = V.window_sup_hess(g)
        return {
            "min_v": float(np.min(V.eval(g))),
            "second_over_v": float(np.max(hv / vv)),
            "grad_floor": float(np.min(gv)),
            "grad_over_v_theta": float(np.max(gv / np.power(vv, V.theta))),
            "window_over_v": float(np.max(np.maximum(wv, 0.0) / vv)),
        }

    near = stats(x_max)
    far = stats(2.0 * x_max)

    inner = np.linspace(-x_tail, x_tail, 801)
    coercivity_ok = (
        far["min_v"] >= near["min_v"] - 1e-9
        and V.eval(2.0 * x_max) > V.eval(x_tail)
        and V.eval(-2.0 * x_max) > V.eval(-x_tail)
        and near["min_v"] >= float(np.min(V.eval(inner))) - 1e-9
        and min(V.eval(2.0 * x_max), V.eval(-2.0 * x_max)) > float(np.max(V.eval(inner)))
    )

    second_ok = far["second_over_v"] <= max(1.25 * near["second_over_v"], near["second_over_v"] + 1e-9)
    grad_floor_ok = near["grad_floor"] > 0 and far["grad_floor"] >= 0.75 * near["grad_floor"]
    theta_ok = far["grad_over_v_theta"] <= max(1.25 * near["grad_over_v_theta"],
                                               near["grad_over_v_theta"] + 1e-9)
    window_ok = far["window_over_v"] <= max(1.25 * near["window_over_v"],
                                            near["window_over_v"] + 1e-9)

    grad_floor_both = min(near["grad_floor"], far["grad_floor"])
    tail_c = 1.0 / grad_floor_both if grad_floor_both > 0 else math.inf
    tail_ok = False
    if math.isfinite(tail_c) and coercivity_ok:
        probes = np.linspace(x_tail, x_max, 5)
        try:
            ratios_r = tail_mass_ratios(V, probes)
            neg = KineticEnergy(kind=V.kind, coefficients=tuple(
                c * (-1.0) ** i for i, c in enumerate(V.coefficients)), theta=V.theta) \
                if V.kind != "custom_table" else None
            if neg is not None:
                ratios_l = tail_mass_ratios(neg, probes)
            else:
                ratios_l = np.array([
                    quad(lambda y: math.exp(-(V.eval(y) - V.eval(-x))), -np.inf, -x,
                         limit=200)[0] for x in probes])
            tail_ok = bool(np.all(ratios_r <= tail_c * (1 + 1e-6))
                           and np.all(ratios_l <= tail_c * (1 + 1e-6)))
        except Exception:
            tail_ok = False

    passed = bool(coercivity_ok and second_ok and grad_floor_ok and theta_ok
                  and window_ok and tail_ok)
    return AuditReport(
        kind=V.kind, theta=V.theta, x_max=x_max, x_tail=x_tail,
        coercivity_ok=bool(coercivity_ok),
        second_over_v=near["second_over_v"], second_over_v_ok=bool(second_ok),
        grad_floor_tail=near["grad_floor"], grad_floor_ok=bool(grad_floor_ok),
        grad_over_v_theta=near["grad_over_v_theta"], grad_over_v_theta_ok=bool(theta_ok),
        window_hess_over_v=near["window_over_v"], window_hess_over_v_ok=bool(window_ok),
        tail_constant=tail_c, tail_cutoff=x_tail, tail_quadrature_ok=bool(tail_ok),
        lower_bound=V.lower_bound, passed=passed,
    )
