"""Space-time random potentials F_k(x) on the line.

Field kinds:

- ``constant``:   F_k(x) = c
- ``cosine``:     F_k(x) = M + sum_m a_m cos(w_m x + theta_{k,m}) with phases
  theta_{k,m} iid uniform on [0, 2pi)
- ``shot_noise``: F_k(x) = sum_j h phi((x - xi_{k,j}) / w) with the compact
  bump phi(u) = (1 - u^2)^3 on |u| <= 1 and xi_{k,j} a unit-rate-cell Poisson
  cloud of intensity lambda per unit length

Evaluation is a pure function of (seed, slice, position): every random draw
comes from a counter-based stream keyed by (seed, slice, mode-or-cell), so
slices can be evaluated lazily, in any order, and concurrently, with no
shared mutable state.  Views (shear, shift) are immutable wrappers that only
remap the evaluation coordinates.
"""

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

TWO_PI = 2.0 * math.pi

_PHASE_STREAM = 0
_POINT_STREAM = 1

FIELD_KINDS = ("constant", "cosine", "shot_noise")


class InvalidParameterError(ValueError):
    """Raised when field parameters violate their declared ranges."""


def _zig(i):
    # map signed ints to nonnegative ints for spawn keys
    return 2 * i if i >= 0 else -2 * i - 1


def _stream(seed, tag, *key):
    ss = SeedSequence(entropy=seed, spawn_key=(tag,) + tuple(_zig(k) for k in key))
    return Generator(Philox(ss))


# bump shape constants: max |phi'| and max |phi''| on [-1, 1]
_BUMP_LIP = 96.0 / (25.0 * math.sqrt(5.0))
_BUMP_CURV = 6.0
_BUMP_MASS = 32.0 / 35.0  # integral of phi over [-1, 1]


@dataclass(frozen=True)
class EnvField:
    """One realization of a potential, plus an affine view of its coordinates.

    evaluate(k, x) returns F_{k + time_offset}(x + space_offset + v_shear*k)
    of the underlying realization, so views compose exactly (the offsets are
    combined arithmetically, never by nesting closures).
    """

    kind: str
    params: Mapping
    seed: int
    v_shear: float = 0.0
    time_offset: int = 0
    space_offset: float = 0.0

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, k, x):
        return float(self.evaluate_slice(k, np.array([float(x)]))[0])

    def evaluate_slice(self, k, xs):
        """Vectorized evaluation at slice k; bit-identical to pointwise calls."""
        xs = np.asarray(xs, dtype=float)
        k_eff = k + self.time_offset
        u = xs + (self.space_offset + self.v_shear * k)
        if self.kind == "constant":
            return np.full(u.shape, self.params["c"])
        if self.kind == "cosine":
            out = np.full(u.shape, float(self.params["offset"]))
            sign = self.params.get("phase_sign", 1.0)
            amps = self.params["amplitudes"]
            freqs = self.params["frequencies"]
            fixed = self.params.get("fixed_phases")
            for m in range(len(amps)):
                if fixed is not None:
                    th = sign * fixed[m]
                else:
                    th = sign * _stream(self.seed, _PHASE_STREAM, k_eff, m).uniform(0.0, TWO_PI)
                out += amps[m] * np.cos(freqs[m] * u + th)
            return out
        # shot noise: walk every cell that can reach [min u - w, max u + w]
        h = self.params["height"]
        w = self.params["width"]
        out = np.zeros(u.shape)
        if u.size == 0:
            return out
        lo = math.floor(np.min(u) - w)
        hi = math.floor(np.max(u) + w)
        for cell in range(lo, hi + 1):
            pts = self._cell_points(k_eff, cell)
            if pts.size == 0:
                continue
            uu = (u[:, None] - pts[None, :]) / w
            out += np.where(np.abs(uu) <= 1.0, h * (1.0 - uu * uu) ** 3, 0.0).sum(axis=1)
        return out

    def _cell_points(self, k_eff, cell):
        rng = _stream(self.seed, _POINT_STREAM, k_eff, cell)
        count = rng.poisson(self.params["rate"])
        return cell + rng.random(count)

    def shot_points(self, k, lo, hi):
        """All shot-noise centers xi in [lo, hi), in cell-walk order."""
        if self.kind != "shot_noise":
            raise InvalidParameterError("shot_points requires a shot_noise field")
        k_eff = k + self.time_offset
        shift = self.space_offset + self.v_shear * k
        out = []
        for cell in range(math.floor(lo + shift), math.floor(hi + shift) + 1):
            pts = self._cell_points(k_eff, cell) - shift
            out.append(pts[(pts >= lo) & (pts < hi)])
        return np.concatenate(out) if out else np.empty(0)

    # -- views --------------------------------------------------------------

    def shear_view(self, v):
        """The sheared potential (x, k) -> F_k(x + v*k), as an exact view."""
        return replace(self, v_shear=self.v_shear + v)

    def shift(self, dk=0, dx=0.0):
        """The potential (x, k) -> F_{k+dk}(x + dx), as an exact view."""
        return replace(
            self,
            time_offset=self.time_offset + dk,
            space_offset=self.space_offset + dx + self.v_shear * dk,
        )

    # -- bounds -------------------------------------------------------------

    @property
    def lower_bound(self):
        """A deterministic M_F with F_k(x) >= M_F everywhere."""
        if self.kind == "constant":
            return float(self.params["c"])
        if self.kind == "cosine":
            return float(self.params["offset"]) - float(np.sum(self.params["amplitudes"]))
        return 0.0

    def running_sup(self, k, x, step=1e-4):
        """Guaranteed upper bound for sup of F_k over [x - 1/2, x + 1/2].

        Dense sampling plus the smaller of the Lipschitz margin L*step/2 and
        the curvature margin M2*step^2/8 (both rigorous for grids that
        include the interval endpoints).
        """
        if self.kind == "constant":
            return float(self.params["c"])
        m = max(2, int(math.ceil(1.0 / step)) + 1)
        xs = np.linspace(x - 0.5, x + 0.5, m)
        vals = self.evaluate_slice(k, xs)
        delta = 1.0 / (m - 1)
        if self.kind == "cosine":
            amps = np.asarray(self.params["amplitudes"], dtype=float)
            freqs = np.asarray(self.params["frequencies"], dtype=float)
            lip = float(np.sum(amps * freqs))
            curv = float(np.sum(amps * freqs ** 2))
        else:
            h = self.params["height"]
            w = self.params["width"]
            npts = self.shot_points(k, x - 0.5 - w, x + 0.5 + w).size
            lip = npts * h * _BUMP_LIP / w
            curv = npts * h * _BUMP_CURV / (w * w)
        margin = min(lip * delta / 2.0, curv * delta * delta / 8.0)
        return float(np.max(vals)) + margin


@dataclass(frozen=True)
class FieldSpec:
    """A field kind plus parameters, with the seed left open."""

    kind: str
    params: Mapping

    def make(self, seed):
        return make_field(self.kind, self.params, seed)


def make_field(kind, params, seed):
    """Validate parameters and build an EnvField."""
    if kind not in FIELD_KINDS:
        raise InvalidParameterError(f"unknown field kind {kind!r}")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise InvalidParameterError("seed must be a nonnegative integer")
    p = dict(params)
    if kind == "constant":
        c = float(p.get("c", 0.0))
        if not math.isfinite(c):
            raise InvalidParameterError("constant level c must be finite")
        norm = {"c": c}
    elif kind == "cosine":
        amps = tuple(float(a) for a in p.get("amplitudes", ()))
        freqs = tuple(float(w) for w in p.get("frequencies", ()))
        if len(amps) != len(freqs) or not amps:
            raise InvalidParameterError("cosine needs matching nonempty amplitudes/frequencies")
        if any(a < 0 for a in amps):
            raise InvalidParameterError("cosine amplitudes must be >= 0")
        if any(w <= 0 for w in freqs):
            raise InvalidParameterError("cosine frequencies must be > 0")
        sign = float(p.get("phase_sign", 1.0))
        if sign not in (1.0, -1.0):
            raise InvalidParameterError("phase_sign must be +1 or -1")
        norm = {
            "offset": float(p.get("offset", 0.0)),
            "amplitudes": amps,
            "frequencies": freqs,
            "phase_sign": sign,
        }
        if p.get("fixed_phases") is not None:
            fixed = tuple(float(t) for t in p["fixed_phases"])
            if len(fixed) != len(amps):
                raise InvalidParameterError("fixed_phases length must match amplitudes")
            norm["fixed_phases"] = fixed
    else:
        rate = float(p.get("rate", 1.0))
        width = float(p.get("width", 0.5))
        height = float(p.get("height", 1.0))
        if rate <= 0:
            raise InvalidParameterError("shot_noise rate must be > 0")
        if width <= 0:
            raise InvalidParameterError("shot_noise width must be > 0")
        if height <= 0:
            raise InvalidParameterError("shot_noise height must be > 0")
        norm = {"rate": rate, "width": width, "height": height}
    return EnvField(kind=kind, params=norm, seed=int(seed))


# thin functional aliases matching the operation names used elsewhere

def evaluate(field, k, x):
    return field.evaluate(k, x)


def shear_view(field, v):
    return field.shear_view(v)


def running_sup(field, k, x, step=1e-4):
    return field.running_sup(k, x, step=step)
