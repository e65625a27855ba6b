"""Run configuration: TOML parsing, validation, canonical hashing.

A config file has four blocks plus a top-level model switch::

    model = "both"                # zero_temp | finite_temp | both

    [environment]                 # field kind, parameters, seed policy
    kind = "cosine"
    # seed = 0                    # optional fixed seed for solve/partition
    [environment.params]
    offset = 0.8
    amplitudes = [0.6, 0.3]
    frequencies = [1.4, 2.7]

    [kinetic]
    kind = "quadratic"
    [kinetic.params]
    a = 1.0

    [lattice]                     # n or n_list, spacing, optional half width
    n = 16
    delta = 0.25

    [experiment]
    v_grid = [-1.0, -0.5, 0.0, 0.5, 1.0]
    alpha = 1.0
    beta = 1.0
    seeds = 8
    master_seed = 7

    [output]
    directory = "runs"
    formats = ["json", "csv"]

The config hash is the SHA-256 of a canonical serialization (sorted keys,
floats rendered with "%.17g") of everything except the output block, so it
identifies the computation rather than where its files land.  All numeric
fields are validated against the module preconditions before any work
starts; a kinetic block that the constructors reject is kept in rejected
form so the audit command can report the failure instead of refusing to
parse.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import environment, kinetic

MODELS = ("zero_temp", "finite_temp", "both")
FORMATS = ("json", "csv")


class ConfigError(ValueError):
    """Invalid or missing configuration (CLI exit code 3)."""


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_canonical(x) for x in obj]
    if isinstance(obj, float):
        return "%.17g" % obj
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    raise ConfigError(f"unsupported config value of type {type(obj).__name__}")


def canonical_json(data):
    """Sorted-key, fixed-float-format serialization; the hash input."""
    return json.dumps(_canonical(data), sort_keys=True,
                      separators=(",", ":"))


def config_hash(data):
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


def _require(block, key, kinds, desc):
    if key not in block:
        raise ConfigError(f"missing {desc}")
    value = block[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise ConfigError(f"{desc} must be {kinds[-1].__name__}-valued")
    return value


@dataclass
class RunConfig:
    raw: dict
    hash: str
    model: str
    field_spec: environment.FieldSpec
    env_seed: Optional[int]
    V: Optional[kinetic.KineticEnergy]
    kinetic_rejection: Optional[str]
    n_list: tuple
    dx: float
    half_width: Optional[int]
    v: float
    v_grid: tuple
    alpha: float
    beta: float
    alpha_grid: tuple
    beta_grid: tuple
    seeds: int
    master_seed: int
    out_dir: str
    formats: tuple

    @property
    def n(self):
        return self.n_list[0]

    def require_kinetic(self):
        if self.V is None:
            raise ConfigError(
                f"kinetic block rejected: {self.kinetic_rejection}")
        return self.V


def load_config(path, out_dir=None, master_seed=None):
    """Parse, apply CLI overrides, validate, and hash a run configuration."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"malformed config: {err}") from None
    if master_seed is not None:
        raw.setdefault("experiment", {})["master_seed"] = int(master_seed)

    model = raw.get("model", "both")
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}")

    env = raw.get("environment")
    if not isinstance(env, dict):
        raise ConfigError("missing [environment] block")
    kind = _require(env, "kind", (str,), "environment.kind")
    params = env.get("params", {})
    spec = environment.FieldSpec(kind, params)
    try:
        spec.make(0)  # validates kind and parameters up front
    except environment.InvalidParameterError as err:
        raise ConfigError(f"environment block: {err}") from None
    env_seed = env.get("seed")
    if env_seed is not None and (not isinstance(env_seed, int)
                                 or isinstance(env_seed, bool)
                                 or env_seed < 0):
        raise ConfigError("environment.seed must be a nonnegative integer")

    kin = raw.get("kinetic")
    if not isinstance(kin, dict):
        raise ConfigError("missing [kinetic] block")
    kin_kind = _require(kin, "kind", (str,), "kinetic.kind")
    V, rejection = None, None
    try:
        V = kinetic.make_kinetic(kin_kind, kin.get("params", {}))
    except (KeyError, ValueError) as err:
        rejection = str(err)

    lat = raw.get("lattice")
    if not isinstance(lat, dict):
        raise ConfigError("missing [lattice] block")
    if "n_list" in lat:
        n_list = lat["n_list"]
        if (not isinstance(n_list, list) or not n_list
                or any(not isinstance(n, int) or isinstance(n, bool)
                       or n < 1 for n in n_list)):
            raise ConfigError("lattice.n_list must be positive integers")
        n_list = tuple(sorted(n_list))
    else:
        n_list = (_require(lat, "n", (int,), "lattice.n (or n_list)"),)
        if n_list[0] < 1:
            raise ConfigError("lattice.n must be >= 1")
    dx = float(_require(lat, "delta", (int, float), "lattice.delta"))
    if dx <= 0:
        raise ConfigError("lattice.delta must be > 0")
    half_width = lat.get("half_width")
    if half_width is not None and (not isinstance(half_width, int)
                                   or isinstance(half_width, bool)
                                   or half_width < 1):
        raise ConfigError("lattice.half_width must be a positive integer")

    exp = raw.get("experiment", {})
    if not isinstance(exp, dict):
        raise ConfigError("[experiment] must be a table")
    v = float(exp.get("v", 0.0))
    v_grid = exp.get("v_grid", [-1.0, -0.5, 0.0, 0.5, 1.0])
    if (not isinstance(v_grid, list) or len(v_grid) < 3
            or any(not isinstance(x, (int, float)) or isinstance(x, bool)
                   for x in v_grid)
            or any(b <= a for a, b in zip(v_grid, v_grid[1:]))):
        raise ConfigError("experiment.v_grid must be >= 3 increasing reals")
    alpha = float(exp.get("alpha", 1.0))
    beta = float(exp.get("beta", 1.0))
    if alpha <= 0 or beta < 0:
        raise ConfigError("need experiment.alpha > 0 and beta >= 0")

    def _ab_axis(name, default):
        axis = exp.get(name, default)
        if (not isinstance(axis, list) or len(axis) < 3
                or any(not isinstance(x, (int, float)) or isinstance(x, bool)
                       or x <= 0 for x in axis)):
            raise ConfigError(f"experiment.{name} must be >= 3 positive reals")
        return tuple(float(x) for x in axis)

    altgrid = [0.5, 0.875, 1.25, 1.625, 2.0]
    alpha_grid = _ab_axis("alpha_grid", altgrid)
    beta_grid = _ab_axis("beta_grid", altgrid)
    seeds = exp.get("seeds", 8)
    if not isinstance(seeds, int) or isinstance(seeds, bool) or seeds < 2:
        raise ConfigError("experiment.seeds must be an integer >= 2")
    ms = exp.get("master_seed", 0)
    if not isinstance(ms, int) or isinstance(ms, bool) or ms < 0:
        raise ConfigError("experiment.master_seed must be >= 0")

    out = raw.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("[output] must be a table")
    directory = out_dir if out_dir is not None else out.get("directory",
                                                            "runs")
    formats = tuple(out.get("formats", list(FORMATS)))
    if not formats or any(f not in FORMATS for f in formats):
        raise ConfigError(f"output.formats must be a subset of {FORMATS}")

    hashed = {k: val for k, val in raw.items() if k != "output"}
    return RunConfig(raw=raw, hash=config_hash(hashed), model=model,
                     field_spec=spec, env_seed=env_seed, V=V,
                     kinetic_rejection=rejection, n_list=n_list, dx=dx,
                     half_width=half_width, v=v,
                     v_grid=tuple(float(x) for x in v_grid), alpha=alpha,
                     beta=beta, alpha_grid=alpha_grid, beta_grid=beta_grid,
                     seeds=seeds, master_seed=ms, out_dir=str(directory),
                     formats=formats)
