"""Command-line front end: audit, solve, partition, shape, check, ledger.

Every command parses and validates the config first (exit 3 on failure),
then works inside a fresh run directory `<out>/<hash12>-<command>-<seq>`,
and appends one JSON line to `<out>/ledger.jsonl` recording the run id,
the effective config, output files, wall time, and kernel lane.  Result
files themselves carry no timestamps or run ids, so reruns of the same
config hash produce bit-identical files (only the ledger line differs).

Exit codes: 0 success, 1 audit/check failure, 2 window-exhausted solver
failure, 3 config error.
"""

import argparse
import csv
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__, finite_temp, kinetic, shape, zero_temp
from .config import ConfigError, canonical_json, load_config
from .kernels import LANE
from .lattice import (TiltedLattice, WindowExhaustedError,
                      recommended_half_width)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_RESOURCE = 2
EXIT_CONFIG = 3

CSV_COLUMNS = ("v", "n", "delta", "mean_lambda", "stderr", "deriv_stat",
               "fd_slope", "z")


def _fmt(x):
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def _write_json(run_dir, name, payload, outputs):
    path = os.path.join(run_dir, name)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    outputs.append(name)


def _write_csv(run_dir, name, rows, outputs):
    path = os.path.join(run_dir, name)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    outputs.append(name)


def _models(cfg):
    return ("zero_temp", "finite_temp") if cfg.model == "both" \
        else (cfg.model,)


def _field_seed(cfg, index=0):
    if cfg.env_seed is not None:
        return cfg.env_seed
    return shape.derive_task_seed(cfg.master_seed, index)


def _default_width(cfg, n, extra=0.0):
    if cfg.half_width is not None:
        return cfg.half_width
    v_reach = max(abs(cfg.v_grid[0]), abs(cfg.v_grid[-1]), abs(cfg.v),
                  extra)
    return recommended_half_width(v_reach, cfg.dx, n)


def cmd_audit(cfg, run_dir, outputs, workers):
    if cfg.V is None:
        report = {"passed": False, "coercivity_ok": False,
                  "rejected_at_construction": cfg.kinetic_rejection}
        _write_json(run_dir, "audit.json", report, outputs)
        print(f"audit: FAIL ({cfg.kinetic_rejection})")
        return EXIT_CHECK_FAILED
    report = kinetic.audit(cfg.V)
    _write_json(run_dir, "audit.json", report.to_dict(), outputs)
    print(f"audit: {'PASS' if report.passed else 'FAIL'} "
          f"(coercivity={report.coercivity_ok}, "
          f"tail_quadrature={report.tail_quadrature_ok})")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_solve(cfg, run_dir, outputs, workers):
    V = cfg.require_kinetic()
    seed = _field_seed(cfg)
    lat = TiltedLattice(n=cfg.n, v_tilt=0.0, dx=cfg.dx,
                        half_width=_default_width(cfg, cfg.n))
    result = zero_temp.solve_sheared(cfg.field_spec.make(seed), V, lat,
                                     cfg.v, alpha=cfg.alpha, beta=cfg.beta)
    payload = {"command": "solve", "config_hash": cfg.hash, "seed": seed,
               "v": cfg.v, "n": cfg.n, "delta": cfg.dx,
               "half_width": lat.half_width, "alpha": cfg.alpha,
               "beta": cfg.beta, "result": result.to_dict()}
    _write_json(run_dir, "solve.json", payload, outputs)
    print(f"solve: value={result.value:.12g} "
          f"boundary_touched={result.boundary_touched}")
    return EXIT_OK


def cmd_partition(cfg, run_dir, outputs, workers):
    V = cfg.require_kinetic()
    seed = _field_seed(cfg)
    lat = TiltedLattice(n=cfg.n, v_tilt=0.0, dx=cfg.dx,
                        half_width=_default_width(cfg, cfg.n))
    result = finite_temp.log_partition_sheared(
        cfg.field_spec.make(seed), V, lat, cfg.v,
        alpha=cfg.alpha, beta=cfg.beta)
    payload = {"command": "partition", "config_hash": cfg.hash,
               "seed": seed, "v": cfg.v, "n": cfg.n, "delta": cfg.dx,
               "half_width": lat.half_width, "alpha": cfg.alpha,
               "beta": cfg.beta, "result": result.to_dict()}
    _write_json(run_dir, "partition.json", payload, outputs)
    print(f"partition: log_z={result.log_z:.12g} "
          f"mass_check={result.mass_check:.3g}")
    return EXIT_OK


def _estimate(cfg, model, n, workers):
    return shape.estimate_shape(
        model, cfg.field_spec, cfg.require_kinetic(), list(cfg.v_grid),
        n=n, dx=cfg.dx, half_width=_default_width(cfg, n),
        alpha=cfg.alpha, beta=cfg.beta, seeds=cfg.seeds,
        master_seed=cfg.master_seed, workers=workers)


def cmd_shape(cfg, run_dir, outputs, workers):
    for model in _models(cfg):
        for n in cfg.n_list:
            curve = _estimate(cfg, model, n, workers)
            stem = f"shape_{model}_n{n}"
            if "csv" in cfg.formats:
                _write_csv(run_dir, stem + ".csv", shape.curve_rows(curve),
                           outputs)
            if "json" in cfg.formats:
                _write_json(run_dir, stem + ".json", curve.to_dict(),
                            outputs)
            print(f"shape: {model} n={n} "
                  f"Lambda[{curve.v_grid[0]:g},{curve.v_grid[-1]:g}] -> "
                  f"[{curve.mean_Lambda[0]:.6g}, {curve.mean_Lambda[-1]:.6g}]")
    return EXIT_OK


def _entry(name, worst, tolerance):
    return {"name": name, "worst": float(worst),
            "tolerance": float(tolerance),
            "passed": bool(worst <= tolerance)}


def _battery(cfg, workers):
    """The invariant battery behind `check`: deterministic identities at
    1e-9, conservation/occupancy at their solver tolerances, statistical
    consistency at 3 standard errors."""
    V = cfg.require_kinetic()
    fs = cfg.field_spec
    checks = []
    n0 = cfg.n_list[0]
    dx = cfg.dx
    vs = sorted({cfg.v_grid[0], cfg.v_grid[len(cfg.v_grid) // 2],
                 cfg.v_grid[-1]})
    v_mid = cfg.v_grid[len(cfg.v_grid) // 2]
    W0 = _default_width(cfg, n0)
    panel = [_field_seed(cfg, s) for s in range(min(cfg.seeds, 5))]

    for model in _models(cfg):
        residual_fn = (zero_temp.shear_coupling_residual
                       if model == "zero_temp"
                       else finite_temp.shear_coupling_residual)
        worst = 0.0
        for seed in panel:
            f = fs.make(seed)
            for v in vs:
                worst = max(worst, residual_fn(f, V, n0, v, dx, W0,
                                               alpha=cfg.alpha,
                                               beta=cfg.beta))
        checks.append(_entry(f"shear_coupling[{model}]", worst, 1e-9))

        worst = shape.alpha_beta_concavity(
            model, fs, V, v=v_mid, n=min(n0, 8), alphas=cfg.alpha_grid,
            betas=cfg.beta_grid, seed=panel[0], dx=dx)
        checks.append(_entry(f"alpha_beta_concavity[{model}]", worst, 1e-9))

        report = shape.domination_check(
            model, fs, V, v0=v_mid, n_list=[max(2, n0 // 2), n0],
            w_offsets=[-0.5, -0.25, 0.25, 0.5], seed_panel=panel[:3],
            dx=dx, alpha=cfg.alpha, beta=cfg.beta)
        checks.append(_entry(f"domination[{model}]", -report.min_slack,
                             1e-9))

        curve = _estimate(cfg, model, n0, workers)
        worst_z = max(r["z_score"]
                      for r in shape.derivative_consistency(curve))
        checks.append(_entry(f"derivative_consistency_z[{model}]",
                             worst_z, 3.0))
        checks.append(_entry(f"convexity_z[{model}]",
                             shape.convexity_report(curve)["worst_z"], 3.0))
        gap = np.abs(curve.mean_Lambda - curve.delta_halved.mean_Lambda)
        bound = np.maximum(2.0 * curve.stderr,
                           0.01 * np.ptp(curve.mean_Lambda))
        checks.append(_entry(f"delta_robustness[{model}]",
                             float((gap / bound).max()), 1.0))

    if "zero_temp" in _models(cfg):
        worst = 0.0
        for i, seed in enumerate(panel):
            f = fs.make(seed)
            m, n = 3 + i, 5 + 2 * i
            worst = max(worst, zero_temp.subadditivity_gap(
                f, V, m, n, vs[i % len(vs)], dx,
                recommended_half_width(max(map(abs, vs)), dx, m + n),
                alpha=cfg.alpha, beta=cfg.beta))
        checks.append(_entry("subadditivity[zero_temp]", worst, 1e-9))

    if "finite_temp" in _models(cfg):
        box = max(3, 2 * (int(1.0 / dx + 1 - 1e-12) // 2) + 1)
        worst = 0.0
        for i, seed in enumerate(panel):
            f = fs.make(seed)
            m, n = 3 + i, 5 + 2 * i
            gap = finite_temp.supermultiplicativity_gap(
                f, V, m, n, vs[i % len(vs)], dx,
                recommended_half_width(max(map(abs, vs)), dx, m + n),
                box_samples=box, alpha=cfg.alpha, beta=cfg.beta)
            worst = max(worst, -gap)
        checks.append(_entry("supermultiplicativity[finite_temp]",
                             worst, 1e-9))

        worst_mass, worst_boundary = 0.0, 0.0
        lat = TiltedLattice(n=n0, v_tilt=0.0, dx=dx, half_width=W0)
        for seed in panel:
            f = fs.make(seed)
            for v in vs:
                p = finite_temp.log_partition_sheared(f, V, lat, v,
                                                      alpha=cfg.alpha,
                                                      beta=cfg.beta)
                worst_mass = max(worst_mass, p.mass_check)
                worst_boundary = max(worst_boundary, p.boundary_fraction)
        checks.append(_entry("mass_check[finite_temp]", worst_mass, 1e-10))
        checks.append(_entry("boundary_occupancy[finite_temp]",
                             worst_boundary, 1e-8))
    return checks


def cmd_check(cfg, run_dir, outputs, workers):
    checks = _battery(cfg, workers)
    passed = all(c["passed"] for c in checks)
    _write_json(run_dir, "check.json",
                {"passed": passed, "checks": checks}, outputs)
    for c in checks:
        print(f"check: {c['name']:42s} worst={c['worst']:<12.4g} "
              f"tol={c['tolerance']:<8.3g} "
              f"{'PASS' if c['passed'] else 'FAIL'}")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_ledger(cfg):
    path = os.path.join(cfg.out_dir, "ledger.jsonl")
    if not os.path.exists(path):
        print(f"no ledger at {path}")
        return EXIT_OK
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            e = json.loads(line)
            print(f"{e['run_id']}  {e['command']:<9s} exit={e['exit_code']} "
                  f"wall={e['wall_time_s']:.2f}s files={len(e['outputs'])} "
                  f"lane={e['kernel_lane']}")
    return EXIT_OK


COMMANDS = {"audit": cmd_audit, "solve": cmd_solve,
            "partition": cmd_partition, "shape": cmd_shape,
            "check": cmd_check}


def _start_run(cfg, command):
    os.makedirs(cfg.out_dir, exist_ok=True)
    ledger_path = os.path.join(cfg.out_dir, "ledger.jsonl")
    seq = 0
    if os.path.exists(ledger_path):
        with open(ledger_path) as fh:
            seq = sum(1 for line in fh if line.strip())
    run_id = f"{cfg.hash[:12]}-{command}-{seq:04d}"
    run_dir = os.path.join(cfg.out_dir, run_id)
    os.makedirs(run_dir, exist_ok=True)
    return run_id, run_dir, ledger_path


def _finish_run(cfg, command, run_id, ledger_path, outputs, t0, workers,
                exit_code):
    entry = {"run_id": run_id,
             "timestamp": datetime.now(timezone.utc).isoformat(),
             "config_hash": cfg.hash,
             "version": f"polymer-lab/{__version__}",
             "command": command,
             "exit_code": exit_code,
             "outputs": [f"{run_id}/{name}" for name in sorted(outputs)],
             "wall_time_s": round(time.time() - t0, 3),
             "kernel_lane": LANE,
             "workers": workers,
             "config": json.loads(canonical_json(cfg.raw))}
    with open(ledger_path, "a") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _parser():
    parser = argparse.ArgumentParser(
        prog="polymer-lab",
        description="Directed-polymer and last-passage experiments on "
                    "tilted lattices")
    parser.add_argument("--version", action="version",
                        version=f"polymer-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("audit", "validate the kinetic energy assumptions"),
                      ("solve", "one zero-temperature instance"),
                      ("partition", "one positive-temperature instance"),
                      ("shape", "Monte Carlo shape curves"),
                      ("check", "run the invariant battery"),
                      ("ledger", "list recorded runs")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes "
                            "(default: $POLYMER_LAB_WORKERS or 1)")
        p.add_argument("--out", default=None,
                       help="output directory (overrides config)")
        p.add_argument("--master-seed", type=int, default=None,
                       help="override experiment.master_seed")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, out_dir=args.out,
                          master_seed=args.master_seed)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    workers = args.workers
    if workers is None:
        try:
            workers = int(os.environ.get("POLYMER_LAB_WORKERS", "1"))
        except ValueError:
            workers = 1
    if args.command == "ledger":
        return cmd_ledger(cfg)
    t0 = time.time()
    run_id, run_dir, ledger_path = _start_run(cfg, args.command)
    outputs = []
    try:
        code = COMMANDS[args.command](cfg, run_dir, outputs, workers)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        code = EXIT_CONFIG
    except WindowExhaustedError as err:
        print(f"window exhausted: {err}", file=sys.stderr)
        print(f"  context: {json.dumps(err.context, sort_keys=True)}",
              file=sys.stderr)
        code = EXIT_RESOURCE
    _finish_run(cfg, args.command, run_id, ledger_path, outputs, t0,
                workers, code)
    print(f"run {run_id}: exit {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
