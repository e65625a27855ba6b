"""Benchmark the compiled kernels against the pure-Python fallback.

Times min-plus dynamic programming and the log-space transfer recursions
on synthetic problems of growing size, reports best-of-k wall times and
speedups, and verifies both lanes agree on every problem before timing.

Usage: python benchmarks/kernel_benchmark.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from polymer_lab.kernels import available_lanes

SIZES = (  # (n slices, window half width, edge reach in nodes)
    (16, 40, 24),
    (32, 80, 40),
    (64, 120, 56),
    (128, 165, 72),
)


def make_problem(n, half_width, reach, seed):
    rng = np.random.default_rng(seed)
    S = 2 * half_width + 1
    D = 2 * reach + 1
    site = rng.normal(0.0, 1.0, (n, S))
    d = np.arange(-reach, reach + 1) * 0.25
    edge = np.tile(d * d, (n, 1))
    return site, edge, -reach


def best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="take the best of this many timings")
    args = parser.parse_args()

    lanes = available_lanes()
    if "compiled" not in lanes:
        print("compiled lane unavailable; nothing to compare")
        return
    print(f"{'kernel':<20}{'n':>5}{'S':>6}{'D':>6}"
          f"{'python':>12}{'compiled':>12}{'speedup':>9}")
    for n, half_width, reach in SIZES:
        site, edge, d_lo = make_problem(n, half_width, reach, seed=n)
        S = site.shape[1]
        mid = S // 2
        log_dx = float(np.log(0.25))

        rows = [
            ("dp_solve", lambda lane: lane.dp_solve(site, edge, d_lo,
                                                    mid, mid)),
            ("transfer_forward", lambda lane: lane.transfer_forward(
                site, edge, d_lo, log_dx, mid)),
            ("transfer_backward", lambda lane: lane.transfer_backward(
                site, edge, d_lo, log_dx, mid)),
        ]
        for name, call in rows:
            t_py, out_py = best_of(lambda: call(lanes["python"]),
                                   args.repeats)
            t_c, out_c = best_of(lambda: call(lanes["compiled"]),
                                 args.repeats)
            if name == "dp_solve":
                assert out_py[0] == out_c[0]
                assert np.array_equal(out_py[1], out_c[1])
            else:
                assert np.allclose(out_py, out_c, rtol=0, atol=1e-12)
            print(f"{name:<20}{n:>5}{S:>6}{edge.shape[1]:>6}"
                  f"{t_py * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
                  f"{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
