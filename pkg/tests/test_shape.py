"""Shape curves: anchors, statistics, concavity, domination, determinism."""

import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from polymer_lab import environment, kinetic, shape
from polymer_lab.lattice import WindowExhaustedError

QUAD = kinetic.presets()["quadratic"]
QUARTIC = kinetic.presets()["quartic"]
DOUBLE_WELL = kinetic.presets()["double_well"]

ZERO_FIELD = environment.FieldSpec("constant", {"c": 0.0})
COSINE = environment.FieldSpec("cosine", {"offset": 0.8,
                                          "amplitudes": [0.6, 0.3],
                                          "frequencies": [1.4, 2.7]})


def small_curve(model, field_spec, V, v_grid, n=6, seeds=4, dx=0.25,
                half_width=None, master_seed=7, **kw):
    return shape.estimate_shape(model, field_spec, V, v_grid, n=n, dx=dx,
                                half_width=half_width, seeds=seeds,
                                master_seed=master_seed, **kw)


def test_quadratic_zero_field_anchor():
    c = small_curve("zero_temp", ZERO_FIELD, QUAD, [-1.0, 0.0, 1.0],
                    half_width=12)
    assert c.mean_Lambda.tolist() == [1.0, 0.0, 1.0]
    assert c.mean_deriv_stat.tolist() == [-2.0, 0.0, 2.0]
    assert np.all(c.stderr == 0.0)
    assert math.isnan(c.fd_slope[0]) and math.isnan(c.fd_slope[-1])
    assert c.fd_slope[1] == 0.0  # centered difference of v^2 at v = 0
    assert c.delta_halved.mean_Lambda.tolist() == [1.0, 0.0, 1.0]
    assert c.delta_halved.dx == c.dx / 2


def test_constant_field_shifts_curve():
    base = small_curve("zero_temp", ZERO_FIELD, QUAD, [-0.5, 0.0, 0.5],
                       half_width=10)
    lifted = small_curve(
        "zero_temp", environment.FieldSpec("constant", {"c": 0.9}),
        QUAD, [-0.5, 0.0, 0.5], half_width=10)
    assert np.allclose(lifted.mean_Lambda - base.mean_Lambda, 0.9,
                       rtol=0, atol=1e-12)
    assert np.array_equal(lifted.mean_deriv_stat, base.mean_deriv_stat)


def test_quartic_derivative_statistic_matches_slope():
    c = small_curve("zero_temp", ZERO_FIELD, QUARTIC, [0.9, 1.0, 1.1],
                    half_width=14)
    # Lambda(v) = v^4 on a zero field: the statistic is exact, the centered
    # difference carries the h^2 bias 4*v*h^2.
    assert c.mean_deriv_stat[1] == 4.0
    h = 0.1
    assert abs(c.fd_slope[1] - (4.0 + 4.0 * h * h)) <= 1e-9


def test_two_step_curve_matches_quadrature_oracle():
    v_grid = [-0.4, 0.0, 0.4]
    c = small_curve("finite_temp", COSINE, QUAD, v_grid, n=2, seeds=2,
                    dx=0.25, half_width=30, master_seed=5)
    for s in range(c.seeds):
        f = COSINE.make(shape.derive_task_seed(5, s))
        for i, v in enumerate(v_grid):
            def integrand(x):
                return math.exp(-QUAD.eval(x + v) - QUAD.eval(v - x)
                                - f.evaluate(1, x))
            z, _ = quad(integrand, -9, 9, epsabs=1e-14, epsrel=1e-13,
                        limit=300)
            target = -0.5 * (math.log(z) - f.evaluate(0, 0.0))
            assert abs(c.lambda_samples[s, i] - target) <= 1e-8 * abs(target)


def test_derivative_consistency_quadratic_degeneracy():
    c = small_curve("finite_temp", COSINE, QUAD, np.linspace(-1, 1, 5),
                    n=6, seeds=6)
    for row in shape.derivative_consistency(c):
        # per seed the finite difference and the statistic coincide exactly
        # for quadratic kinetic energies, so both the gap and its standard
        # error are rounding noise.
        assert abs(row["fd_slope"] - row["mean_deriv_stat"]) <= 1e-12
        assert row["stderr_combined"] <= 1e-12
        assert row["z_score"] <= 3.0


def test_convexity_on_double_well_shoulder():
    # On [2, 3] the double well is convex and the zero-field shape equals it.
    grid = np.linspace(2.0, 3.0, 5)
    c = small_curve("zero_temp", ZERO_FIELD, DOUBLE_WELL, grid,
                    half_width=60)
    assert np.allclose(c.mean_Lambda, [DOUBLE_WELL.eval(v) for v in grid],
                       rtol=0, atol=1e-12)
    rep = shape.convexity_report(c)
    assert rep["max_midpoint_violation"] <= 1e-12
    assert rep["worst_z"] <= 3.0


def test_convexity_statistical_panel():
    for model in ("zero_temp", "finite_temp"):
        c = small_curve(model, COSINE, QUARTIC, np.linspace(-0.9, 0.9, 7),
                        n=8, seeds=16, master_seed=3)
        rep = shape.convexity_report(c)
        assert len(rep["z_scores"]) == 5
        assert rep["worst_z"] <= 3.0


def test_delta_robustness_invariant():
    for model in ("zero_temp", "finite_temp"):
        c = small_curve(model, COSINE, QUAD, np.linspace(-1, 1, 5),
                        n=8, seeds=6, master_seed=2)
        gap = np.abs(c.mean_Lambda - c.delta_halved.mean_Lambda)
        bound = np.maximum(2.0 * c.stderr, 0.01 * np.ptp(c.mean_Lambda))
        assert np.all(gap <= bound)


def test_alpha_beta_concavity_both_models():
    grid = np.linspace(0.5, 2.0, 5)
    for model in ("zero_temp", "finite_temp"):
        worst = shape.alpha_beta_concavity(model, COSINE, QUAD, v=0.3, n=6,
                                           alphas=grid, betas=grid, seed=4,
                                           dx=0.25)
        assert worst <= 1e-9


def test_alpha_slope_bracket_contains_vbar():
    for model in ("zero_temp", "finite_temp"):
        br = shape.alpha_slope_bracket(model, COSINE, QUAD, v=0.3, n=6,
                                       dx=0.25, half_width=12, alpha=1.0,
                                       beta=1.0, seed=4)
        assert br["lo_slope"] - 1e-6 <= br["vbar"] <= br["hi_slope"] + 1e-6


def test_domination_quadratic_exact_taylor():
    offsets = [-0.6, -0.2, 0.2, 0.6]
    rep = shape.domination_check("zero_temp", COSINE, QUAD, v0=0.4,
                                 n_list=[4, 6, 8], w_offsets=offsets,
                                 seed_panel=range(4), dx=0.25)
    assert rep.dominated and not rep.violations
    # V'' == 2 everywhere: the certificate's slack reduces to (w-v0)^2/2.
    assert abs(rep.min_slack - 0.5 * 0.2 ** 2) <= 1e-9
    assert rep.h_quadratic_coefficient == 1.5
    assert np.allclose(rep.g_n_sequence, 0.8, rtol=0, atol=1e-12)
    assert rep.bracket == (rep.g_n_sequence[1:].min(),
                           rep.g_n_sequence[1:].max())


def test_domination_quartic_zero_field():
    rep = shape.domination_check("zero_temp", ZERO_FIELD, QUARTIC, v0=1.0,
                                 n_list=[4, 8], w_offsets=[-1.0, -0.5, 0.5, 1.0],
                                 seed_panel=[0], dx=0.25, half_width=40)
    assert rep.dominated
    assert rep.min_slack >= -1e-9
    assert np.allclose(rep.g_n_sequence, 4.0, rtol=0, atol=1e-12)


def test_domination_finite_temperature():
    rep = shape.domination_check("finite_temp", COSINE, QUARTIC, v0=0.3,
                                 n_list=[4, 6], w_offsets=[-0.5, 0.5],
                                 seed_panel=range(3), dx=0.25)
    assert rep.dominated and rep.min_slack >= -1e-9
    payload = json.dumps(rep.to_dict())
    assert "dominated" in payload


def test_estimate_shape_deterministic_and_worker_invariant():
    kw = dict(model="finite_temp", field_spec=COSINE, V=QUAD,
              v_grid=[-0.5, 0.0, 0.5], n=4, dx=0.25, half_width=14,
              seeds=3, master_seed=11)
    a = shape.estimate_shape(**kw)
    b = shape.estimate_shape(**kw)
    c = shape.estimate_shape(**kw, workers=3)
    for other in (b, c):
        assert np.array_equal(a.lambda_samples, other.lambda_samples)
        assert np.array_equal(a.deriv_samples, other.deriv_samples)
        assert np.array_equal(a.delta_halved.lambda_samples,
                              other.delta_halved.lambda_samples)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_task_seed_ignores_velocity_and_length():
    # one realization serves the whole grid: the samples at different v are
    # perfectly correlated for quadratic V (constant vertical shifts).
    c = small_curve("zero_temp", COSINE, QUAD, [-0.5, 0.0, 0.5], n=6,
                    seeds=5)
    centered = c.lambda_samples - c.lambda_samples.mean(axis=0)
    assert np.allclose(centered[:, 0], centered[:, 1], rtol=0, atol=1e-12)
    assert shape.derive_task_seed(3, 0) != shape.derive_task_seed(3, 1)
    assert shape.derive_task_seed(3, 2) == shape.derive_task_seed(3, 2)


def test_curve_rows_schema():
    c = small_curve("zero_temp", ZERO_FIELD, QUAD, [-1.0, 0.0, 1.0],
                    half_width=12)
    rows = shape.curve_rows(c)
    assert len(rows) == 6  # both spacings
    assert set(rows[0]) == {"v", "n", "delta", "mean_lambda", "stderr",
                            "deriv_stat", "fd_slope", "z"}
    assert sorted({r["delta"] for r in rows}) == [0.125, 0.25]
    assert math.isnan(rows[0]["fd_slope"]) and rows[1]["fd_slope"] == 0.0


def test_window_exhaustion_annotated():
    omega = 0.4
    trough = environment.FieldSpec(
        "cosine", {"offset": 5.0, "amplitudes": [5.0], "frequencies": [omega],
                   "fixed_phases": [math.pi - omega * 20.0]})
    with pytest.raises(WindowExhaustedError) as err:
        shape.estimate_shape("zero_temp", trough, QUAD, [-0.2, 0.0, 0.2],
                             n=12, dx=0.5, half_width=2, seeds=2,
                             master_seed=0)
    assert "seed_index=0" in str(err.value)
    assert "v=" in str(err.value)
    assert err.value.context["final_half_width"] == 8


def test_invalid_arguments():
    with pytest.raises(ValueError):
        shape.estimate_shape("lukewarm", COSINE, QUAD, [-1, 0, 1], n=4,
                             dx=0.25, half_width=10)
    with pytest.raises(ValueError):
        shape.estimate_shape("zero_temp", COSINE, QUAD, [0.0, 1.0], n=4,
                             dx=0.25, half_width=10)
    with pytest.raises(ValueError):
        shape.estimate_shape("zero_temp", COSINE, QUAD, [1.0, 0.0, -1.0],
                             n=4, dx=0.25, half_width=10)
    with pytest.raises(ValueError):
        shape.estimate_shape("zero_temp", COSINE, QUAD, [-1, 0, 1], n=4,
                             dx=0.25, half_width=10, seeds=1)
    with pytest.raises(ValueError):
        shape.domination_check("zero_temp", COSINE, QUAD, v0=0.0,
                               n_list=[4], w_offsets=[0.0],
                               seed_panel=[0], dx=0.25)
    with pytest.raises(ValueError):
        shape.domination_check("zero_temp", COSINE, QUAD, v0=0.0,
                               n_list=[4], w_offsets=[1.5],
                               seed_panel=[0], dx=0.25)
    with pytest.raises(ValueError):
        shape.alpha_beta_concavity("zero_temp", COSINE, QUAD, v=0.0, n=4,
                                   alphas=[0.0, 1.0, 2.0],
                                   betas=[1.0, 2.0, 3.0], seed=0, dx=0.25)
