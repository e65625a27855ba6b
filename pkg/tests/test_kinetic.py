"""Kinetic energies: derivatives, certified bounds, audits, tail constants."""

import numpy as np
import pytest

from polymer_lab import kinetic


def table_energy(theta=0.75):
    xs = np.linspace(-30.0, 30.0, 301)
    vals = xs ** 2 + 0.05 * xs ** 4
    return kinetic.make_kinetic("custom_table", {"x": xs, "values": vals, "theta": theta})


def test_polynomial_point_values():
    q = kinetic.presets()["quartic"]
    assert q.eval(2.0) == 16.0
    assert q.grad(2.0) == 32.0
    assert q.hess(2.0) == 48.0
    w = kinetic.presets()["double_well"]
    assert w.eval(1.0) == -2.0
    assert w.grad(1.0) == -2.0
    assert w.hess(1.0) == 6.0


def test_make_kinetic_validation():
    with pytest.raises(ValueError):
        kinetic.make_kinetic("polynomial", {"coefficients": [0, 0, 0, 1.0]})  # odd degree
    with pytest.raises(ValueError):
        kinetic.make_kinetic("polynomial", {"coefficients": [0, 0, -1.0]})  # negative leading
    with pytest.raises(ValueError):
        kinetic.make_kinetic("quadratic", {"a": 0.0})
    with pytest.raises(ValueError):
        kinetic.make_kinetic("polynomial", {"coefficients": [0, 0, 1.0], "theta": 1.0})
    with pytest.raises(ValueError):
        kinetic.make_kinetic("custom_table", {"x": [0, 1, 1, 2], "values": [0, 1, 1, 4]})


def test_theta_defaults():
    assert kinetic.presets()["quadratic"].theta == 0.5
    assert kinetic.presets()["quartic"].theta == 0.75


@pytest.mark.parametrize("name", ["quadratic", "quartic", "double_well"])
def test_fd_consistency(name):
    V = kinetic.presets()[name]
    h = 1e-4
    xs = np.linspace(-50.0, 50.0, 401)
    fd_grad = (V.eval(xs + h) - V.eval(xs - h)) / (2 * h)
    scale = np.maximum(np.abs(V.grad(xs)), 1.0)
    assert np.max(np.abs(fd_grad - V.grad(xs)) / scale) <= 1e-6
    fd_hess = (V.grad(xs + h) - V.grad(xs - h)) / (2 * h)
    scale = np.maximum(np.abs(V.hess(xs)), 1.0)
    assert np.max(np.abs(fd_hess - V.hess(xs)) / scale) <= 1e-6


def test_table_matches_sampled_function():
    V = table_energy()
    xs = np.linspace(-20.0, 20.0, 101)
    assert np.max(np.abs(V.eval(xs) - (xs ** 2 + 0.05 * xs ** 4))) <= 1e-2
    fd = (V.eval(xs + 1e-4) - V.eval(xs - 1e-4)) / 2e-4
    assert np.max(np.abs(fd - V.grad(xs)) / np.maximum(np.abs(V.grad(xs)), 1.0)) <= 1e-6


def test_lower_bound_is_true_bound():
    xs = np.linspace(-60.0, 60.0, 600_001)
    for name, V in kinetic.presets().items():
        mv = V.lower_bound
        dense = float(np.min(V.eval(xs)))
        assert mv <= dense
        assert dense - mv <= 1e-6
    assert kinetic.presets()["double_well"].lower_bound == pytest.approx(-2.25, abs=1e-9)
    assert kinetic.presets()["quartic"].lower_bound == pytest.approx(0.0, abs=1e-9)


def test_lower_bound_random_polynomials():
    rng = np.random.default_rng(5)
    xs = np.linspace(-80.0, 80.0, 400_001)
    for _ in range(20):
        deg = rng.choice([2, 4, 6])
        coeffs = rng.uniform(-3, 3, deg + 1)
        coeffs[-1] = rng.uniform(0.5, 2.0)
        V = kinetic.make_kinetic("polynomial", {"coefficients": coeffs})
        assert V.lower_bound <= float(np.min(V.eval(xs))) + 1e-12


def window_oracle(V, x, half_width=1.0):
    grid = np.linspace(x - half_width, x + half_width, 2_000_001)
    return float(np.max(V.hess(grid)))


def test_window_sup_hess_exact_for_polynomials():
    q = kinetic.presets()["quartic"]
    assert q.window_sup_hess(0.0) == 12.0
    assert q.window_sup_hess(2.5) == 12.0 * 3.5 ** 2
    w = kinetic.presets()["double_well"]
    assert w.window_sup_hess(0.0) == 6.0
    for V in (q, w):
        for x in (-2.3, -0.4, 0.9, 3.1):
            assert V.window_sup_hess(x) == pytest.approx(window_oracle(V, x), rel=1e-9)
    # vectorized equals pointwise
    xs = np.linspace(-3, 3, 23)
    assert np.array_equal(q.window_sup_hess(xs), [q.window_sup_hess(x) for x in xs])


def test_window_sup_hess_table_upper_bounds():
    V = table_energy()
    for x in (-1.7, 0.0, 2.2):
        bound = V.window_sup_hess(x)
        dense = float(np.max(V.hess(np.linspace(x - 1, x + 1, 200_001))))
        assert bound >= dense - 1e-12
        assert bound - dense <= 1e-2


@pytest.mark.parametrize("name", ["quadratic", "quartic", "double_well"])
def test_taylor_envelope(name):
    # V(x+w) <= V(x+v) + (w-v) V'(x+v) + (w-v)^2/2 * sup_{|r|<=1} V''(x+v+r)
    V = kinetic.presets()[name]
    rng = np.random.default_rng(11)
    x = rng.uniform(-8, 8, 10_000)
    v = rng.uniform(-2, 2, 10_000)
    w = v + rng.uniform(-1, 1, 10_000)
    lhs = V.eval(x + w)
    rhs = V.eval(x + v) + (w - v) * V.grad(x + v) \
        + 0.5 * (w - v) ** 2 * V.window_sup_hess(x + v)
    assert np.all(lhs <= rhs + 1e-12 * (1.0 + np.abs(lhs)))


def test_domination_witnesses_cover_grid():
    incs = np.arange(-80, 81) * 0.1
    for name, V in kinetic.presets().items():
        for v in (0.0, 0.3, 1.2):
            A, C, b, cutoff = V.domination_witnesses(v, incs)
            lhs = V.window_sup_hess(incs + v)
            rhs = A + C * (V.eval(incs + v) - b)
            assert np.all(lhs <= rhs + 1e-12), (name, v)


def test_audit_presets_pass():
    for name, V in kinetic.presets().items():
        x_max = 20.0 if name == "double_well" else 10.0
        rep = kinetic.audit(V, x_max=x_max)
        assert rep.passed, (name, rep.to_dict())
        assert rep.tail_constant > 0
        assert rep.tail_cutoff == x_max / 10.0


def test_audit_table_energy():
    rep = kinetic.audit(table_energy(), x_max=10.0)
    assert rep.coercivity_ok
    assert rep.grad_floor_ok
    assert rep.second_over_v_ok


def test_audit_rejects_small_xmax():
    with pytest.raises(ValueError):
        kinetic.audit(kinetic.presets()["quadratic"], x_max=5.0)


def test_audit_flags_bad_table():
    # a short table whose extrapolation cannot certify coercive tails
    xs = np.linspace(-3.0, 3.0, 31)
    V = kinetic.make_kinetic("custom_table", {"x": xs, "values": np.cos(xs)})
    rep = kinetic.audit(V, x_max=10.0)
    assert not rep.passed


def test_tail_mass_ratios_quadratic():
    V = kinetic.presets()["quadratic"]
    xs = np.linspace(3.0, 10.0, 20)
    ratios = kinetic.tail_mass_ratios(V, xs)
    # Mills bound: integral_x^inf e^{-y^2} dy < e^{-x^2} / (2x)
    assert np.all(ratios <= 1.0 / (2.0 * xs) * (1 + 1e-3))
    assert np.max(ratios) <= 1.0 / 6.0 + 1e-3
    # and the audit's certified constant dominates all of them
    rep = kinetic.audit(V, x_max=10.0)
    assert np.all(ratios <= rep.tail_constant)
