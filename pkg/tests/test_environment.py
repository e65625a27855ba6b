"""Potential fields: purity, view algebra, bounds, and stream statistics."""

import concurrent.futures
import math

import numpy as np
import pytest

from polymer_lab import environment as env


def cosine_field(seed=7, **kw):
    params = {"offset": 1.0, "amplitudes": [1.0, 0.5], "frequencies": [1.0, 2.3]}
    params.update(kw)
    return env.make_field("cosine", params, seed)


def shot_field(seed=42, **kw):
    params = {"rate": 1.0, "width": 0.5, "height": 1.0}
    params.update(kw)
    return env.make_field("shot_noise", params, seed)


# -- basics ------------------------------------------------------------------


def test_constant_field():
    f = env.make_field("constant", {"c": 1.5}, 0)
    assert f.evaluate(3, -2.7) == 1.5
    assert f.lower_bound == 1.5
    assert f.running_sup(0, 10.0) == 1.5


def test_cosine_forced_phase():
    f = env.make_field(
        "cosine",
        {"offset": 1.0, "amplitudes": [1.0], "frequencies": [1.0], "fixed_phases": [0.0]},
        0,
    )
    # M + a at the crest, for every slice
    assert f.evaluate(0, 0.0) == pytest.approx(2.0, abs=1e-15)
    assert f.evaluate(11, 0.0) == pytest.approx(2.0, abs=1e-15)
    assert f.evaluate(0, math.pi) == pytest.approx(0.0, abs=1e-12)


def test_invalid_parameters():
    with pytest.raises(env.InvalidParameterError):
        env.make_field("cosine", {"amplitudes": [1.0], "frequencies": [0.0]}, 0)
    with pytest.raises(env.InvalidParameterError):
        env.make_field("cosine", {"amplitudes": [-0.1], "frequencies": [1.0]}, 0)
    with pytest.raises(env.InvalidParameterError):
        env.make_field("shot_noise", {"rate": 0.0}, 0)
    with pytest.raises(env.InvalidParameterError):
        env.make_field("shot_noise", {"width": -1.0}, 0)
    with pytest.raises(env.InvalidParameterError):
        env.make_field("slab", {}, 0)
    with pytest.raises(env.InvalidParameterError):
        env.make_field("cosine", {"amplitudes": [1.0], "frequencies": [1.0]}, -3)


def test_evaluate_is_pure_and_reusable():
    for f in (cosine_field(), shot_field()):
        a = f.evaluate(5, 0.37)
        b = f.evaluate(5, 0.37)
        assert a == b
        # rebuilt field, same seed: bit-identical
        g = env.make_field(f.kind, f.params, f.seed)
        assert g.evaluate(5, 0.37) == a


def test_concurrent_evaluation_bit_identical():
    f = shot_field()
    ks = [k % 7 for k in range(200)]
    xs = [0.31 * k - 3.0 for k in range(200)]
    ref = [f.evaluate(k, x) for k, x in zip(ks, xs)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=8) as ex:
        got = list(ex.map(f.evaluate, ks, xs))
    assert got == ref


def test_slice_matches_pointwise_bitwise():
    for f in (cosine_field(), shot_field()):
        xs = np.linspace(-4.0, 4.0, 101)
        batch = f.evaluate_slice(3, xs)
        solo = np.array([f.evaluate(3, x) for x in xs])
        assert np.array_equal(batch, solo)


# -- view algebra -------------------------------------------------------------


def test_shear_view_definition():
    f = cosine_field()
    v = 0.7
    for k in (0, 3, 11):
        for x in (-1.5, 0.0, 2.25):
            assert f.shear_view(v).evaluate(k, x) == f.evaluate(k, x + v * k)


def test_shear_composition_exact():
    f = shot_field()
    g = f.shear_view(0.25).shear_view(0.5)
    h = f.shear_view(0.75)
    assert g == h
    roundtrip = f.shear_view(0.3).shear_view(-0.3)
    assert roundtrip.v_shear == 0.0
    for k in (0, 2):
        assert roundtrip.evaluate(k, 1.31) == f.evaluate(k, 1.31)


def test_shift_view():
    f = cosine_field()
    g = f.shift(dk=2, dx=1.0)
    assert g.evaluate(0, 0.5) == f.evaluate(2, 1.5)
    # shifting a sheared view keeps the sheared coordinates consistent
    s = f.shear_view(0.5).shift(dk=4, dx=0.0)
    assert s.evaluate(1, 0.0) == f.shear_view(0.5).evaluate(5, 0.0)


# -- shot noise oracle ---------------------------------------------------------


def shot_oracle(f, k, x):
    # direct summation over every point that can reach x
    w = f.params["width"]
    h = f.params["height"]
    total = 0.0
    for xi in f.shot_points(k, x - w - 1.0, x + w + 1.0):
        u = (x - xi) / w
        if abs(u) <= 1.0:
            total += h * (1.0 - u * u) ** 3
    return total


def test_shot_noise_matches_point_enumeration():
    f = shot_field(seed=42)
    for k in range(4):
        for x in (-2.0, -0.3, 0.0, 0.9, 3.7):
            assert f.evaluate(k, x) == pytest.approx(shot_oracle(f, k, x), abs=1e-14)


def test_shot_noise_zero_away_from_points():
    f = shot_field(seed=42)
    w = f.params["width"]
    pts = f.shot_points(0, -20.0, 20.0)
    # find a probe at least w away from every point
    for x in np.arange(-18.0, 18.0, 0.01):
        if np.min(np.abs(pts - x)) > w + 0.01:
            assert f.evaluate(0, x) == 0.0
            return
    pytest.skip("no empty stretch in this realization")


def test_shot_points_reproducible():
    f = shot_field(seed=9)
    a = f.shot_points(2, -5.0, 5.0)
    b = f.shot_points(2, -5.0, 5.0)
    assert np.array_equal(a, b)
    # count in a long window is Poisson-ish: mean rate * length
    assert 0 < f.shot_points(0, -50.0, 50.0).size < 400


# -- bounds -------------------------------------------------------------------


def test_lower_bound_massive_probe():
    rng = np.random.default_rng(0)
    for f in (cosine_field(), shot_field()):
        mf = f.lower_bound
        for k in range(10):
            xs = rng.uniform(-50.0, 50.0, 100_000)
            assert np.all(f.evaluate_slice(k, xs) >= mf)


def test_running_sup_cosine_pinned():
    f = env.make_field(
        "cosine",
        {"offset": 0.0, "amplitudes": [1.0], "frequencies": [1.0], "fixed_phases": [0.0]},
        0,
    )
    assert abs(f.running_sup(0, 0.0) - 1.0) <= 1e-6


def test_running_sup_dominates_dense_grid():
    for f in (cosine_field(seed=3), shot_field(seed=3)):
        for x in (-1.0, 0.2, 4.4):
            bound = f.running_sup(1, x)
            xs = np.linspace(x - 0.5, x + 0.5, 40_001)
            dense = float(np.max(f.evaluate_slice(1, xs)))
            assert bound >= dense
            assert bound - dense <= 1e-4


# -- stream statistics ---------------------------------------------------------


def _panel(kind, n_seeds=10_000):
    f0, f0_far, f1 = [], [], []
    for s in range(n_seeds):
        if kind == "cosine":
            f = cosine_field(seed=s)
        else:
            f = shot_field(seed=s)
        here = f.evaluate_slice(0, np.array([0.0, 17.3]))
        f0.append(here[0])
        f0_far.append(here[1])
        f1.append(f.evaluate(1, 0.0))
    return np.array(f0), np.array(f0_far), np.array(f1)


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["cosine", "shot_noise"])
def test_stationarity_and_time_independence(kind):
    f0, f0_far, f1 = _panel(kind)
    n = f0.size
    # spatial stationarity: same mean at distant probes
    se = math.sqrt(np.var(f0, ddof=1) / n + np.var(f0_far, ddof=1) / n)
    assert abs(np.mean(f0) - np.mean(f0_far)) <= 4.0 * se
    # adjacent slices are independent: correlation within 4 / sqrt(N)
    corr = np.corrcoef(f0, f1)[0, 1]
    assert abs(corr) <= 4.0 / math.sqrt(n)
    # slice marginals share their mean across time
    se01 = math.sqrt(np.var(f0, ddof=1) / n + np.var(f1, ddof=1) / n)
    assert abs(np.mean(f0) - np.mean(f1)) <= 4.0 * se01


@pytest.mark.slow
def test_shot_noise_mean_level():
    # mean of F is rate * height * width * integral(phi) = rate*h*w*32/35
    vals = np.array([shot_field(seed=s).evaluate(0, 0.25) for s in range(10_000)])
    expected = 1.0 * 1.0 * 0.5 * 32.0 / 35.0
    se = math.sqrt(np.var(vals, ddof=1) / vals.size)
    assert abs(np.mean(vals) - expected) <= 4.0 * se
