import math

import numpy as np
import pytest

import h1_curve
from h1_curve import ClassicalParams, CurveParams
from h1_errors import ConfigError


def random_params(rng, n=25):
    params = []
    for _ in range(n):
        lam = rng.uniform(0.1, 0.95)
        t0 = rng.uniform(0.0, 3.0)
        mu = rng.uniform(0.05, 0.99) * h1_curve.c_lambda(lam, t0)
        params.append(CurveParams(eta=rng.uniform(0.01, 2.0), lam=lam, mu=mu, t0=t0,
                                  x0=rng.uniform(0.01, 1.0)))
    return params


@pytest.fixture
def curve():
    return CurveParams(eta=0.5, lam=0.8, mu=0.8, t0=0.0, x0=0.1)


def test_xi_at_zero_is_one(curve):
    assert h1_curve.xi(0.0, curve) == 1.0


def test_xi_at_one(curve):
    expected = math.exp(math.log(0.8) + math.log(1 + math.sqrt(2)) * math.log(0.8))
    assert h1_curve.xi(1.0, curve) == pytest.approx(expected, rel=1e-14)


def test_xi_decreasing(curve):
    values = h1_curve.xi(np.linspace(0, 10, 101), curve)
    assert np.all(np.diff(values) < 0)
    assert h1_curve.xi(10.0, curve) < h1_curve.xi(1.0, curve)


def test_xi_does_not_underflow_to_nan():
    p = CurveParams(eta=0.5, lam=0.01, mu=0.5)
    value = h1_curve.xi(5000.0, p)
    assert np.isfinite(value) and value >= 0


def test_curve_starts_at_x0(curve):
    assert h1_curve.curve_value(0.0, curve) == 0.1


def test_curve_tends_to_asymptote(curve):
    assert h1_curve.asymptote(curve) == pytest.approx(0.3)
    assert h1_curve.curve_value(200.0, curve) == pytest.approx(0.3, rel=1e-6)


def test_curve_rejects_times_before_t0(curve):
    with pytest.raises(ConfigError):
        h1_curve.curve_value(-0.5, curve)


def test_logistic_reduction():
    p = CurveParams(eta=0.5, lam=0.8, mu=1.0, t0=1.0, x0=0.1)
    t = np.linspace(1.0, 30.0, 50)
    expected = 0.1 * (0.5 + 0.8**1.0) / (0.5 + 0.8**t)
    np.testing.assert_allclose(h1_curve.curve_value(t, p), expected, rtol=1e-13)


def test_asymptote_second_study():
    p = CurveParams(eta=0.0003, lam=0.6, mu=0.8, t0=0.0, x0=0.000125)
    assert h1_curve.asymptote(p) == pytest.approx(0.000125 * (1 + 1 / 0.0003))
    assert h1_curve.asymptote(p) == pytest.approx(0.41679, abs=1e-5)


def test_invalid_parameters_rejected():
    with pytest.raises(ConfigError):
        CurveParams(eta=0.5, lam=1.0, mu=0.8)
    with pytest.raises(ConfigError):
        CurveParams(eta=-0.1, lam=0.8, mu=0.8)
    with pytest.raises(ConfigError):
        CurveParams(eta=0.5, lam=0.8, mu=1.25)  # exactly c_lambda(0)
    with pytest.raises(ConfigError):
        CurveParams(eta=0.5, lam=0.8, mu=0.8, x0=0.0)


def test_is_increasing():
    assert h1_curve.is_increasing(0.8, 1.2)
    assert not h1_curve.is_increasing(0.8, 1.3)
    assert not h1_curve.is_increasing(1.0, 0.5)
    assert h1_curve.is_increasing(0.8, 1.3, t0=3.0)


def test_to_classical_example(curve):
    c = h1_curve.to_classical(curve)
    assert c.M == pytest.approx(0.3)
    assert c.rho == pytest.approx(-math.log(0.8))
    assert c.theta == pytest.approx(-math.log(0.8))
    assert c.a == pytest.approx(2.0)


def test_rho_from_lambda():
    p = CurveParams(eta=1.0, lam=math.exp(-1.0), mu=0.5)
    assert h1_curve.to_classical(p).rho == pytest.approx(1.0, abs=1e-15)


def test_classical_round_trip():
    for p in random_params(np.random.default_rng(0)):
        back = h1_curve.from_classical(h1_curve.to_classical(p))
        for name in ("eta", "lam", "mu", "t0", "x0"):
            assert getattr(back, name) == pytest.approx(getattr(p, name), rel=1e-12, abs=1e-12)


def test_from_classical_rejects_decay():
    with pytest.raises(ConfigError):
        h1_curve.from_classical(ClassicalParams(M=1.0, rho=-0.1, theta=0.0, x0=0.1))


def test_classical_value_matches_curve(curve):
    t = np.linspace(0.0, 40.0, 81)
    c = h1_curve.to_classical(curve)
    np.testing.assert_allclose(h1_curve.classical_value(t, c), h1_curve.curve_value(t, curve), rtol=1e-12)


def test_growth_rate_solves_ode(curve):
    t = np.linspace(0.5, 20.0, 40)
    h = 1e-6
    slope = (h1_curve.curve_value(t + h, curve) - h1_curve.curve_value(t - h, curve)) / (2 * h)
    expected = h1_curve.growth_rate(t, curve) * h1_curve.curve_value(t, curve)
    np.testing.assert_allclose(slope, expected, rtol=1e-6, atol=1e-12)


def test_xi_derivative_matches_finite_difference(curve):
    t = np.linspace(0.1, 20.0, 30)
    h = 1e-6
    numeric = (h1_curve.xi(t + h, curve) - h1_curve.xi(t - h, curve)) / (2 * h)
    np.testing.assert_allclose(h1_curve.xi_derivative(t, curve), numeric, rtol=1e-6, atol=1e-14)


def test_monotone_and_bounded_for_random_params():
    for p in random_params(np.random.default_rng(1)):
        t = np.linspace(p.t0, p.t0 + 40.0, 400)
        values = h1_curve.curve_value(t, p)
        assert values[0] == p.x0
        assert np.all(np.diff(values) >= 0)
        assert values[-1] > values[0]
        assert np.all(values <= h1_curve.asymptote(p) * (1 + 1e-12))


def test_inflection_logistic_closed_form():
    p = CurveParams(eta=0.5, lam=0.8, mu=1.0)
    roots = h1_curve.inflection_times(p, (0.0, 50.0))
    assert len(roots) == 1
    assert roots[0] == pytest.approx(math.log(0.5) / math.log(0.8), abs=1e-8)
    assert roots[0] == pytest.approx(3.1063, abs=1e-4)


def test_inflection_single_root_changes_curvature(curve):
    roots = h1_curve.inflection_times(curve, (0.0, 50.0))
    assert len(roots) == 1
    t, h = roots[0], 1e-4

    def second_difference(s):
        return (h1_curve.curve_value(s + h, curve) - 2 * h1_curve.curve_value(s, curve)
                + h1_curve.curve_value(s - h, curve))

    assert second_difference(t - 0.05) * second_difference(t + 0.05) < 0


def test_inflection_past_plateau_is_empty(curve):
    assert h1_curve.inflection_times(curve, (40.0, 50.0)) == []


def test_inflection_window_must_follow_t0():
    p = CurveParams(eta=0.5, lam=0.8, mu=0.8, t0=2.0)
    with pytest.raises(ConfigError):
        h1_curve.inflection_times(p, (0.0, 10.0))
