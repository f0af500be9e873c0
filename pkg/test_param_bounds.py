import math

import numpy as np
import pytest

import h1_curve
import param_bounds
from estimator import make_grid
from h1_errors import ConfigError, DataError, NumericalError
from h1_process import H1Params, InitialLaw, PathPanel, SamplePath, simulate
from param_bounds import ParamBox


def test_constant_boxes():
    assert param_bounds.lambda_box() == (0.0, 1.0)
    assert param_bounds.sigma_box() == (0.0, 0.5)


def test_open_sampling_stays_inside():
    rng = np.random.default_rng(0)
    lam = param_bounds.sample_open(rng, *param_bounds.lambda_box(), size=1_000_000)
    assert lam.min() > param_bounds.OPEN_EPS * 0.999
    assert lam.max() < 1.0 - param_bounds.OPEN_EPS * 0.999
    sigma = param_bounds.sample_open(rng, *param_bounds.sigma_box(), size=10_000)
    assert np.all((sigma > 0) & (sigma < 0.5))


def test_lambda_one_rejected():
    with pytest.raises(ConfigError):
        param_bounds.check_lambda(1.0)
    with pytest.raises(ConfigError):
        param_bounds.mu_upper(1.0, 0.0)


def test_mu_upper():
    assert param_bounds.mu_upper(0.8, 0.0) == pytest.approx(1.25)
    assert param_bounds.mu_upper(0.483548, 0.0) == pytest.approx(2.068, abs=1e-3)
    assert param_bounds.mu_upper(0.483548, 0.0) > 1.6539
    assert param_bounds.mu_upper(1.0 - 1e-12, 5.0) == pytest.approx(1.0, abs=1e-9)
    assert param_bounds.mu_upper(0.8, 2.0) == pytest.approx(0.8 ** -math.sqrt(5.0))


def single_path(ratio: float) -> PathPanel:
    return PathPanel([SamplePath(np.array([0.0, 1.0, 2.0]), np.array([0.1, 0.1 * ratio, 0.1 * ratio * 0.99]))])


def test_degenerate_eta_box_is_widened(caplog):
    lo, hi = param_bounds.eta_box(single_path(3.0))
    assert lo == pytest.approx(0.45)
    assert hi == pytest.approx(0.55)
    assert "widening" in caplog.text


def test_identical_paths_give_degenerate_box():
    path = SamplePath(np.array([0.0, 1.0]), np.array([0.1, 0.3]))
    lo, hi = param_bounds.eta_box(PathPanel([path, path]), widen=0.0)
    assert lo == hi == pytest.approx(0.5)


def test_eta_box_uses_extreme_ratios():
    panel = PathPanel([
        SamplePath(np.array([0.0, 1.0]), np.array([0.1, 0.3])),
        SamplePath(np.array([0.0, 1.0]), np.array([0.1, 0.5])),
    ])
    lo, hi = param_bounds.eta_box(panel, xi_t0_hat=2.0)
    assert lo == pytest.approx(2.0 / 4.0)
    assert hi == pytest.approx(2.0 / 2.0)


def test_non_growing_path_rejected():
    panel = PathPanel([
        SamplePath(np.array([0.0, 1.0]), np.array([0.1, 0.3])),
        SamplePath(np.array([0.0, 1.0]), np.array([0.1, 0.05])),
    ])
    with pytest.raises(DataError, match="Path 1"):
        param_bounds.eta_box(panel)


def test_eta_box_for_sample_uses_xi_at_t0():
    panel = single_path(3.0)
    lo, hi = param_bounds.eta_box_for_sample(panel, 0.8, 0.9, 2.0)
    xi_t0 = h1_curve.xi(2.0, h1_curve.CurveParams(eta=1.0, lam=0.8, mu=0.9, t0=2.0))
    assert 0.5 * (lo + hi) == pytest.approx(xi_t0 / 2.0)


def test_study1_eta_box_contains_truth(study1_params, study1_init, study1_times):
    hits = 0
    for rep in range(50):
        panel = simulate(study1_params, study1_init, study1_times, n_paths=30, seed=1000 + rep)
        lo, hi = param_bounds.eta_box(panel)
        assert lo <= hi
        hits += lo < 0.5 < hi
    assert hits >= 45


def test_study1_eta_box_is_narrow_around_truth(study1_panel):
    lo, hi = param_bounds.eta_box(study1_panel)
    assert 0.25 < lo < 0.5 < hi < 0.8


def test_param_box_validation_and_scaling():
    with pytest.raises(ConfigError):
        ParamBox(lower=[0.0, 1.0], upper=[1.0, 1.0])
    with pytest.raises(ConfigError):
        ParamBox(lower=[0.0], upper=[1.0, 2.0])
    box = ParamBox(lower=[0.0, -2.0], upper=[5.0, 2.0])
    assert box.names == ("x0", "x1")
    x = np.array([1.0, 0.5])
    np.testing.assert_allclose(box.denormalize(box.normalize(x)), x)
    assert box.contains(x)
    assert not box.contains([6.0, 0.0])


def test_stagewise_population_inside_box(study1_panel):
    box, positions = param_bounds.stagewise_population(study1_panel, 40, np.random.default_rng(1))
    assert positions.shape == (40, 4)
    assert box.names == param_bounds.H1_COORDINATES
    assert np.all(positions > box.lower) and np.all(positions < box.upper)
    assert not box.eta_relative
    assert box.eta_interval == pytest.approx(param_bounds.eta_box(study1_panel))
    for x in positions:
        theta = box.to_theta(x)
        assert h1_curve.is_increasing(theta.lam, theta.mu, 0.0)
        assert theta.sigma_sq == pytest.approx(x[3] ** 2)


@pytest.fixture
def shifted_panel():
    p = H1Params.from_values(eta=0.5, lam=0.8, mu=0.8, sigma=0.015, t0=2.0, x0=0.1)
    return simulate(p, InitialLaw.degenerate(0.1), make_grid(2.0, 40.0, 0.5), n_paths=10, seed=4)


def test_stagewise_population_with_shifted_origin(shifted_panel):
    box, positions = param_bounds.stagewise_population(shifted_panel, 25, np.random.default_rng(2))
    assert box.t0 == 2.0
    assert box.eta_relative
    assert box.names == param_bounds.SHIFTED_COORDINATES
    assert box.eta_interval == pytest.approx(param_bounds.eta_box(shifted_panel))
    assert np.all(positions > box.lower) and np.all(positions < box.upper)
    for x in positions:
        theta = box.to_theta(x)
        lo, hi = param_bounds.eta_box_for_sample(shifted_panel, theta.lam, theta.mu, 2.0)
        assert lo < theta.eta < hi
        assert theta.mu < param_bounds.mu_upper(theta.lam, 2.0)


def test_shifted_eta_box_does_not_depend_on_lambda_mu(shifted_panel):
    box, _ = param_bounds.stagewise_population(shifted_panel, 40, np.random.default_rng(5))
    assert box.upper[2] / box.lower[2] < 10.0
    same, _ = param_bounds.stagewise_population(shifted_panel, 40, np.random.default_rng(6))
    np.testing.assert_array_equal(box.lower, same.lower)
    np.testing.assert_array_equal(box.upper, same.upper)


def test_shifted_eta_scales_with_xi_at_origin(shifted_panel):
    box, positions = param_bounds.stagewise_population(shifted_panel, 10, np.random.default_rng(3))
    natural = box.to_natural(positions)
    for row, x in zip(natural, positions):
        curve = h1_curve.CurveParams(eta=1.0, lam=row[0], mu=row[1], t0=2.0)
        assert row[2] == pytest.approx(x[2] * h1_curve.xi(2.0, curve), rel=1e-12)
        theta = box.to_theta(x)
        np.testing.assert_allclose(row, [theta.lam, theta.mu, theta.eta, theta.sigma], rtol=1e-12)


def test_xi_at_origin_out_of_range(shifted_panel):
    with pytest.raises(NumericalError):
        param_bounds.eta_box_for_sample(shifted_panel, 1e-300, 0.5, 5.0)
    box = ParamBox(lower=[0.0, 0.0, 0.1, 0.0], upper=[1.0, 1.0, 1.0, 0.5], t0=5.0,
                   mu_relative=True, eta_relative=True)
    with pytest.raises(ConfigError):
        box.to_theta([1e-300, 0.5, 0.5, 0.1])


def test_to_natural_agrees_with_to_theta(study1_panel):
    box, positions = param_bounds.stagewise_population(study1_panel, 10, np.random.default_rng(3))
    natural = box.to_natural(positions)
    for row, x in zip(natural, positions):
        theta = box.to_theta(x)
        np.testing.assert_allclose(row, [theta.lam, theta.mu, theta.eta, theta.sigma], rtol=1e-12)


def test_box_serializes(study1_panel):
    box, _ = param_bounds.stagewise_population(study1_panel, 5, np.random.default_rng(0))
    payload = box.to_dict()
    assert set(payload["bounds"]) == set(param_bounds.H1_COORDINATES)
    assert payload["mu_relative"] is True
    assert payload["eta_relative"] is False
