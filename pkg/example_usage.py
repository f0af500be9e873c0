"""
Simple example script demonstrating how to use the H1 diffusion toolkit.
"""

import logging

import numpy as np

import h1_curve
import likelihood
from estimator import fit, fitted_mean_error, make_grid, parameter_errors
from firefly import FireflyConfig
from h1_process import H1Params, InitialLaw, mean_fn, simulate


def example_curve():
    """Evaluate the growth curve and locate its inflection."""
    print("=== Growth Curve Example ===")
    curve = h1_curve.CurveParams(eta=0.5, lam=0.8, mu=0.8, t0=0.0, x0=0.1)
    for t in (0.0, 5.0, 10.0, 50.0):
        print(f"  x({t:>4}) = {h1_curve.curve_value(t, curve):.6f}")
    print(f"  Asymptote: {h1_curve.asymptote(curve):.6f}")
    print(f"  Inflection time(s): {h1_curve.inflection_times(curve, (0.0, 50.0))}")


def example_simulation():
    """Simulate a small panel and compare its mean with the analytic mean."""
    print("\n=== Simulation Example ===")
    params = H1Params.from_values(eta=0.5, lam=0.8, mu=0.8, sigma=0.015, t0=0.0, x0=0.1)
    init = InitialLaw.degenerate(0.1)
    times = make_grid(0.0, 50.0, 0.1)

    panel = simulate(params, init, times, n_paths=30, seed=1)
    observed = panel.value_matrix().mean(axis=0)
    analytic = mean_fn(params, init, times)
    print(f"  Simulated {panel.d} paths, N={panel.n_obs}")
    print(f"  Largest relative gap to the mean function: {np.max(np.abs(observed - analytic) / analytic):.4f}")
    return params, panel


def example_fit(params: H1Params, panel):
    """Fit the process with the firefly algorithm."""
    print("\n=== Estimation Example ===")
    cfg = FireflyConfig(n=40, generations=80, alpha0=0.2, beta0=1.0, gamma=1.0, delta=0.97, seed=3)
    result = fit(panel, cfg)

    truth = likelihood.ThetaVector(lam=0.8, mu=0.8, eta=0.5, sigma_sq=params.sigma_sq)
    print(f"  f_o at the estimate: {result.fo_value:.2f}")
    print(f"  f_o at the truth:    {likelihood.objective_fo(panel, truth):.2f}")
    for name, err in parameter_errors(result.theta_hat, params).items():
        print(f"  {name:>7}: {result.estimates()[name]:.6f} (relative error {err:.4f})")
    print(f"  Fitted-mean error: {fitted_mean_error(panel, result):.5f}")
    print(f"  Took {result.duration:.1f}s")


def main():
    """Run all examples."""
    logging.basicConfig(level=logging.WARNING, format="%(asctime)s - %(levelname)s - %(message)s")
    print("H1 Flow - Examples")
    print("=" * 50)
    example_curve()
    params, panel = example_simulation()
    example_fit(params, panel)
    print("\n" + "=" * 50)
    print("Examples completed!")
    print("\nFor command-line use:")
    print("python h1flow_cli.py --help")


if __name__ == "__main__":
    main()
