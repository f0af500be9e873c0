"""Shared pytest fixtures: the first simulation study and small panels built from it."""

import numpy as np
import pytest

from estimator import make_grid
from h1_process import H1Params, InitialLaw, PathPanel, SamplePath, simulate

STUDY1 = {"eta": 0.5, "lam": 0.8, "mu": 0.8, "sigma": 0.015, "t0": 0.0, "x0": 0.1}


@pytest.fixture
def study1_params() -> H1Params:
    return H1Params.from_values(**STUDY1)


@pytest.fixture
def study1_init() -> InitialLaw:
    return InitialLaw.degenerate(STUDY1["x0"])


@pytest.fixture
def study1_times() -> np.ndarray:
    return make_grid(0.0, 50.0, 0.1)


@pytest.fixture
def small_panel(study1_params, study1_init) -> PathPanel:
    """Five study-1 paths on a coarse grid, cheap enough for optimizer tests."""
    return simulate(study1_params, study1_init, make_grid(0.0, 20.0, 0.5), n_paths=5, seed=11)


@pytest.fixture
def study1_panel(study1_params, study1_init, study1_times) -> PathPanel:
    return simulate(study1_params, study1_init, study1_times, n_paths=30, seed=5)


@pytest.fixture
def tiny_panel() -> PathPanel:
    """One path, two points."""
    return PathPanel([SamplePath(times=np.array([0.0, 1.0]), values=np.array([0.1, 0.2]))])
