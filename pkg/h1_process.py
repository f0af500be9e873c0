"""
The H1 diffusion process dX(t) = h(t) X(t) dt + sigma X(t) dW(t).

Paths are simulated from the closed-form solution

    X(t) = X0 * (eta + xi(t0)) / (eta + xi(t)) * exp(-sigma^2/2 (t - t0) + sigma W(t))

so there is no discretization bias. Transition laws, moments and the
finite-dimensional lognormal law follow from the same solution.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

import h1_curve
from h1_curve import CurveParams, TimeLike
from h1_errors import ConfigError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class H1Params:
    """Curve parameters plus the diffusion coefficient sigma."""

    curve: CurveParams
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def from_values(cls, eta: float, lam: float, mu: float, sigma: float,
                    t0: float = 0.0, x0: float = 1.0) -> "H1Params":
        return cls(CurveParams(eta=eta, lam=lam, mu=mu, t0=t0, x0=x0), sigma)

    @property
    def sigma_sq(self) -> float:
        return self.sigma**2


@dataclass(frozen=True)
class InitialLaw:
    """
    Law of X(t0): a point mass at x0 or a lognormal with log-mean mu1 and
    log-variance sigma1_sq.
    """

    kind: str
    x0: Optional[float] = None
    mu1: Optional[float] = None
    sigma1_sq: Optional[float] = None

    def __post_init__(self):
        if self.kind == "degenerate":
            if self.x0 is None or not self.x0 > 0:
                raise ConfigError(f"Degenerate initial law needs x0 > 0, got {self.x0}")
        elif self.kind == "lognormal":
            if self.mu1 is None or self.sigma1_sq is None:
                raise ConfigError("Lognormal initial law needs mu1 and sigma1_sq")
            if not self.sigma1_sq >= 0:
                raise ConfigError(f"sigma1_sq must be nonnegative, got {self.sigma1_sq}")
        else:
            raise ConfigError(f"Unknown initial law kind '{self.kind}'")

    @classmethod
    def degenerate(cls, x0: float) -> "InitialLaw":
        return cls(kind="degenerate", x0=x0)

    @classmethod
    def lognormal(cls, mu1: float, sigma1_sq: float) -> "InitialLaw":
        return cls(kind="lognormal", mu1=mu1, sigma1_sq=sigma1_sq)

    def log_params(self) -> Tuple[float, float]:
        """(mu0, sigma0^2) of ln X(t0); a point mass has zero variance."""
        if self.kind == "degenerate":
            return math.log(self.x0), 0.0
        return self.mu1, self.sigma1_sq

    def raw_moment(self, n: int) -> float:
        """E[X(t0)^n]."""
        if self.kind == "degenerate":
            return self.x0**n
        return math.exp(n * self.mu1 + 0.5 * n * n * self.sigma1_sq)

    def mean(self) -> float:
        return self.raw_moment(1)


@dataclass
class SamplePath:
    times: np.ndarray
    values: np.ndarray


@dataclass
class PathPanel:
    """
    d discretely observed sample paths sharing their first observation time.

    Raises:
        DataError: On empty panels, paths shorter than two points, non-increasing
            times, non-positive values or differing first times
    """

    paths: List[SamplePath]

    def __post_init__(self):
        if len(self.paths) < 1:
            raise DataError("A panel needs at least one path")
        checked = []
        for i, path in enumerate(self.paths):
            times = np.asarray(path.times, dtype=float)
            values = np.asarray(path.values, dtype=float)
            if times.ndim != 1 or times.shape != values.shape:
                raise DataError(f"Path {i}: times and values must be 1-D arrays of equal length")
            if times.size < 2:
                raise DataError(f"Path {i}: at least two observations are required, got {times.size}")
            if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
                raise DataError(f"Path {i}: nonfinite entries")
            if np.any(np.diff(times) <= 0):
                k = int(np.argmax(np.diff(times) <= 0)) + 1
                raise DataError(f"Path {i}: times must be strictly increasing (observation {k})")
            if np.any(values <= 0):
                k = int(np.argmax(values <= 0))
                raise DataError(f"Path {i}: values must be positive (observation {k} is {values[k]})")
            checked.append(SamplePath(times=times, values=values))
        t1 = checked[0].times[0]
        for i, path in enumerate(checked):
            if path.times[0] != t1:
                raise DataError(f"Path {i} starts at {path.times[0]}, expected the shared t1={t1}")
        self.paths = checked

    @property
    def d(self) -> int:
        return len(self.paths)

    @property
    def n_obs(self) -> int:
        """N, total number of observations."""
        return sum(path.times.size for path in self.paths)

    @property
    def t1(self) -> float:
        return float(self.paths[0].times[0])

    def initial_values(self) -> np.ndarray:
        return np.array([path.values[0] for path in self.paths])

    def shared_grid(self) -> Optional[np.ndarray]:
        """The common time grid, or None when paths are observed at different times."""
        grid = self.paths[0].times
        for path in self.paths[1:]:
            if path.times.shape != grid.shape or not np.array_equal(path.times, grid):
                return None
        return grid

    def value_matrix(self) -> np.ndarray:
        """Values as a (d, n) array; requires a shared grid."""
        if self.shared_grid() is None:
            raise DataError("Paths do not share a time grid")
        return np.vstack([path.values for path in self.paths])


def _check_grid(times: Sequence[float]) -> np.ndarray:
    grid = np.asarray(times, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ConfigError("A time grid needs at least two points")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("Time grid must be strictly increasing")
    return grid


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Independent generator for one path, derived from (seed, path index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(path_index,)))


def _simulate_path(p: H1Params, init: InitialLaw, grid: np.ndarray, log_ratio: np.ndarray,
                   seed: int, index: int) -> SamplePath:
    rng = path_rng(seed, index)
    if init.kind == "degenerate":
        log_x0 = math.log(init.x0)
    else:
        log_x0 = rng.normal(init.mu1, math.sqrt(init.sigma1_sq))
    increments = rng.standard_normal(grid.size - 1) * np.sqrt(np.diff(grid))
    w = np.concatenate(([0.0], np.cumsum(increments)))
    log_x = log_x0 + log_ratio - 0.5 * p.sigma_sq * (grid - grid[0]) + p.sigma * w
    return SamplePath(times=grid.copy(), values=np.exp(log_x))


def simulate(p: H1Params,
             init: InitialLaw,
             times: Sequence[float],
             n_paths: int,
             seed: int,
             n_workers: int = 1) -> PathPanel:
    """
    Simulate sample paths from the exact solution of the SDE.

    Args:
        p: Process parameters; times[0] must equal p.curve.t0
        init: Law of X(t0)
        times: Strictly increasing observation grid
        n_paths: Number of paths
        seed: Root seed; path i uses the stream derived from (seed, i)
        n_workers: Threads used to generate paths

    Returns:
        PathPanel: The simulated panel, identical for identical seeds
    """
    grid = _check_grid(times)
    t0 = p.curve.t0
    if abs(grid[0] - t0) > 1e-12 * max(1.0, abs(t0)):
        raise ConfigError(f"Simulation grid must start at t0={t0}, got {grid[0]}")
    if n_paths < 1:
        raise ConfigError(f"n_paths must be at least 1, got {n_paths}")

    xi_t0 = h1_curve.xi(t0, p.curve)
    log_ratio = np.log((p.curve.eta + xi_t0) / (p.curve.eta + np.asarray(h1_curve.xi(grid, p.curve))))

    def build(i: int) -> SamplePath:
        return _simulate_path(p, init, grid, log_ratio, seed, i)

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            paths = list(pool.map(build, range(n_paths)))
    else:
        paths = [build(i) for i in range(n_paths)]

    logger.info(f"Simulated {n_paths} paths on {grid.size} grid points (seed={seed})")
    return PathPanel(paths)


def drift(x: float, t: TimeLike, p: H1Params):
    """First infinitesimal moment A1(x, t) = h(t) x."""
    return h1_curve.growth_rate(t, p.curve) * x


def diffusion(x: float, p: H1Params):
    """Second infinitesimal moment A2(x) = sigma^2 x^2."""
    return p.sigma_sq * np.asarray(x) ** 2


def _log_ratio(p: H1Params, s: TimeLike, t: TimeLike):
    eta = p.curve.eta
    return np.log((eta + np.asarray(h1_curve.xi(s, p.curve))) / (eta + np.asarray(h1_curve.xi(t, p.curve))))


def transition_law(p: H1Params, y: float, s: float, t: float) -> Tuple[float, float]:
    """
    Lognormal parameters of X(t) given X(s) = y.

    Returns:
        (log_mean, log_var) = (ln y + ln((eta+xi(s))/(eta+xi(t))) - sigma^2/2 (t-s), sigma^2 (t-s))
    """
    if not t > s:
        raise ConfigError(f"Transition needs t > s, got s={s}, t={t}")
    if s < p.curve.t0:
        raise ConfigError(f"Transition start s={s} precedes t0={p.curve.t0}")
    if not y > 0:
        raise ConfigError(f"Conditioning value must be positive, got {y}")
    dt = t - s
    log_mean = math.log(y) + float(_log_ratio(p, s, t)) - 0.5 * p.sigma_sq * dt
    return log_mean, p.sigma_sq * dt


def transition_density(p: H1Params, x, t: float, y: float, s: float):
    """Density f(x, t | y, s) of the transition; zero for x <= 0."""
    log_mean, log_var = transition_law(p, y, s, t)
    x_arr = np.asarray(x, dtype=float)
    density = stats.lognorm.pdf(x_arr, s=math.sqrt(log_var), scale=math.exp(log_mean))
    if np.ndim(x) == 0:
        return float(density)
    return density


def moment(p: H1Params, n: int, z: float, tau: float, t: float) -> float:
    """
    G_n(t | z, tau) = z^n ((eta+xi(tau))/(eta+xi(t)))^n exp(n(n-1) sigma^2/2 (t - tau)),
    the n-th conditional moment E[X(t)^n | X(tau) = z].
    """
    if n < 0:
        raise ConfigError(f"Moment order must be nonnegative, got {n}")
    if t < tau:
        raise ConfigError(f"Moment needs t >= tau, got tau={tau}, t={t}")
    log_g = n * (math.log(z) + float(_log_ratio(p, tau, t))) + 0.5 * n * (n - 1) * p.sigma_sq * (t - tau)
    return math.exp(log_g)


def _check_after_t0(p: H1Params, t: TimeLike) -> np.ndarray:
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < p.curve.t0):
        raise ConfigError(f"Mean functions are defined for t >= t0={p.curve.t0}")
    return t_arr


def mean_fn(p: H1Params, init: InitialLaw, t: TimeLike):
    """E[X(t)] = E[X(t0)] (eta + xi(t0)) / (eta + xi(t))."""
    t_arr = _check_after_t0(p, t)
    values = init.mean() * np.exp(_log_ratio(p, p.curve.t0, t_arr))
    return float(values) if np.ndim(t) == 0 else values


def cond_mean_fn(p: H1Params, x0: float, t: TimeLike):
    """E[X(t) | X(t0) = x0]."""
    return mean_fn(p, InitialLaw.degenerate(x0), t)


def variance_fn(p: H1Params, init: InitialLaw, t: TimeLike):
    """Var[X(t)] from the first two raw moments of the process."""
    t_arr = _check_after_t0(p, t)
    ratio = np.exp(_log_ratio(p, p.curve.t0, t_arr))
    second = init.raw_moment(2) * ratio**2 * np.exp(p.sigma_sq * (t_arr - p.curve.t0))
    first = init.mean() * ratio
    values = second - first**2
    return float(values) if np.ndim(t) == 0 else values


def finite_dim_law(p: H1Params, init: InitialLaw, times: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Parameters of the n-dimensional lognormal law of (X(t_1), ..., X(t_n)).

    Returns:
        (delta, Sigma) with delta_i = mu0 + ln((eta+xi(t0))/(eta+xi(t_i))) - sigma^2/2 (t_i - t0)
        and Sigma_ij = sigma0^2 + sigma^2 (min(t_i, t_j) - t0)
    """
    grid = np.atleast_1d(np.asarray(times, dtype=float))
    if grid.ndim != 1 or grid.size < 1:
        raise ConfigError("finite_dim_law needs at least one time")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("finite_dim_law needs strictly increasing times")
    t0 = p.curve.t0
    if grid[0] < t0:
        raise ConfigError(f"Times must not precede t0={t0}")
    mu0, sigma0_sq = init.log_params()
    delta = mu0 + _log_ratio(p, t0, grid) - 0.5 * p.sigma_sq * (grid - t0)
    sigma = sigma0_sq + p.sigma_sq * (np.minimum.outer(grid, grid) - t0)
    return np.atleast_1d(delta), sigma


def panel_mean(panel: PathPanel) -> Tuple[np.ndarray, np.ndarray]:
    """Cross-path sample mean on the panel's shared grid."""
    grid = panel.shared_grid()
    if grid is None:
        raise DataError("Cross-path mean needs paths observed on a shared grid")
    return grid, panel.value_matrix().mean(axis=0)
