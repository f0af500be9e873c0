"""
Stagewise bounding of the H1 parametric space and seeding of the initial swarm.

Search coordinates of the estimator are (lambda, mu_fraction, eta, sigma), where
mu = mu_fraction * mu_upper(lambda, t0). The fraction keeps every candidate in
the increasing-curve region while the search box stays fixed.

When the panel starts at t0 != 0 the third coordinate is eta_scaled =
eta / xi(t0), with xi(t0) = lambda**t0 * mu**asinh(t0) taken from the same
point. Its bounds come from the growth ratios alone, so the box does not move
with the sampled (lambda, mu).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

import h1_curve
from h1_errors import ConfigError, DataError, NumericalError
from h1_process import PathPanel
from likelihood import ThetaVector

logger = logging.getLogger(__name__)

OPEN_EPS = 1e-9
ETA_WIDEN = 0.10
SIGMA_MAX = 0.5
LOG_XI_MIN = math.log(np.finfo(float).tiny)
LOG_XI_MAX = math.log(np.finfo(float).max)

H1_COORDINATES = ("lambda", "mu_fraction", "eta", "sigma")
SHIFTED_COORDINATES = ("lambda", "mu_fraction", "eta_scaled", "sigma")
NATURAL_NAMES = ("lambda", "mu", "eta", "sigma")


@dataclass
class ParamBox:
    """
    Per-coordinate search bounds.

    Attributes:
        lower: Lower bounds
        upper: Upper bounds
        names: Coordinate names
        t0: Time origin of the panel (H1 boxes only)
        mu_relative: Second coordinate is a fraction of mu_upper(lambda, t0)
        eta_relative: Third coordinate is eta / xi(t0) of the point's own (lambda, mu)
        eta_interval: Bounds of the third coordinate as built from the data
    """

    lower: np.ndarray
    upper: np.ndarray
    names: Tuple[str, ...] = ()
    t0: float = 0.0
    mu_relative: bool = False
    eta_relative: bool = False
    eta_interval: Optional[Tuple[float, float]] = field(default=None)

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ConfigError("Box bounds must be 1-D arrays of equal length")
        if not np.all(self.lower < self.upper):
            raise ConfigError(f"Every coordinate needs lo < hi, got {self.lower} / {self.upper}")
        if not self.names:
            self.names = tuple(f"x{k}" for k in range(self.dim))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.width

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def to_theta(self, x: Sequence[float]) -> ThetaVector:
        """Map an H1 search point to (lambda, mu, eta, sigma^2)."""
        lam, mu, eta, sigma = (float(v) for v in self.to_natural(x)[0])
        return ThetaVector(lam=lam, mu=mu, eta=eta, sigma_sq=sigma * sigma)

    def to_natural(self, points: np.ndarray) -> np.ndarray:
        """Rows of search points as (lambda, mu, eta, sigma), computed in log space."""
        points = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        if not (self.mu_relative or self.eta_relative):
            return points
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            log_lam = np.log(points[:, 0])
            log_mu = np.log(points[:, 1])
            if self.mu_relative:
                log_mu = log_mu - math.sqrt(1.0 + self.t0**2) * log_lam
                points[:, 1] = np.exp(log_mu)
            if self.eta_relative:
                points[:, 2] = np.exp(np.log(points[:, 2]) + log_xi_at(log_lam, log_mu, self.t0))
        return points

    def to_dict(self) -> dict:
        bounds = {name: [float(lo), float(hi)] for name, lo, hi in zip(self.names, self.lower, self.upper)}
        return {
            "bounds": bounds,
            "t0": self.t0,
            "mu_relative": self.mu_relative,
            "eta_relative": self.eta_relative,
            "eta_interval": list(self.eta_interval) if self.eta_interval else None,
        }


def sample_open(rng: np.random.Generator, lo: float, hi: float, size=None):
    """Uniform draws strictly inside (lo, hi), endpoints kept OPEN_EPS away."""
    margin = OPEN_EPS * (hi - lo)
    return rng.uniform(lo + margin, hi - margin, size=size)


def lambda_box() -> Tuple[float, float]:
    """lambda lies in (0, 1) so the curve strictly increases."""
    return 0.0, 1.0


def check_lambda(lam: float) -> float:
    lo, hi = lambda_box()
    if not lo < lam < hi:
        raise ConfigError(f"lambda={lam} is outside the open interval ({lo}, {hi})")
    return lam


def mu_upper(lam: float, t0: float) -> float:
    """Upper bound lambda^(-sqrt(1 + t0^2)) for mu at a given lambda."""
    check_lambda(lam)
    return float(h1_curve.c_lambda(lam, t0))


def sigma_box() -> Tuple[float, float]:
    return 0.0, SIGMA_MAX


def log_xi_at(log_lam, log_mu, t0: float):
    """log xi(t0) = t0 * log(lambda) + asinh(t0) * log(mu); scalars or arrays."""
    return t0 * log_lam + math.asinh(t0) * log_mu


def growth_ratios(panel: PathPanel) -> np.ndarray:
    """
    k_i / x_i1 - 1 per path, with k_i the path maximum.

    Raises:
        DataError: If some path never exceeds its first value
    """
    ratios = []
    for i, path in enumerate(panel.paths):
        k_i, x_i = float(path.values.max()), float(path.values[0])
        if k_i <= x_i:
            raise DataError(
                f"Path {i} never grows above its initial value {x_i}; H1 modeling is inadvisable"
            )
        ratios.append(k_i / x_i - 1.0)
    return np.array(ratios)


def eta_box(panel: PathPanel, xi_t0_hat: float = 1.0, widen: float = ETA_WIDEN) -> Tuple[float, float]:
    """
    Interval for eta from the path maxima.

    lo = xi(t0) / max_i(k_i/x_i1 - 1), hi = xi(t0) / min_i(k_i/x_i1 - 1).
    A degenerate interval is widened symmetrically by `widen` times its center.

    Args:
        panel: Observed paths
        xi_t0_hat: xi(t0) for the sampled (lambda, mu); 1 when t0 == 0
        widen: Relative half-width used for degenerate intervals

    Returns:
        (lo, hi)
    """
    if not xi_t0_hat > 0:
        raise ConfigError(f"xi(t0) must be positive, got {xi_t0_hat}")
    ratios = growth_ratios(panel)
    lo = xi_t0_hat / ratios.max()
    hi = xi_t0_hat / ratios.min()
    if hi - lo <= 1e-12 * hi:
        center = 0.5 * (lo + hi)
        logger.warning(f"Degenerate eta interval at {center:.6g}; widening by {widen:.0%}")
        lo, hi = center * (1.0 - widen), center * (1.0 + widen)
    return lo, hi


def eta_box_for_sample(panel: PathPanel, lam: float, mu: float, t0: float) -> Tuple[float, float]:
    """
    eta interval once (lambda, mu) have been chosen.

    Raises:
        NumericalError: If xi(t0) is not representable for this (lambda, mu)
    """
    log_xi = log_xi_at(math.log(lam), math.log(mu), t0)
    if not LOG_XI_MIN < log_xi < LOG_XI_MAX:
        raise NumericalError(f"xi({t0}) = exp({log_xi:.6g}) is out of floating-point range")
    return eta_box(panel, math.exp(log_xi))


def stagewise_population(panel: PathPanel, n: int, rng: np.random.Generator) -> Tuple[ParamBox, np.ndarray]:
    """
    Bound the parametric space and draw the initial swarm in the stagewise order
    lambda, mu, eta, sigma.

    With t0 != 0 the eta coordinate is drawn as eta / xi(t0), which lands every
    firefly inside eta_box_for_sample of its own (lambda, mu).

    Args:
        panel: Observed paths; t0 is taken as the shared first time t1
        n: Number of fireflies
        rng: Random generator

    Returns:
        (box, positions): search box and an (n, 4) array of initial points
    """
    if n < 1:
        raise ConfigError(f"Population size must be positive, got {n}")
    t0 = panel.t1
    shifted = t0 != 0.0
    lam = sample_open(rng, *lambda_box(), size=n)
    mu_fraction = sample_open(rng, 0.0, 1.0, size=n)
    eta_lo, eta_hi = eta_box(panel)
    eta = sample_open(rng, eta_lo, eta_hi, size=n)
    sigma = sample_open(rng, *sigma_box(), size=n)

    box = ParamBox(
        lower=[0.0, 0.0, eta_lo, 0.0],
        upper=[1.0, 1.0, eta_hi, SIGMA_MAX],
        names=SHIFTED_COORDINATES if shifted else H1_COORDINATES,
        t0=t0,
        mu_relative=True,
        eta_relative=shifted,
        eta_interval=(eta_lo, eta_hi),
    )
    label = "eta / xi(t0)" if shifted else "eta"
    logger.info(f"{label} search interval ({eta_lo:.7g}, {eta_hi:.7g}), t0={t0}")
    return box, np.column_stack([lam, mu_fraction, eta, sigma])
