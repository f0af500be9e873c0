"""
Hyperbolastic type-I (H1) growth curve in its reparametrized form.

    x(t) = x0 * (eta + xi(t0)) / (eta + xi(t)),   xi(t) = lambda**t * mu**asinh(t)

Only the increasing regime (0 < lambda < 1, mu < lambda**-sqrt(1 + t0**2)) is
supported. Every function accepts scalars or numpy arrays for the time argument.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import bisect

from h1_errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

TimeLike = Union[float, Sequence[float], np.ndarray]

DEFAULT_SCAN_POINTS = 2000
INFLECTION_XTOL = 1e-10


def _scalar_or_array(values: np.ndarray, like: TimeLike):
    """Return a float when the caller passed a scalar time."""
    if np.ndim(like) == 0:
        return float(values)
    return values


def c_lambda(lam: float, t: TimeLike):
    """Upper bound for mu keeping the curve increasing at time t."""
    t_arr = np.asarray(t, dtype=float)
    return _scalar_or_array(np.exp(-np.sqrt(1.0 + t_arr**2) * math.log(lam)), t)


@dataclass(frozen=True)
class CurveParams:
    """
    Parameters of the reparametrized H1 curve.

    Attributes:
        eta: Positive shape parameter (1/a in the classical form)
        lam: Growth parameter in (0, 1) (exp(-rho))
        mu: Positive parameter (exp(-theta)), below c_lambda(t0)
        t0: Time origin
        x0: Value of the curve at t0
    """

    eta: float
    lam: float
    mu: float
    t0: float = 0.0
    x0: float = 1.0
    log_lam: float = field(init=False, repr=False)
    log_mu: float = field(init=False, repr=False)

    def __post_init__(self):
        values = (self.eta, self.lam, self.mu, self.t0, self.x0)
        if not all(math.isfinite(v) for v in values):
            raise ConfigError(f"Curve parameters must be finite: {values}")
        if self.eta <= 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.x0 <= 0:
            raise ConfigError(f"x0 must be positive, got {self.x0}")
        if not 0 < self.lam < 1:
            raise ConfigError(f"lambda must lie in (0, 1) for increasing curves, got {self.lam}")
        if self.mu <= 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        bound = c_lambda(self.lam, self.t0)
        if self.mu >= bound:
            raise ConfigError(
                f"mu={self.mu} violates the increasing-curve condition mu < {bound:.6g} at t0={self.t0}"
            )
        object.__setattr__(self, "log_lam", math.log(self.lam))
        object.__setattr__(self, "log_mu", math.log(self.mu))


@dataclass(frozen=True)
class ClassicalParams:
    """
    Classical H1 parametrization x(t) = M / (1 + a*exp(-rho*t - theta*asinh(t))).

    Attributes:
        M: Carrying capacity
        rho: Growth parameter (positive for increasing curves)
        theta: Hyperbolic growth parameter
        t0: Time origin
        x0: Initial value, 0 < x0 < M
    """

    M: float
    rho: float
    theta: float
    t0: float = 0.0
    x0: float = 1.0

    def __post_init__(self):
        if not 0 < self.x0 < self.M:
            raise ConfigError(f"Classical parameters need 0 < x0 < M, got x0={self.x0}, M={self.M}")

    @property
    def a(self) -> float:
        return (self.M - self.x0) / self.x0 * math.exp(self.rho * self.t0 + self.theta * math.asinh(self.t0))


def xi(t: TimeLike, p: CurveParams):
    """
    Evaluate xi(t) = lambda**t * mu**asinh(t) in log space.

    Args:
        t: Time or array of times
        p: Curve parameters

    Returns:
        Positive value(s) of xi
    """
    t_arr = np.asarray(t, dtype=float)
    return _scalar_or_array(np.exp(t_arr * p.log_lam + np.arcsinh(t_arr) * p.log_mu), t)


def xi_derivative(t: TimeLike, p: CurveParams):
    """xi'(t) = xi(t) * (ln lambda + ln mu / sqrt(1 + t^2))."""
    t_arr = np.asarray(t, dtype=float)
    slope = p.log_lam + p.log_mu / np.sqrt(1.0 + t_arr**2)
    return _scalar_or_array(np.asarray(xi(t_arr, p)) * slope, t)


def growth_rate(t: TimeLike, p: CurveParams):
    """
    Time-dependent fertility rate h(t) = -xi'(t) / (eta + xi(t)).

    The curve solves x'(t) = h(t) x(t); h is also the drift coefficient of the
    diffusion process.
    """
    t_arr = np.asarray(t, dtype=float)
    rate = -np.asarray(xi_derivative(t_arr, p)) / (p.eta + np.asarray(xi(t_arr, p)))
    return _scalar_or_array(rate, t)


def curve_value(t: TimeLike, p: CurveParams):
    """
    Evaluate the H1 curve at time(s) t >= t0.

    Args:
        t: Time or array of times, none earlier than p.t0
        p: Curve parameters

    Returns:
        Curve value(s), strictly increasing in t
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < p.t0):
        raise ConfigError(f"Curve is defined for t >= t0={p.t0}, got min t={t_arr.min()}")
    ratio = (p.eta + xi(p.t0, p)) / (p.eta + np.asarray(xi(t_arr, p)))
    return _scalar_or_array(p.x0 * ratio, t)


def asymptote(p: CurveParams) -> float:
    """Limit of the curve, k = x0 * (1 + xi(t0) / eta)."""
    return p.x0 * (1.0 + xi(p.t0, p) / p.eta)


def is_increasing(lam: float, mu: float, t0: float = 0.0) -> bool:
    """Check the increasing-curve conditions without building a CurveParams."""
    if not 0 < lam < 1 or mu <= 0:
        return False
    return mu < c_lambda(lam, t0)


def to_classical(p: CurveParams) -> ClassicalParams:
    """Convert to the classical (M, rho, theta) form; M equals the asymptote."""
    return ClassicalParams(
        M=asymptote(p),
        rho=-p.log_lam,
        theta=-p.log_mu,
        t0=p.t0,
        x0=p.x0,
    )


def from_classical(c: ClassicalParams) -> CurveParams:
    """
    Convert classical parameters back to (eta, lambda, mu).

    Raises:
        ConfigError: If rho <= 0 (lambda >= 1, decay profile) or the
            resulting curve is not increasing
    """
    if c.rho <= 0:
        raise ConfigError(f"rho={c.rho} gives lambda >= 1; only increasing curves are supported")
    return CurveParams(
        eta=1.0 / c.a,
        lam=math.exp(-c.rho),
        mu=math.exp(-c.theta),
        t0=c.t0,
        x0=c.x0,
    )


def classical_value(t: TimeLike, c: ClassicalParams):
    """Evaluate the classical form M / (1 + a*exp(-rho*t - theta*asinh(t)))."""
    t_arr = np.asarray(t, dtype=float)
    values = c.M / (1.0 + c.a * np.exp(-c.rho * t_arr - c.theta * np.arcsinh(t_arr)))
    return _scalar_or_array(values, t)


def _slope_factor(t: np.ndarray, p: CurveParams) -> np.ndarray:
    return p.log_lam + p.log_mu / np.sqrt(1.0 + t**2)


def inflection_residual(t: TimeLike, p: CurveParams):
    """
    Left minus right side of the inflection equation

        2*eta/(eta + xi(t)) - 1 = t*ln(mu)*(1+t^2)^(-3/2) * (ln(lambda) + ln(mu)/sqrt(1+t^2))^(-2)
    """
    t_arr = np.asarray(t, dtype=float)
    lhs = 2.0 * p.eta / (p.eta + np.asarray(xi(t_arr, p))) - 1.0
    rhs = t_arr * p.log_mu * (1.0 + t_arr**2) ** -1.5 / _slope_factor(t_arr, p) ** 2
    return _scalar_or_array(lhs - rhs, t)


def inflection_times(p: CurveParams,
                     search_window: Tuple[float, float],
                     scan_points: int = DEFAULT_SCAN_POINTS) -> List[float]:
    """
    Locate every inflection of the curve inside a time window.

    The residual of the inflection equation is scanned on a uniform grid and
    each sign change is refined by bisection to INFLECTION_XTOL.

    Args:
        p: Curve parameters
        search_window: (t_lo, t_hi) with t0 <= t_lo < t_hi
        scan_points: Number of grid points of the scan

    Returns:
        List[float]: Sorted inflection times, empty when none is found

    Raises:
        NumericalError: If the slope factor of xi vanishes inside a bracket
    """
    t_lo, t_hi = search_window
    if t_lo < p.t0:
        raise ConfigError(f"Search window must start at or after t0={p.t0}, got {t_lo}")
    if not t_hi > t_lo:
        raise ConfigError(f"Empty search window ({t_lo}, {t_hi})")
    if scan_points < 2:
        raise ConfigError("scan_points must be at least 2")

    grid = np.linspace(t_lo, t_hi, scan_points)
    slope = _slope_factor(grid, p)
    values = np.asarray(inflection_residual(grid, p))

    roots = []
    for k in range(scan_points - 1):
        a, b = grid[k], grid[k + 1]
        ga, gb = values[k], values[k + 1]
        if ga == 0.0:
            roots.append(float(a))
            continue
        if ga * gb >= 0:
            continue
        if slope[k] * slope[k + 1] <= 0:
            raise NumericalError(
                f"Inflection equation is singular inside [{a:.6g}, {b:.6g}]: "
                f"ln(lambda) + ln(mu)/sqrt(1+t^2) changes sign"
            )
        roots.append(float(bisect(lambda s: float(inflection_residual(s, p)), a, b, xtol=INFLECTION_XTOL)))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))

    logger.debug(f"Found {len(roots)} inflection(s) in [{t_lo}, {t_hi}]")
    return roots
