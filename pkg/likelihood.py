"""
Log-likelihood of a discretely sampled H1 panel and the reduced objective f_o.

Transitions are indexed by (path i, step j) with j >= 2; per transition
    l_ij  = ln(x_ij / x_i,j-1)
    dt_ij = t_ij - t_i,j-1
    T_ij  = ln((eta + xi(t_i,j-1)) / (eta + xi(t_ij)))

The reduced objective maximized by the firefly swarm is

    f_o = -(N-d)/2 ln s - 1/(2s) sum (l_ij - T_ij + s dt_ij / 2)^2 / dt_ij,   s = sigma^2

using the (N-d)/2 coefficient of the full log-likelihood.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from h1_errors import ConfigError, NumericalError
from h1_process import PathPanel

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ThetaVector:
    """Free parameters of f_o, always ordered (lambda, mu, eta, sigma^2)."""

    lam: float
    mu: float
    eta: float
    sigma_sq: float

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ConfigError(f"Nonfinite parameter vector {tuple(values)}")
        if not 0 < self.lam < 1:
            raise ConfigError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.mu <= 0 or self.eta <= 0:
            raise ConfigError(f"mu and eta must be positive, got mu={self.mu}, eta={self.eta}")
        if self.sigma_sq <= 0:
            raise ConfigError(f"sigma^2 must be positive, got {self.sigma_sq}")

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ThetaVector":
        lam, mu, eta, sigma_sq = (float(v) for v in values)
        return cls(lam=lam, mu=mu, eta=eta, sigma_sq=sigma_sq)

    def as_array(self) -> np.ndarray:
        return np.array([self.lam, self.mu, self.eta, self.sigma_sq], dtype=float)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)


@dataclass(frozen=True)
class SufficientStats:
    """
    Per-transition caches of a panel, built once and shared read-only by every
    objective evaluation.
    """

    log_increments: np.ndarray
    dt: np.ndarray
    unique_times: np.ndarray
    asinh_times: np.ndarray
    prev_index: np.ndarray
    cur_index: np.ndarray
    path_of: np.ndarray
    step_of: np.ndarray
    log_x: np.ndarray
    log_initial: np.ndarray
    spans: np.ndarray
    n_obs: int
    d: int

    @property
    def n_transitions(self) -> int:
        return self.n_obs - self.d

    @property
    def total_span(self) -> float:
        return float(self.spans.sum())


Data = Union[PathPanel, SufficientStats]


def build_stats(panel: PathPanel) -> SufficientStats:
    """Precompute increments, time steps and the unique-time index of a panel."""
    all_times = np.concatenate([path.times for path in panel.paths])
    unique_times, inverse = np.unique(all_times, return_inverse=True)

    l_parts, dt_parts, prev_parts, cur_parts = [], [], [], []
    path_parts, step_parts, logx_parts = [], [], []
    offset = 0
    for i, path in enumerate(panel.paths):
        n = path.times.size
        idx = inverse[offset:offset + n]
        offset += n
        log_values = np.log(path.values)
        l_parts.append(np.diff(log_values))
        dt_parts.append(np.diff(path.times))
        prev_parts.append(idx[:-1])
        cur_parts.append(idx[1:])
        path_parts.append(np.full(n - 1, i))
        step_parts.append(np.arange(2, n + 1))
        logx_parts.append(log_values[1:])

    return SufficientStats(
        log_increments=np.concatenate(l_parts),
        dt=np.concatenate(dt_parts),
        unique_times=unique_times,
        asinh_times=np.arcsinh(unique_times),
        prev_index=np.concatenate(prev_parts),
        cur_index=np.concatenate(cur_parts),
        path_of=np.concatenate(path_parts),
        step_of=np.concatenate(step_parts),
        log_x=np.concatenate(logx_parts),
        log_initial=np.log(panel.initial_values()),
        spans=np.array([path.times[-1] - path.times[0] for path in panel.paths]),
        n_obs=panel.n_obs,
        d=panel.d,
    )


def _stats(data: Data) -> SufficientStats:
    if isinstance(data, SufficientStats):
        return data
    return build_stats(data)


def _theta(theta) -> ThetaVector:
    if isinstance(theta, ThetaVector):
        return theta
    return ThetaVector.from_array(theta)


def _accurate_sum(terms: np.ndarray) -> float:
    """Pairwise summation in extended precision."""
    return float(np.sum(np.asarray(terms, dtype=np.longdouble)))


def _xi_unique(stats: SufficientStats, lam: float, mu: float) -> np.ndarray:
    return np.exp(stats.unique_times * math.log(lam) + stats.asinh_times * math.log(mu))


def _t_terms(stats: SufficientStats, lam: float, mu: float, eta: float) -> np.ndarray:
    log_e = np.log(eta + _xi_unique(stats, lam, mu))
    return log_e[stats.prev_index] - log_e[stats.cur_index]


def _check_finite(stats: SufficientStats, terms: np.ndarray, what: str):
    bad = ~np.isfinite(terms)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NumericalError(
            f"Nonfinite {what} at path {int(stats.path_of[k])}, transition {int(stats.step_of[k])}"
        )


def initial_mle(panel: PathPanel) -> Tuple[float, float]:
    """
    Closed-form ML estimates of the initial lognormal law.

    Returns:
        (mu1_hat, sigma1_sq_hat): mean and (biased) variance of ln x_i1
    """
    logs = np.log(panel.initial_values())
    mu1 = float(np.mean(logs))
    sigma1_sq = float(np.mean((logs - mu1) ** 2))
    return mu1, sigma1_sq


def transition_terms(data: Data, theta) -> np.ndarray:
    """Per-transition values of (l - T + s dt / 2)^2 / dt."""
    stats = _stats(data)
    th = _theta(theta)
    resid = stats.log_increments - _t_terms(stats, th.lam, th.mu, th.eta) + 0.5 * th.sigma_sq * stats.dt
    return resid**2 / stats.dt


def log_likelihood(data: Data, theta, init: Tuple[float, float]) -> float:
    """
    Full log-likelihood of the panel.

    Args:
        data: Panel or its sufficient statistics
        theta: (lambda, mu, eta, sigma^2)
        init: (mu1, sigma1_sq) of the initial lognormal law; with
            sigma1_sq == 0 the initial term is dropped and the result is the
            likelihood conditional on the first observations

    Returns:
        float: log L

    Raises:
        NumericalError: If any transition contributes a nonfinite term
    """
    stats = _stats(data)
    th = _theta(theta)
    mu1, sigma1_sq = init
    if sigma1_sq < 0:
        raise ConfigError(f"sigma1_sq must be nonnegative, got {sigma1_sq}")

    s = th.sigma_sq
    quad = transition_terms(stats, th)
    per_transition = (
        -0.5 * LOG_2PI
        - stats.log_x
        - 0.5 * np.log(s * stats.dt)
        - quad / (2.0 * s)
    )
    _check_finite(stats, per_transition, "log-likelihood term")
    total = _accurate_sum(per_transition)

    if sigma1_sq > 0:
        initial = (
            -0.5 * LOG_2PI
            - 0.5 * math.log(sigma1_sq)
            - stats.log_initial
            - (stats.log_initial - mu1) ** 2 / (2.0 * sigma1_sq)
        )
        total += _accurate_sum(initial)
    return total


def objective_fo(data: Data, theta) -> float:
    """
    Reduced objective f_o(lambda, mu, eta, sigma^2).

    Raises:
        NumericalError: If the value is not finite
    """
    stats = _stats(data)
    th = _theta(theta)
    quad = transition_terms(stats, th)
    _check_finite(stats, quad, "objective term")
    value = -0.5 * stats.n_transitions * math.log(th.sigma_sq) - _accurate_sum(quad) / (2.0 * th.sigma_sq)
    if not math.isfinite(value):
        raise NumericalError(f"Objective is not finite at {th}")
    return value


def gamma_stat(data: Data, lam: float, mu: float, eta: float) -> float:
    """Gamma = sum (l_ij - T_ij)^2 / dt_ij."""
    stats = _stats(data)
    resid = stats.log_increments - _t_terms(stats, lam, mu, eta)
    terms = resid**2 / stats.dt
    _check_finite(stats, terms, "Gamma term")
    return _accurate_sum(terms)


def profile_sigma_sq(data: Data, lam: float, mu: float, eta: float) -> float:
    """
    sigma^2 maximizing f_o at fixed (lambda, mu, eta).

    Positive root of  (sum Delta_i) s^2 + 4 (N-d) s - 4 Gamma = 0, written as
    s = 2 Gamma / ((N-d) + sqrt((N-d)^2 + Gamma sum Delta_i)) to avoid
    cancellation. Gamma == 0 (a perfect fit) gives the boundary value 0.
    """
    stats = _stats(data)
    gamma = gamma_stat(stats, lam, mu, eta)
    m = stats.n_transitions
    if gamma == 0.0:
        logger.warning("Gamma is zero: sigma^2 profile sits on the boundary 0")
        return 0.0
    return 2.0 * gamma / (m + math.sqrt(m * m + gamma * stats.total_span))


def closed_form_sigma_sq(data: Data, lam: float, mu: float, eta: float) -> float:
    """
    Closed form 2 U^(-1/2) Gamma^(1/2) with U = 4(N-d) + sum Delta_i.

    Kept for comparison only: it does not solve the sigma^2 score equation
    in general. Use profile_sigma_sq.
    """
    stats = _stats(data)
    u = 4.0 * stats.n_transitions + stats.total_span
    return 2.0 * math.sqrt(gamma_stat(stats, lam, mu, eta) / u)


def score(data: Data, theta) -> np.ndarray:
    """
    Left-hand sides of the likelihood score system, ordered (lambda, mu, eta, sigma^2).

    For J in (V, Z, W) the component is
        sum (l - T) J / (dt S) + s/2 sum J / S  =  s * d f_o / d(lambda, mu, eta)
    and the sigma^2 component is
        s^2 sum Delta_i + 4 s (N-d) - 4 Gamma  =  -8 s^2 * d f_o / d s

    Raises:
        ConfigError: If theta is not strictly interior
    """
    stats = _stats(data)
    th = _theta(theta)
    lam, mu, eta, s = th.lam, th.mu, th.eta, th.sigma_sq

    xi_u = _xi_unique(stats, lam, mu)
    xa, xb = xi_u[stats.prev_index], xi_u[stats.cur_index]
    ta, tb = stats.unique_times[stats.prev_index], stats.unique_times[stats.cur_index]
    asa, asb = stats.asinh_times[stats.prev_index], stats.asinh_times[stats.cur_index]
    ea, eb = eta + xa, eta + xb

    big_s = ea * eb
    w = xb - xa
    v = (ta * xa * eb - tb * xb * ea) / lam
    z = (asa * xa * eb - asb * xb * ea) / mu
    resid = stats.log_increments - (np.log(ea) - np.log(eb))
    weight = resid / (stats.dt * big_s)

    def component(j_terms: np.ndarray) -> float:
        return _accurate_sum(weight * j_terms) + 0.5 * s * _accurate_sum(j_terms / big_s)

    gamma = _accurate_sum(resid**2 / stats.dt)
    sigma_eq = s * s * stats.total_span + 4.0 * s * stats.n_transitions - 4.0 * gamma
    result = np.array([component(v), component(z), component(w), sigma_eq])
    if not np.all(np.isfinite(result)):
        raise NumericalError(f"Nonfinite score at {th}")
    return result


def gradient(data: Data, theta) -> np.ndarray:
    """Exact gradient of f_o over (lambda, mu, eta, sigma^2)."""
    th = _theta(theta)
    s = th.sigma_sq
    raw = score(data, th)
    return np.array([raw[0] / s, raw[1] / s, raw[2] / s, -raw[3] / (8.0 * s * s)])
