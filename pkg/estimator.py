"""
Maximum likelihood estimation of the H1 diffusion process and the replication
harness for simulation studies.

Pipeline: closed-form initial-law estimates, stagewise bounding of the
parametric space, firefly maximization of f_o.
"""

import hashlib
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import likelihood
import param_bounds
from firefly import FireflyConfig, OptimizeResult, optimize
from h1_errors import ConfigError, DataError
from h1_process import H1Params, InitialLaw, PathPanel, mean_fn, panel_mean, simulate
from likelihood import ThetaVector
from param_bounds import ParamBox

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("lambda", "mu", "eta", "sigma")
AXIS_NAMES = ("alpha", "gamma", "delta", "n")


@dataclass
class FitResult:
    """
    Outcome of one maximum likelihood fit.

    Attributes:
        theta_hat: Estimated (lambda, mu, eta, sigma^2)
        mu1_hat: ML estimate of the initial log-mean
        sigma1_sq_hat: ML estimate of the initial log-variance
        fo_value: f_o at theta_hat
        box: Search box used by the swarm
        optimization: Firefly result with the full trace
        initial_law: Initial law used for mean predictions
        t0: Time origin of the panel
        config: Firefly configuration
        duration: Wall-clock seconds
    """

    theta_hat: ThetaVector
    mu1_hat: float
    sigma1_sq_hat: float
    fo_value: float
    box: ParamBox
    optimization: OptimizeResult
    initial_law: InitialLaw
    t0: float
    config: FireflyConfig
    duration: float = 0.0

    @property
    def h1_params(self) -> H1Params:
        return H1Params.from_values(
            eta=self.theta_hat.eta,
            lam=self.theta_hat.lam,
            mu=self.theta_hat.mu,
            sigma=self.theta_hat.sigma,
            t0=self.t0,
            x0=self.initial_law.mean(),
        )

    def estimates(self) -> Dict[str, float]:
        return {
            "lambda": self.theta_hat.lam,
            "mu": self.theta_hat.mu,
            "eta": self.theta_hat.eta,
            "sigma": self.theta_hat.sigma,
            "sigma_sq": self.theta_hat.sigma_sq,
        }

    def to_dict(self) -> Dict:
        """Deterministic JSON-ready view; wall-clock timing is left out."""
        return {
            "estimates": self.estimates(),
            "initial_law": {
                "mu1_hat": self.mu1_hat,
                "sigma1_sq_hat": self.sigma1_sq_hat,
                "degenerate": self.sigma1_sq_hat == 0.0,
                "used_for_mean": {
                    "kind": self.initial_law.kind,
                    "mean": self.initial_law.mean(),
                },
            },
            "fo_value": self.fo_value,
            "t0": self.t0,
            "box": self.box.to_dict(),
            "firefly": {
                "n": self.config.n,
                "generations": self.config.generations,
                "alpha0": self.config.alpha0,
                "beta0": self.config.beta0,
                "gamma": self.config.gamma,
                "delta": self.config.delta,
                "seed": self.config.seed,
                "final_alpha": self.optimization.state.alpha,
                "evaluations": self.optimization.n_evaluations,
            },
        }

    def trace_frame(self) -> pd.DataFrame:
        """Per-generation swarm trace in natural (lambda, mu, eta, sigma) coordinates."""
        return self.optimization.trace.to_frame(PARAMETER_NAMES, transform=self.box.to_natural)


def _initial_law(panel: PathPanel, mu1: float, sigma1_sq: float, initial: str) -> InitialLaw:
    if initial == "mle":
        if sigma1_sq > 0:
            return InitialLaw.lognormal(mu1, sigma1_sq)
        return InitialLaw.degenerate(math.exp(mu1))
    if initial == "mean":
        return InitialLaw.degenerate(float(np.mean(panel.initial_values())))
    raise ConfigError(f"Unknown initial-value rule '{initial}' (expected 'mle' or 'mean')")


def fit(panel: PathPanel,
        cfg: FireflyConfig,
        seed: Optional[int] = None,
        initial: str = "mle",
        stats: Optional[likelihood.SufficientStats] = None) -> FitResult:
    """
    Fit the H1 diffusion process to a panel.

    Args:
        panel: Observed paths
        cfg: Firefly configuration
        seed: Overrides cfg.seed; seeds both the initial swarm and the moves
        initial: 'mle' predicts means from the estimated initial law, 'mean'
            from a point mass at the mean of the first observations
        stats: Precomputed sufficient statistics of the panel

    Returns:
        FitResult
    """
    start = time.perf_counter()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    mu1, sigma1_sq = likelihood.initial_mle(panel)
    if sigma1_sq == 0.0:
        logger.info("All paths share their first value: degenerate initial law")
    stats = stats if stats is not None else likelihood.build_stats(panel)

    seeding_rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1,)))
    box, population = param_bounds.stagewise_population(panel, cfg.n, seeding_rng)

    def objective(x: np.ndarray) -> float:
        return likelihood.objective_fo(stats, box.to_theta(x))

    result = optimize(objective, box, cfg, initial=population)
    theta_hat = box.to_theta(result.best_position)
    duration = time.perf_counter() - start

    logger.info(
        f"Fit finished in {duration:.2f}s: lambda={theta_hat.lam:.6g}, mu={theta_hat.mu:.6g}, "
        f"eta={theta_hat.eta:.6g}, sigma={theta_hat.sigma:.6g}, f_o={result.best_value:.6f}"
    )
    return FitResult(
        theta_hat=theta_hat,
        mu1_hat=mu1,
        sigma1_sq_hat=sigma1_sq,
        fo_value=result.best_value,
        box=box,
        optimization=result,
        initial_law=_initial_law(panel, mu1, sigma1_sq, initial),
        t0=panel.t1,
        config=cfg,
        duration=duration,
    )


def fitted_mean_error(panel: PathPanel, fit_result: FitResult) -> float:
    """
    Mean over grid points of |xbar(t_j) - m(t_j)| / xbar(t_j), with xbar the
    cross-path sample mean and m the mean function of the fitted process.
    """
    times, observed = panel_mean(panel)
    if np.any(observed == 0):
        raise DataError("Observed mean is zero at some grid point")
    predicted = mean_fn(fit_result.h1_params, fit_result.initial_law, times)
    return float(np.mean(np.abs(observed - predicted) / observed))


def relative_error(estimate: float, truth: float) -> float:
    return abs(estimate - truth) / abs(truth)


def parameter_errors(theta_hat: ThetaVector, truth: H1Params) -> Dict[str, float]:
    """Absolute relative errors of (lambda, mu, eta, sigma)."""
    return {
        "lambda": relative_error(theta_hat.lam, truth.curve.lam),
        "mu": relative_error(theta_hat.mu, truth.curve.mu),
        "eta": relative_error(theta_hat.eta, truth.curve.eta),
        "sigma": relative_error(theta_hat.sigma, truth.sigma),
    }


def true_theta(params: H1Params) -> ThetaVector:
    return ThetaVector(lam=params.curve.lam, mu=params.curve.mu, eta=params.curve.eta,
                       sigma_sq=params.sigma_sq)


def derive_seed(seed: int, *keys) -> int:
    """seed XOR a stable hash of the keys, so every (cell, replication) is reproducible on its own."""
    digest = hashlib.sha256(":".join(str(k) for k in keys).encode("utf-8")).digest()
    return (seed ^ int.from_bytes(digest[:8], "big")) & (2**63 - 1)


@dataclass
class StudySpec:
    """
    Replication protocol of a simulation study.

    Attributes:
        params: True process parameters
        init: Initial law of the simulated paths
        grid: (t_start, t_end, dt) of the observation grid
        n_paths: Paths per simulated panel
        replications: Panels simulated per grid cell
        alphas, gammas, deltas, ns: Firefly grid axes
        generations: Generations of every fit
        beta0: Attractiveness at distance zero
        seed: Root seed
    """

    params: H1Params
    init: InitialLaw
    grid: Tuple[float, float, float] = (0.0, 50.0, 0.1)
    n_paths: int = 30
    replications: int = 50
    alphas: Sequence[float] = (0.2,)
    gammas: Sequence[float] = (1.0,)
    deltas: Sequence[float] = (0.97,)
    ns: Sequence[int] = (40,)
    generations: int = 80
    beta0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f"replications must be at least 1, got {self.replications}")
        if self.n_paths < 1:
            raise ConfigError(f"n_paths must be at least 1, got {self.n_paths}")
        for name in AXIS_NAMES:
            if len(self.axis(name)) < 1:
                raise ConfigError(f"Grid axis '{name}' is empty")

    def axis(self, name: str) -> Sequence:
        return {"alpha": self.alphas, "gamma": self.gammas, "delta": self.deltas, "n": self.ns}[name]

    def times(self) -> np.ndarray:
        return make_grid(*self.grid)

    def cells(self) -> List[FireflyConfig]:
        return [
            FireflyConfig(n=int(n), generations=self.generations, alpha0=alpha, beta0=self.beta0,
                          gamma=gamma, delta=delta, seed=self.seed)
            for alpha, gamma, delta, n in itertools.product(self.alphas, self.gammas, self.deltas, self.ns)
        ]


def make_grid(t_start: float, t_end: float, dt: float) -> np.ndarray:
    """Uniform grid t_start, t_start + dt, ..., t_end (endpoint included when it falls on the grid)."""
    if not dt > 0 or not t_end > t_start:
        raise ConfigError(f"Invalid grid {t_start}:{t_end}:{dt}")
    steps = int(math.floor((t_end - t_start) / dt + 1e-9))
    return t_start + dt * np.arange(steps + 1)


@dataclass
class StudyResult:
    records: pd.DataFrame
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)


def _fit_replication(panel: PathPanel, stats: likelihood.SufficientStats, cfg: FireflyConfig,
                     fo_true: float, truth: H1Params, cell: int, rep: int) -> Dict:
    result = fit(panel, cfg, stats=stats)
    errors = parameter_errors(result.theta_hat, truth)
    record = {
        "cell": cell,
        "replication": rep,
        "alpha": cfg.alpha0,
        "gamma": cfg.gamma,
        "delta": cfg.delta,
        "n": cfg.n,
        "seed": cfg.seed,
        "fo_true": fo_true,
        "fo_hat": result.fo_value,
        "fo_error": relative_error(result.fo_value, fo_true),
    }
    record.update({f"{name}_hat": value for name, value in zip(PARAMETER_NAMES, (
        result.theta_hat.lam, result.theta_hat.mu, result.theta_hat.eta, result.theta_hat.sigma))})
    record.update({f"err_{name}": value for name, value in errors.items()})
    return record


def error_tables(records: pd.DataFrame, spec: StudySpec) -> Dict[str, pd.DataFrame]:
    """
    Average the replication records into tables.

    'parameters' holds per-cell mean errors of every parameter and of f_o. For
    every pair of varied grid axes a table of the mean f_o error is keyed by
    that pair, averaging over the other axes.
    """
    records = records.sort_values(["cell", "replication"]).reset_index(drop=True)
    error_cols = ["err_lambda", "err_mu", "err_eta", "err_sigma", "fo_error"]
    tables = {
        "parameters": records.groupby(["cell", *AXIS_NAMES], sort=True)[error_cols].mean().reset_index()
    }
    varied = [name for name in AXIS_NAMES if len(spec.axis(name)) > 1]
    for row_axis, col_axis in itertools.combinations(varied, 2):
        table = records.pivot_table(index=row_axis, columns=col_axis, values="fo_error", aggfunc="mean")
        tables[f"{row_axis}_vs_{col_axis}"] = table
    if len(varied) == 1:
        tables[f"by_{varied[0]}"] = records.groupby(varied[0])["fo_error"].mean().to_frame()
    return tables


def replicate_study(spec: StudySpec, n_workers: int = 1) -> StudyResult:
    """
    Run every (grid cell, replication) fit and aggregate the errors.

    Every fit gets its own simulated panel, seeded from (seed, "panel", cell,
    replication), so cells are independent samples. The firefly seed of a fit
    is derived from (seed, cell, replication).
    """
    times = spec.times()
    truth = spec.params
    theta_true = true_theta(truth)
    cells = spec.cells()

    jobs = [
        (cell, rep, replace(cfg, seed=derive_seed(spec.seed, cell, rep)))
        for cell, cfg in enumerate(cells)
        for rep in range(spec.replications)
    ]
    logger.info(f"Replication study: {len(cells)} cell(s) x {spec.replications} replication(s)")

    def run(job) -> Dict:
        cell, rep, cfg = job
        panel = simulate(truth, spec.init, times, spec.n_paths,
                         seed=derive_seed(spec.seed, "panel", cell, rep))
        stats = likelihood.build_stats(panel)
        fo_true = likelihood.objective_fo(stats, theta_true)
        return _fit_replication(panel, stats, cfg, fo_true, truth, cell, rep)

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(job) for job in jobs]

    records = pd.DataFrame(rows).sort_values(["cell", "replication"]).reset_index(drop=True)
    return StudyResult(records=records, tables=error_tables(records, spec))


@dataclass
class GridCell:
    alpha: float
    gamma: float
    delta: float
    fit: FitResult
    error: float


def fit_grid(panel: PathPanel,
             alphas: Sequence[float] = (0.2, 0.4),
             gammas: Sequence[float] = (1.0, 5.0),
             deltas: Sequence[float] = (0.9, 0.95, 0.97, 0.99),
             n: int = 20,
             generations: int = 110,
             beta0: float = 1.0,
             seed: int = 0,
             initial: str = "mean",
             n_workers: int = 1) -> List[GridCell]:
    """
    Fit a panel once per (alpha, gamma, delta) combination and score each fit
    by fitted_mean_error.

    Returns:
        List[GridCell]: In grid order
    """
    stats = likelihood.build_stats(panel)
    combos = list(itertools.product(alphas, gammas, deltas))

    def run(index: int) -> GridCell:
        alpha, gamma, delta = combos[index]
        cfg = FireflyConfig(n=n, generations=generations, alpha0=alpha, beta0=beta0, gamma=gamma,
                            delta=delta, seed=derive_seed(seed, "grid", index))
        result = fit(panel, cfg, initial=initial, stats=stats)
        return GridCell(alpha=alpha, gamma=gamma, delta=delta, fit=result,
                        error=fitted_mean_error(panel, result))

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            cells = list(pool.map(run, range(len(combos))))
    else:
        cells = [run(k) for k in range(len(combos))]
    return cells


def best_cell(cells: Sequence[GridCell]) -> GridCell:
    """Cell with the smallest fitted-mean error; earlier cells win ties."""
    if not cells:
        raise ConfigError("No grid cells to choose from")
    return min(cells, key=lambda c: c.error)


def refit_best(panel: PathPanel,
               cells: Sequence[GridCell],
               n_fireflies: int = 60,
               seed: int = 0,
               initial: str = "mean") -> FitResult:
    """Refit the best grid cell with a larger swarm, keeping its generations."""
    best = best_cell(cells)
    cfg = replace(best.fit.config, n=n_fireflies, seed=derive_seed(seed, "refit"))
    logger.info(f"Refitting alpha={best.alpha}, gamma={best.gamma}, delta={best.delta} with n={n_fireflies}")
    return fit(panel, cfg, initial=initial)


def grid_frame(cells: Sequence[GridCell]) -> pd.DataFrame:
    """Grid results as a table: FA settings, estimates and fitted-mean error."""
    rows = []
    for cell in cells:
        row = {"alpha": cell.alpha, "gamma": cell.gamma, "delta": cell.delta}
        row.update({name: cell.fit.estimates()[name] for name in ("eta", "lambda", "mu", "sigma")})
        row["fo_value"] = cell.fit.fo_value
        row["error"] = cell.error
        rows.append(row)
    return pd.DataFrame(rows)
