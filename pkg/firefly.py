"""
Box-constrained firefly algorithm (maximization).

Fireflies move in box-normalized coordinates, each coordinate scaled to [0, 1]:

    x_i <- x_i + beta0 * exp(-gamma * r_ij^2) * (x_j - x_i) + alpha * (u - 1/2)

Between generations the swarm is held brightest-first, so the sweep
i = 1..n, j = 1..i compares every firefly with all brighter ones. Intensities
are refreshed right after each move and alpha shrinks to alpha0 * delta^g.
A best-so-far archive is kept apart from the swarm.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from h1_errors import ConfigError, H1FlowError
from param_bounds import ParamBox

logger = logging.getLogger(__name__)

CLAMP_MARGIN = 1e-12

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class FireflyConfig:
    """
    Tuning of the firefly algorithm.

    Attributes:
        n: Population size
        generations: Number of generations
        alpha0: Initial randomization parameter
        beta0: Attractiveness at distance zero
        gamma: Light absorption coefficient
        delta: Per-generation reduction factor of alpha
        seed: Seed of the movement noise
    """

    n: int = 40
    generations: int = 80
    alpha0: float = 0.2
    beta0: float = 1.0
    gamma: float = 1.0
    delta: float = 0.97
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"Firefly population needs n >= 2, got {self.n}")
        if self.generations < 1:
            raise ConfigError(f"generations must be at least 1, got {self.generations}")
        if self.alpha0 < 0:
            raise ConfigError(f"alpha0 must be nonnegative, got {self.alpha0}")
        if self.beta0 <= 0:
            raise ConfigError(f"beta0 must be positive, got {self.beta0}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be nonnegative, got {self.gamma}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")

    def alpha_at(self, generation: int) -> float:
        """alpha after `generation` completed generations."""
        return self.alpha0 * self.delta**generation


@dataclass
class SwarmState:
    positions: np.ndarray
    intensities: np.ndarray
    best_position: np.ndarray
    best_value: float
    generation: int
    alpha: float


@dataclass
class GenerationRecord:
    """
    Snapshot taken after a generation has been ranked.

    positions and intensities are ordered from the dimmest to the brightest
    firefly, so the current best is the last row.
    """

    generation: int
    alpha: float
    positions: np.ndarray
    intensities: np.ndarray
    archive_value: float

    @property
    def best_position(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def best_value(self) -> float:
        return float(self.intensities[-1])

    @property
    def worst_position(self) -> np.ndarray:
        return self.positions[0]

    @property
    def worst_value(self) -> float:
        return float(self.intensities[0])


@dataclass
class FireflyTrace:
    records: List[GenerationRecord] = field(default_factory=list)

    def archive_values(self) -> np.ndarray:
        return np.array([record.archive_value for record in self.records])

    def to_frame(self, names: Sequence[str],
                 transform: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> pd.DataFrame:
        """
        One row per (generation, firefly).

        Args:
            names: Coordinate column names
            transform: Optional map from search coordinates to reported ones
        """
        rows = []
        for record in self.records:
            coords = record.positions if transform is None else transform(record.positions)
            last = len(record.intensities) - 1
            for k, (point, value) in enumerate(zip(coords, record.intensities)):
                row = {"generation": record.generation, "firefly": k}
                row.update({name: float(v) for name, v in zip(names, point)})
                row["intensity"] = float(value)
                row["alpha"] = record.alpha
                row["is_best"] = k == last
                row["is_worst"] = k == 0
                rows.append(row)
        return pd.DataFrame(rows)

    def summary_frame(self) -> pd.DataFrame:
        """Per-generation best, worst and archive values."""
        return pd.DataFrame({
            "generation": [r.generation for r in self.records],
            "alpha": [r.alpha for r in self.records],
            "best": [r.best_value for r in self.records],
            "worst": [r.worst_value for r in self.records],
            "archive_best": [r.archive_value for r in self.records],
        })


@dataclass
class OptimizeResult:
    best_position: np.ndarray
    best_value: float
    trace: FireflyTrace
    state: SwarmState
    n_evaluations: int


def attractiveness(r, beta0: float, gamma: float):
    """beta(r) = beta0 * exp(-gamma * r^2)."""
    return beta0 * np.exp(-gamma * np.asarray(r, dtype=float) ** 2)


def move(i_pos: np.ndarray,
         j_pos: np.ndarray,
         alpha: float,
         beta0: float,
         gamma: float,
         rng: np.random.Generator,
         box: ParamBox) -> np.ndarray:
    """
    Move firefly i towards the brighter firefly j.

    Distances, attraction and noise act on normalized coordinates; the result
    is clamped to the box interior.

    Returns:
        np.ndarray: New position of firefly i in box coordinates
    """
    ui = box.normalize(i_pos)
    uj = box.normalize(j_pos)
    r = math.sqrt(float(np.sum((uj - ui) ** 2)))
    beta = float(attractiveness(r, beta0, gamma))
    eps = rng.random(ui.size) - 0.5
    u_new = ui + beta * (uj - ui) + alpha * eps
    u_new = np.clip(u_new, CLAMP_MARGIN, 1.0 - CLAMP_MARGIN)
    return box.denormalize(u_new)


class _SafeObjective:
    """Counts evaluations and maps failures or nonfinite values to -inf."""

    def __init__(self, objective: Objective):
        self.objective = objective
        self.evaluations = 0
        self.failures = 0

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        try:
            value = float(self.objective(x))
        except (H1FlowError, ArithmeticError, ValueError):
            value = -math.inf
        if not math.isfinite(value):
            self.failures += 1
            return -math.inf
        return value


def _brightest_first(intensities: np.ndarray) -> np.ndarray:
    # stable sort keeps the lower index first among ties
    return np.argsort(-intensities, kind="stable")


def _record(generation: int, alpha: float, positions: np.ndarray, intensities: np.ndarray,
            archive_value: float) -> GenerationRecord:
    return GenerationRecord(
        generation=generation,
        alpha=alpha,
        positions=positions[::-1].copy(),
        intensities=intensities[::-1].copy(),
        archive_value=archive_value,
    )


def optimize(objective: Objective,
             box: ParamBox,
             cfg: FireflyConfig,
             initial: Optional[np.ndarray] = None) -> OptimizeResult:
    """
    Maximize an objective over a box with the firefly algorithm.

    Args:
        objective: Function of a point in box coordinates
        box: Search box
        cfg: Algorithm tuning
        initial: Optional (n, dim) initial population inside the box; drawn
            uniformly when omitted

    Returns:
        OptimizeResult: Archive best point and value, per-generation trace
            (generation 0 is the initial population) and the final swarm
    """
    rng = np.random.default_rng(cfg.seed)
    safe = _SafeObjective(objective)

    if initial is None:
        positions = box.denormalize(rng.random((cfg.n, box.dim)))
    else:
        positions = np.array(initial, dtype=float)
        if positions.shape != (cfg.n, box.dim):
            raise ConfigError(f"Initial population must have shape {(cfg.n, box.dim)}, got {positions.shape}")
        if not all(box.contains(p) for p in positions):
            raise ConfigError("Initial population leaves the search box")

    intensities = np.array([safe(p) for p in positions])
    first = int(np.argmax(intensities))
    best_position, best_value = positions[first].copy(), float(intensities[first])

    order = _brightest_first(intensities)
    positions, intensities = positions[order], intensities[order]
    trace = FireflyTrace([_record(0, cfg.alpha0, positions, intensities, best_value)])

    for generation in range(1, cfg.generations + 1):
        alpha = cfg.alpha_at(generation - 1)
        for i in range(cfg.n):
            for j in range(i + 1):
                if intensities[i] < intensities[j]:
                    positions[i] = move(positions[i], positions[j], alpha, cfg.beta0, cfg.gamma, rng, box)
                    intensities[i] = safe(positions[i])
                    if intensities[i] > best_value:
                        best_position, best_value = positions[i].copy(), float(intensities[i])

        order = _brightest_first(intensities)
        positions, intensities = positions[order], intensities[order]
        trace.records.append(_record(generation, alpha, positions, intensities, best_value))
        logger.debug(f"Generation {generation}: best {intensities[0]:.6g}, archive {best_value:.6g}")

    if safe.failures:
        logger.warning(f"{safe.failures} of {safe.evaluations} objective evaluations were not finite")

    state = SwarmState(
        positions=positions,
        intensities=intensities,
        best_position=best_position,
        best_value=best_value,
        generation=cfg.generations,
        alpha=cfg.alpha_at(cfg.generations),
    )
    return OptimizeResult(
        best_position=best_position,
        best_value=best_value,
        trace=trace,
        state=state,
        n_evaluations=safe.evaluations,
    )
