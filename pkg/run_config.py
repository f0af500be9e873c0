"""
JSON payloads accepted by the command-line interface.
Each model validates its payload and converts it into the library types.
"""

import json
import logging
import os
from pathlib import Path
from typing import List, Literal, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from estimator import StudySpec, make_grid
from firefly import FireflyConfig
from h1_errors import ConfigError, H1FlowError
from h1_process import H1Params, InitialLaw

logger = logging.getLogger(__name__)

SEED_ENV = "H1FLOW_SEED"

ModelT = TypeVar("ModelT", bound=BaseModel)


class _Payload(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ProcessParamsModel(_Payload):
    """Process parameters plus the initial law of the simulated paths."""

    eta: float = Field(gt=0)
    lam: float = Field(alias="lambda", gt=0, lt=1)
    mu: float = Field(gt=0)
    sigma: float = Field(gt=0)
    t0: float = 0.0
    x0: float = Field(default=1.0, gt=0)
    initial: Literal["degenerate", "lognormal"] = "degenerate"
    mu1: Optional[float] = None
    sigma1_sq: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _lognormal_needs_parameters(self):
        if self.initial == "lognormal" and (self.mu1 is None or self.sigma1_sq is None):
            raise ValueError("lognormal initial law needs mu1 and sigma1_sq")
        return self

    def to_h1_params(self) -> H1Params:
        return H1Params.from_values(eta=self.eta, lam=self.lam, mu=self.mu, sigma=self.sigma,
                                    t0=self.t0, x0=self.x0)

    def to_initial_law(self) -> InitialLaw:
        if self.initial == "lognormal":
            return InitialLaw.lognormal(self.mu1, self.sigma1_sq)
        return InitialLaw.degenerate(self.x0)


class FireflyConfigModel(_Payload):
    n: int = Field(default=40, ge=2)
    generations: int = Field(default=80, ge=1)
    alpha: float = Field(default=0.2, ge=0)
    beta0: float = Field(default=1.0, gt=0)
    gamma: float = Field(default=1.0, ge=0)
    delta: float = Field(default=0.97, gt=0, lt=1)

    def to_config(self, seed: int) -> FireflyConfig:
        return FireflyConfig(n=self.n, generations=self.generations, alpha0=self.alpha,
                             beta0=self.beta0, gamma=self.gamma, delta=self.delta, seed=seed)


class GridModel(_Payload):
    start: float = 0.0
    end: float = 50.0
    step: float = Field(default=0.1, gt=0)


class StudySpecModel(_Payload):
    params: ProcessParamsModel
    grid: GridModel = GridModel()
    n_paths: int = Field(default=30, ge=1)
    replications: int = Field(default=50, ge=1)
    alphas: List[float] = Field(default=[0.2], min_length=1)
    gammas: List[float] = Field(default=[1.0], min_length=1)
    deltas: List[float] = Field(default=[0.97], min_length=1)
    ns: List[int] = Field(default=[40], min_length=1)
    generations: int = Field(default=80, ge=1)
    beta0: float = Field(default=1.0, gt=0)
    seed: Optional[int] = None

    def to_spec(self, seed: int) -> StudySpec:
        params = self.params.to_h1_params()
        if self.grid.start != params.curve.t0:
            raise ConfigError(f"Study grid starts at {self.grid.start} but t0 is {params.curve.t0}")
        return StudySpec(
            params=params,
            init=self.params.to_initial_law(),
            grid=(self.grid.start, self.grid.end, self.grid.step),
            n_paths=self.n_paths,
            replications=self.replications,
            alphas=tuple(self.alphas),
            gammas=tuple(self.gammas),
            deltas=tuple(self.deltas),
            ns=tuple(self.ns),
            generations=self.generations,
            beta0=self.beta0,
            seed=self.seed if self.seed is not None else seed,
        )


class GridSpecModel(_Payload):
    """Firefly settings scanned by the real-data workflow."""

    alphas: List[float] = Field(default=[0.2, 0.4], min_length=1)
    gammas: List[float] = Field(default=[1.0, 5.0], min_length=1)
    deltas: List[float] = Field(default=[0.9, 0.95, 0.97, 0.99], min_length=1)
    n: int = Field(default=20, ge=2)
    generations: int = Field(default=110, ge=1)
    refit_n: int = Field(default=60, ge=2)
    beta0: float = Field(default=1.0, gt=0)


def load_model(path, model: Type[ModelT]) -> ModelT:
    """
    Parse a JSON file into a payload model.

    Raises:
        ConfigError: If the file is missing, not JSON, or fails validation
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        return model.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    except ValidationError as e:
        raise ConfigError(f"{path}: {e.error_count()} validation error(s): {e.errors()[0]['msg']}") from e
    except H1FlowError:
        raise
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def resolve_seed(seed: Optional[int]) -> int:
    """Explicit seed, else H1FLOW_SEED, else 0."""
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from e


def parse_grid(text: str):
    """Parse 'start:end:step' into an observation grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"Grid must look like start:end:step, got '{text}'")
    try:
        start, end, step = (float(p) for p in parts)
    except ValueError as e:
        raise ConfigError(f"Grid '{text}' has a non-numeric field") from e
    return make_grid(start, end, step)
