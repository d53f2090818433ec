"""Objective families used in the experiments and their gradient oracles.

Two per-agent losses are supported, both functions of the residual
``x - sample``:

* ``SC_QUADRATIC``: ``0.5 * |x - s|^2`` (strongly convex, mu = L = 1)
* ``PL_SINE``: ``0.5 * |x - s|^2 + 0.5 * sin(|x - s|)^2`` (non-convex, PL)

All gradient functions broadcast over leading axes, so a stack of agents
``(n, d)`` can be evaluated in one call.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError

# Below this radius the sine factor sin(2r)/(2r) is replaced by its limit 1.
SINE_RADIUS_EPS = 1e-8

PL_GRID_STEP = 1e-3
PL_GRID_MAX = 20.0
PL_SIGMA_DRAWS = 100_000
PL_SIGMA_SEED = 20240917


class ObjectiveKind(str, enum.Enum):
    SC_QUADRATIC = "sc"
    PL_SINE = "pl"


class DataMode(str, enum.Enum):
    FINITE_SAMPLE = "finite"
    POPULATION = "population"


@dataclass(frozen=True)
class DataModel:
    """How an agent's samples are produced.

    ``FINITE_SAMPLE`` freezes ``samples_per_agent`` draws ``center + Z`` at
    construction and resamples uniformly from them; ``POPULATION`` draws a
    fresh ``center + noise_std * Z`` on every call.
    """

    mode: DataMode = DataMode.FINITE_SAMPLE
    samples_per_agent: int = 100
    noise_std: float = 1.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be >= 0")
        if self.mode is DataMode.FINITE_SAMPLE and self.samples_per_agent < 1:
            raise ConfigurationError("FiniteSample mode needs samples_per_agent >= 1")


@dataclass(frozen=True)
class CurvatureConstants:
    mu: float
    lipschitz: float
    sigma_sq: float
    # seed of the Monte Carlo draw when sigma_sq is estimated, else None
    sigma_sq_seed: int | None = None

    def __post_init__(self):
        if not (self.mu > 0 and self.lipschitz >= self.mu and self.sigma_sq >= 0):
            raise ConfigurationError(f"inconsistent curvature constants {self}")


def _check_dims(x: np.ndarray, sample: np.ndarray) -> None:
    if x.shape[-1] != sample.shape[-1]:
        raise DimensionMismatchError(x.shape[-1], sample.shape[-1], "x and sample")


def _sine_factor(r: np.ndarray) -> np.ndarray:
    # 1 + sin(2r)/(2r), with the removable singularity at r = 0 filled in
    r = np.asarray(r, dtype=float)
    safe = np.where(r < SINE_RADIUS_EPS, 1.0, r)
    ratio = np.where(r < SINE_RADIUS_EPS, 1.0, np.sin(2.0 * safe) / (2.0 * safe))
    return 1.0 + ratio


def objective_value(kind: ObjectiveKind, x, sample) -> np.ndarray | float:
    """Per-sample loss q(x; sample)."""
    x = np.asarray(x, dtype=float)
    sample = np.asarray(sample, dtype=float)
    _check_dims(x, sample)
    r = np.linalg.norm(x - sample, axis=-1)
    if kind is ObjectiveKind.SC_QUADRATIC:
        return 0.5 * r**2
    return 0.5 * r**2 + 0.5 * np.sin(r) ** 2


def sample_gradient(kind: ObjectiveKind, x, sample) -> np.ndarray:
    """Gradient of q(x; sample) with respect to x."""
    x = np.asarray(x, dtype=float)
    sample = np.asarray(sample, dtype=float)
    _check_dims(x, sample)
    diff = x - sample
    if kind is ObjectiveKind.SC_QUADRATIC:
        return diff
    r = np.sqrt(np.einsum("...i,...i->...", diff, diff))
    return diff * _sine_factor(r)[..., None]


def honest_population_gradient(kind: ObjectiveKind, x, x_star) -> np.ndarray:
    """Exact gradient of the idealized honest loss (sample fixed at x*)."""
    return sample_gradient(kind, x, x_star)


def population_suboptimality(kind: ObjectiveKind, x, x_star) -> float:
    """q(x) - q* for the idealized honest loss; zero at x*."""
    return float(objective_value(kind, x, x_star))


class AgentData:
    """Data view of one agent: its center and (optionally) frozen samples."""

    def __init__(self, model: DataModel, center: np.ndarray,
                 samples: np.ndarray | None = None):
        self.model = model
        self.center = np.asarray(center, dtype=float)
        if model.mode is DataMode.FINITE_SAMPLE:
            if samples is None or len(samples) == 0:
                raise ConfigurationError("FiniteSample mode requires a non-empty sample set")
            samples = np.asarray(samples, dtype=float)
        self.samples = samples

    @classmethod
    def generate(cls, model: DataModel, center, rng: np.random.Generator) -> "AgentData":
        center = np.asarray(center, dtype=float)
        samples = None
        if model.mode is DataMode.FINITE_SAMPLE:
            z = rng.standard_normal((model.samples_per_agent, center.shape[0]))
            samples = center + model.noise_std * z
        return cls(model, center, samples)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Next ``n`` samples from this agent's stream, shape (n, d)."""
        if self.model.mode is DataMode.FINITE_SAMPLE:
            idx = rng.integers(0, len(self.samples), size=n)
            return self.samples[idx]
        z = rng.standard_normal((n, self.center.shape[0]))
        return self.center + self.model.noise_std * z


def stochastic_gradient(kind: ObjectiveKind, x, agent_data: AgentData,
                        rng: np.random.Generator) -> np.ndarray:
    sample = agent_data.draw(rng, 1)[0]
    return sample_gradient(kind, x, sample)


@lru_cache(maxsize=8)
def certified_pl_constant(step: float = PL_GRID_STEP, r_max: float = PL_GRID_MAX) -> float:
    """Largest mu with 0.5*q'(r)^2 >= mu*q(r) on the radial grid, rounded down.

    The minimum of the ratio is found on ``(0, r_max]`` and truncated to three
    significant digits so the certified value sits strictly below the grid
    minimum.
    """
    r = np.arange(1, int(round(r_max / step)) + 1) * step
    q = 0.5 * r**2 + 0.5 * np.sin(r) ** 2
    dq = r + np.sin(r) * np.cos(r)
    m = float(np.min(0.5 * dq**2 / q))
    scale = 10 ** (2 - math.floor(math.log10(m)))
    return math.floor(m * scale) / scale


@lru_cache(maxsize=32)
def estimate_pl_sigma_sq(dim: int, noise_std: float, seed: int = PL_SIGMA_SEED,
                         draws: int = PL_SIGMA_DRAWS) -> float:
    """Monte Carlo trace of the gradient-noise covariance at x = x* + e1.

    Uses x* = 0 (the loss depends on x - sample only).
    """
    if noise_std == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    x = np.zeros(dim)
    x[0] = 1.0
    samples = noise_std * rng.standard_normal((draws, dim))
    g = sample_gradient(ObjectiveKind.PL_SINE, x, samples)
    centered = g - g.mean(axis=0)
    return float(np.mean(np.einsum("ij,ij->i", centered, centered)))


def curvature(kind: ObjectiveKind, noise_std: float, dim: int) -> CurvatureConstants:
    if dim < 1:
        raise ConfigurationError("dim must be >= 1")
    if kind is ObjectiveKind.SC_QUADRATIC:
        return CurvatureConstants(mu=1.0, lipschitz=1.0, sigma_sq=dim * noise_std**2)
    return CurvatureConstants(
        mu=certified_pl_constant(),
        lipschitz=2.0,
        sigma_sq=estimate_pl_sigma_sq(dim, float(noise_std)),
        sigma_sq_seed=None if noise_std == 0 else PL_SIGMA_SEED,
    )
