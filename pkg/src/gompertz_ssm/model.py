"""Core model objects: parameter algebra, stationary moments, forward simulation.

The model is a latent log-scale AR(1) (Gompertz dynamics) observed through a
count channel.  Public APIs are parameterized by the stationary triple
(theta1, theta2, b); the natural parameters (a, sigma2, r) are derived.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Poisson/negative-binomial samplers degrade beyond this conditional mean;
# larger values signal pathological parameters rather than a real series.
EXP_Z_CAP = 1e12

LOG_2PI = math.log(2.0 * math.pi)


class ParameterError(ValueError):
    """Raised when parameters violate the model's validity constraints."""


class NoiseModel(str, Enum):
    """Observation channel for the counts.

    POISSON: counts ~ Poisson(exp(Z_t)).
    NEG_BINOMIAL_HALF: negative binomial with success probability 0.5 and
    size exp(Z_t), so the mean is exp(Z_t) and the variance is 2*exp(Z_t).
    """

    POISSON = "poisson"
    NEG_BINOMIAL_HALF = "negbinomial_half"


@dataclass(frozen=True)
class NaturalParams:
    """Growth-rate parameterization (a, sigma2) with lag-1 coefficient r = 1+b."""

    a: float
    sigma2: float
    r: float

    def __post_init__(self):
        if not (self.sigma2 > 0.0):
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2}")
        if not (abs(self.r) < 1.0):
            raise ParameterError(f"|r| must be < 1 for stationarity, got {self.r}")

    def to_stationary(self) -> "ModelParams":
        b = self.r - 1.0
        return ModelParams(
            theta1=-self.a / b,
            theta2=-self.sigma2 / (b * (2.0 + b)),
            b=b,
        )


@dataclass(frozen=True)
class ModelParams:
    """Stationary parameterization: marginal mean theta1, marginal variance
    theta2 and density-dependence b in the open interval (-2, 0)."""

    theta1: float
    theta2: float
    b: float

    def __post_init__(self):
        if not np.isfinite(self.theta1):
            raise ParameterError(f"theta1 must be finite, got {self.theta1}")
        if not (np.isfinite(self.theta2) and self.theta2 > 0.0):
            raise ParameterError(f"theta2 must be positive, got {self.theta2}")
        if not (-2.0 < self.b < 0.0):
            raise ParameterError(f"b must lie in (-2, 0), got {self.b}")

    @property
    def r(self) -> float:
        return 1.0 + self.b

    def natural(self) -> NaturalParams:
        return derive_natural_params(self)


def derive_natural_params(p: ModelParams) -> NaturalParams:
    """Map (theta1, theta2, b) to (a, sigma2, r); exact inverse of the
    stationary parameterization."""
    a = -p.b * p.theta1
    sigma2 = -p.theta2 * p.b * (2.0 + p.b)
    return NaturalParams(a=a, sigma2=sigma2, r=1.0 + p.b)


def stationary_moments(p: ModelParams, h: int = 1) -> tuple[float, float, float]:
    """Stationary mean, variance and lag-h autocovariance of the latent-scale
    population sizes exp(Z_t).

    Note: the variance returned is that of N_t = exp(Z_t); the observed counts
    carry an extra Poisson layer on top (their variance is this value plus the
    mean).
    """
    if h < 0:
        raise ValueError(f"lag h must be nonnegative, got {h}")
    mean = math.exp(p.theta1 + p.theta2 / 2.0)
    base = math.exp(2.0 * p.theta1 + p.theta2)
    variance = base * math.expm1(p.theta2)
    lag_cov = base * math.expm1(p.theta2 * (1.0 + p.b) ** h)
    return mean, variance, lag_cov


def simulate_latent(p: ModelParams, T: int, rng: np.random.Generator) -> np.ndarray:
    """Simulate Z_1..Z_T from the stationary AR(1): Z_1 ~ N(theta1, theta2),
    Z_{t+1} = a + (1+b) Z_t + N(0, sigma2)."""
    if T < 2:
        raise ValueError(f"T must be at least 2, got {T}")
    nat = p.natural()
    z = np.empty(T)
    eps = rng.standard_normal(T)
    z[0] = p.theta1 + math.sqrt(p.theta2) * eps[0]
    sd = math.sqrt(nat.sigma2)
    for t in range(1, T):
        z[t] = nat.a + nat.r * z[t - 1] + sd * eps[t]
    return z


def simulate_observations(
    z: np.ndarray, noise: NoiseModel, rng: np.random.Generator
) -> np.ndarray:
    """Draw conditionally independent counts from the observation channel."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("latent trajectory must be finite")
    lam = np.exp(z)
    if np.any(lam > EXP_Z_CAP):
        raise ValueError(
            f"exp(Z_t) exceeds the cap {EXP_Z_CAP:g}; parameters are pathological"
        )
    if noise == NoiseModel.POISSON:
        return rng.poisson(lam).astype(np.int64)
    if noise == NoiseModel.NEG_BINOMIAL_HALF:
        # size exp(Z_t), success prob 0.5 -> mean exp(Z_t), variance 2 exp(Z_t)
        return rng.negative_binomial(lam, 0.5).astype(np.int64)
    raise ValueError(f"unknown noise model {noise!r}")


def validate_counts(counts) -> np.ndarray:
    """Validate an observed count series: integer-valued, nonnegative, length >= 2."""
    arr = np.asarray(counts)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("count series must be 1-D with at least 2 observations")
    if not np.all(np.isfinite(arr.astype(float))):
        raise ValueError("count series must be finite")
    if np.any(arr != np.floor(arr)) or np.any(arr < 0):
        raise ValueError("counts must be nonnegative integers")
    return arr.astype(np.int64)


def complete_data_loglik(z: np.ndarray, p: ModelParams) -> float:
    """Log density of the latent trajectory under the stationary AR(1),
    computed in O(T) via the sequential factorization."""
    z = np.asarray(z, dtype=float)
    nat = p.natural()
    w = z - p.theta1
    out = -0.5 * (LOG_2PI + math.log(p.theta2)) - w[0] ** 2 / (2.0 * p.theta2)
    if z.size > 1:
        e = w[1:] - nat.r * w[:-1]
        out += -0.5 * (z.size - 1) * (LOG_2PI + math.log(nat.sigma2))
        out += -float(np.dot(e, e)) / (2.0 * nat.sigma2)
    return float(out)


def complete_data_loglik_bank(bank: np.ndarray, p: ModelParams) -> np.ndarray:
    """Vectorized complete_data_loglik over a (J, T) bank of trajectories."""
    bank = np.atleast_2d(np.asarray(bank, dtype=float))
    nat = p.natural()
    w = bank - p.theta1
    out = -0.5 * (LOG_2PI + math.log(p.theta2)) - w[:, 0] ** 2 / (2.0 * p.theta2)
    if bank.shape[1] > 1:
        e = w[:, 1:] - nat.r * w[:, :-1]
        out = out - 0.5 * (bank.shape[1] - 1) * (LOG_2PI + math.log(nat.sigma2))
        out = out - np.einsum("ij,ij->i", e, e) / (2.0 * nat.sigma2)
    return out


def poisson_loglik_bank(bank: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Vectorized log pi(N* | Z) over a (J, T) bank, Poisson channel."""
    from scipy.special import gammaln

    bank = np.atleast_2d(np.asarray(bank, dtype=float))
    counts = np.asarray(counts, dtype=float)
    return np.sum(counts * bank - np.exp(bank) - gammaln(counts + 1.0), axis=1)
