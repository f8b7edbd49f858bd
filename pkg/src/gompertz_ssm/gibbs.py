"""Bayesian posterior sampling.

theta1 and theta2 have conjugate full conditionals under the
normal-inverse-gamma prior; b is updated from its conditional with theta1 and
theta2 integrated out analytically, sampled by accept-reject with the uniform
prior as proposal.  All quadratic forms in the AR(1) correlation matrix are
evaluated in closed form from sufficient statistics of the trajectory.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .latent import EnvelopeError, gibbs_sweep, sir_initialize
from .model import ModelParams, validate_counts

_B_EDGE = 1e-9  # open-interval guard for b in (-2, 0)
MAX_B_ATTEMPTS = 10 ** 6


@dataclass(frozen=True)
class PriorHyper:
    """Hyperparameters: theta2 ~ Inv.Gamma(phi1, phi2),
    theta1 | theta2 ~ N(eta1, eta2 * theta2), b ~ Uniform(-2, 0)."""

    phi1: float = 0.1
    phi2: float = 0.1
    eta1: float = 0.0
    eta2: float = 100.0

    def __post_init__(self):
        if not (self.phi1 > 0 and self.phi2 > 0 and self.eta2 > 0):
            raise ValueError("phi1, phi2 and eta2 must be positive")


@dataclass(frozen=True)
class BSuffStats:
    """Sufficient statistics of W_t = Z_t - eta1 needed for every quadratic
    form in the AR(1) correlation matrix."""

    T: int
    s1: float  # sum of all W_t
    s2: float  # sum of interior W_t (t = 2..T-1)
    q1: float  # sum of all W_t^2
    q2: float  # sum of interior W_t^2
    c: float  # sum of adjacent products W_t W_{t+1}

    @classmethod
    def from_latent(cls, z: np.ndarray, eta1: float) -> "BSuffStats":
        w = np.asarray(z, dtype=float) - eta1
        return cls(
            T=w.size,
            s1=float(w.sum()),
            s2=float(w[1:-1].sum()),
            q1=float(np.dot(w, w)),
            q2=float(np.dot(w[1:-1], w[1:-1])),
            c=float(np.dot(w[:-1], w[1:])),
        )


def ar1_quadratic_forms(stats: BSuffStats, r):
    """Closed forms for W'B^-1 W, W'B^-1 1, 1'B^-1 1 and log det B at lag-1
    coefficient r (scalar or array), |r| < 1."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) >= 1.0):
        raise ValueError("|r| must be < 1")
    one_m = 1.0 - r * r
    wBw = (r * r * stats.q2 - 2.0 * r * stats.c + stats.q1) / one_m
    wB1 = (stats.s1 - r * stats.s2) / (1.0 + r)
    oneB1 = (r * r * (stats.T - 2) - 2.0 * r * (stats.T - 1) + stats.T) / one_m
    logdetB = (stats.T - 1) * np.log(one_m)
    return wBw, wB1, oneB1, logdetB


def _log_marginal_b_stats(stats: BSuffStats, prior: PriorHyper, b):
    wBw, wB1, oneB1, logdetB = ar1_quadratic_forms(stats, np.asarray(b) + 1.0)
    denom = 1.0 + prior.eta2 * oneB1
    quad = wBw - prior.eta2 * wB1 ** 2 / denom
    return (
        -0.5 * logdetB
        - 0.5 * np.log(denom)
        - (prior.phi1 + stats.T / 2.0) * np.log1p(quad / (2.0 * prior.phi2))
    )


def log_marginal_b(b, z: np.ndarray, prior: PriorHyper):
    """Log conditional density of b given the trajectory, with theta1 and
    theta2 integrated out; up to an additive constant independent of b."""
    b_arr = np.asarray(b, dtype=float)
    if np.any(b_arr <= -2.0) or np.any(b_arr >= 0.0):
        raise ValueError("b must lie in the open interval (-2, 0)")
    stats = BSuffStats.from_latent(z, prior.eta1)
    out = _log_marginal_b_stats(stats, prior, b_arr)
    return float(out) if out.ndim == 0 else out


_GRID = np.round(np.arange(-1.99, 0.0, 0.01), 10)


def maximize_log_marginal_b(
    z: np.ndarray, prior: PriorHyper
) -> tuple[float, float]:
    """Grid search over b = -1.99, -1.98, ..., -0.01 followed by bounded 1-D
    refinement; returns (b_star, log density bound at b_star)."""
    stats = BSuffStats.from_latent(z, prior.eta1)
    return _maximize_from_stats(stats, prior)


def _log_marg_scalar(stats: BSuffStats, prior: PriorHyper, b: float) -> float:
    # scalar fast path of _log_marginal_b_stats for the inner optimizer and
    # the accept-reject loop
    r = 1.0 + b
    one_m = 1.0 - r * r
    wBw = (r * r * stats.q2 - 2.0 * r * stats.c + stats.q1) / one_m
    wB1 = (stats.s1 - r * stats.s2) / (1.0 + r)
    oneB1 = (r * r * (stats.T - 2) - 2.0 * r * (stats.T - 1) + stats.T) / one_m
    denom = 1.0 + prior.eta2 * oneB1
    quad = wBw - prior.eta2 * wB1 * wB1 / denom
    return (
        -0.5 * (stats.T - 1) * math.log(one_m)
        - 0.5 * math.log(denom)
        - (prior.phi1 + stats.T / 2.0) * math.log1p(quad / (2.0 * prior.phi2))
    )


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, tol: float = 1e-8):
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def _maximize_from_stats(stats: BSuffStats, prior: PriorHyper) -> tuple[float, float]:
    vals = _log_marginal_b_stats(stats, prior, _GRID)
    i = int(np.argmax(vals))
    lo = _GRID[i - 1] if i > 0 else -2.0 + _B_EDGE
    hi = _GRID[i + 1] if i < _GRID.size - 1 else -_B_EDGE
    b_star, val = _golden_max(lambda b: _log_marg_scalar(stats, prior, b), lo, hi)
    if val < vals[i]:  # refinement must not lose to the grid
        b_star, val = float(_GRID[i]), float(vals[i])
    return b_star, val


def sample_b(
    z: np.ndarray,
    prior: PriorHyper,
    rng: np.random.Generator,
    max_attempts: int = MAX_B_ATTEMPTS,
) -> float:
    """Exact draw from the marginalized conditional of b by accept-reject
    with the Uniform(-2, 0) prior as proposal."""
    stats = BSuffStats.from_latent(z, prior.eta1)
    return _sample_b_from_stats(stats, prior, rng, max_attempts)


def _sample_b_from_stats(stats, prior, rng, max_attempts=MAX_B_ATTEMPTS):
    _, log_bound = _maximize_from_stats(stats, prior)
    for _ in range(max_attempts):
        cand = rng.uniform(-2.0, 0.0)
        log_ratio = _log_marg_scalar(stats, prior, cand) - log_bound
        if log_ratio >= 0.0 or rng.random() < math.exp(log_ratio):
            return cand
    raise EnvelopeError("accept-reject for b exceeded the attempt budget")


def _posterior_quad(stats: BSuffStats, prior: PriorHyper, b: float):
    wBw, wB1, oneB1, _ = ar1_quadratic_forms(stats, 1.0 + b)
    denom = 1.0 + prior.eta2 * oneB1
    return wBw - prior.eta2 * wB1 ** 2 / denom, wB1, oneB1, denom


def sample_theta2(
    b: float, z: np.ndarray, prior: PriorHyper, rng: np.random.Generator
) -> float:
    """Inverse-gamma full-conditional draw for theta2 given (b, Z)."""
    stats = BSuffStats.from_latent(z, prior.eta1)
    quad, _, _, _ = _posterior_quad(stats, prior, b)
    shape = prior.phi1 + stats.T / 2.0
    scale = prior.phi2 + 0.5 * quad
    if not scale > 0.0:
        raise ValueError(f"nonpositive inverse-gamma scale {scale}")
    return scale / rng.gamma(shape)


def theta2_conditional(b: float, z: np.ndarray, prior: PriorHyper):
    """(shape, scale) of the inverse-gamma full conditional of theta2."""
    stats = BSuffStats.from_latent(z, prior.eta1)
    quad, _, _, _ = _posterior_quad(stats, prior, b)
    return prior.phi1 + stats.T / 2.0, prior.phi2 + 0.5 * quad


def theta1_conditional(theta2: float, b: float, z: np.ndarray, prior: PriorHyper):
    """(mean, variance) of the normal full conditional of theta1."""
    if not theta2 > 0.0:
        raise ValueError("theta2 must be positive")
    stats = BSuffStats.from_latent(z, prior.eta1)
    _, wB1, oneB1, _ = ar1_quadratic_forms(stats, 1.0 + b)
    # 1'B^-1 Z = W'B^-1 1 + eta1 * 1'B^-1 1
    oneBz = wB1 + prior.eta1 * oneB1
    denom = 1.0 + prior.eta2 * oneB1
    mean = (prior.eta1 + prior.eta2 * oneBz) / denom
    var = prior.eta2 * theta2 / denom
    return mean, var


def sample_theta1(
    theta2: float, b: float, z: np.ndarray, prior: PriorHyper, rng: np.random.Generator
) -> float:
    """Normal full-conditional draw for theta1 given (theta2, b, Z)."""
    mean, var = theta1_conditional(theta2, b, z, prior)
    return mean + math.sqrt(var) * rng.standard_normal()


@dataclass
class PosteriorChain:
    """Post-burn-in draws of (theta1, theta2, b), optional latent draws, and
    run metadata."""

    draws: np.ndarray  # shape (iterations, 3), columns theta1, theta2, b
    iterations: int
    burn_in: int
    wall_time: float
    seed: int | None = None
    latent: np.ndarray | None = None
    ess: dict = field(default_factory=dict)

    @property
    def theta1(self) -> np.ndarray:
        return self.draws[:, 0]

    @property
    def theta2(self) -> np.ndarray:
        return self.draws[:, 1]

    @property
    def b(self) -> np.ndarray:
        return self.draws[:, 2]


def _as_rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    seed = int(rng)
    return np.random.default_rng(seed), seed


def gibbs_fit(
    counts,
    prior: PriorHyper = PriorHyper(),
    iterations: int = 10_000,
    burn_in: int = 1_000,
    rng=0,
    init_params: ModelParams | None = None,
    sir_draws_n: int = 10_000,
    keep_latent: bool = False,
) -> PosteriorChain:
    """Run the full Gibbs sampler: per iteration a systematic latent sweep,
    then b, theta2, theta1 in that order.  Initialization is the moment
    estimator for the parameters and importance resampling for the latent
    trajectory."""
    from .mcem import method_of_moments

    counts = validate_counts(counts)
    generator, seed = _as_rng(rng)
    t0 = time.perf_counter()

    params = init_params if init_params is not None else method_of_moments(counts)
    try:
        z = sir_initialize(counts, params, generator, n_draws=sir_draws_n)
    except Exception as exc:
        raise RuntimeError(f"latent initialization failed: {exc}") from exc

    draws = np.empty((iterations, 3))
    latent = np.empty((iterations, counts.size)) if keep_latent else None
    theta1, theta2, b = params.theta1, params.theta2, params.b
    for k in range(burn_in + iterations):
        z = gibbs_sweep(z, counts, ModelParams(theta1, theta2, b), generator)
        stats = BSuffStats.from_latent(z, prior.eta1)
        b = _sample_b_from_stats(stats, prior, generator)
        quad, _, _, _ = _posterior_quad(stats, prior, b)
        theta2 = (prior.phi2 + 0.5 * quad) / generator.gamma(prior.phi1 + stats.T / 2.0)
        _, wB1, oneB1, _ = ar1_quadratic_forms(stats, 1.0 + b)
        denom = 1.0 + prior.eta2 * oneB1
        mean = (prior.eta1 + prior.eta2 * (wB1 + prior.eta1 * oneB1)) / denom
        theta1 = mean + math.sqrt(prior.eta2 * theta2 / denom) * generator.standard_normal()
        if k >= burn_in:
            draws[k - burn_in] = (theta1, theta2, b)
            if keep_latent:
                latent[k - burn_in] = z

    return PosteriorChain(
        draws=draws,
        iterations=iterations,
        burn_in=burn_in,
        wall_time=time.perf_counter() - t0,
        seed=seed,
        latent=latent,
    )
