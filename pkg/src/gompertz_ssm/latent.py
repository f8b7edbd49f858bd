"""Sampling the latent log-abundances from their full conditionals.

Each site's full conditional is the product of a Poisson term and a Gaussian
term; it is sampled exactly by accept-reject from a Gaussian proposal whose
mean is chosen through the Lambert W function so that the envelope constant
is minimal (for proposal variance equal to the conditional variance).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lambertw import lambert_w0_from_log, lambert_w0_from_log_vec
from .model import (
    ModelParams,
    complete_data_loglik_bank,
    poisson_loglik_bank,
    validate_counts,
)

MAX_ATTEMPTS = 10 ** 6


class EnvelopeError(RuntimeError):
    """Raised when accept-reject exceeds the attempt budget; since the
    envelope is provably valid this signals a numerical bug."""


@dataclass(frozen=True)
class FullConditional:
    """Gaussian part (mu, tau2) of one site's full conditional together with
    the observed count at that site."""

    mu: float
    tau2: float
    n_obs: int

    def __post_init__(self):
        if not (self.tau2 > 0.0):
            raise ValueError(f"tau2 must be positive, got {self.tau2}")
        if self.n_obs < 0:
            raise ValueError(f"count must be nonnegative, got {self.n_obs}")


@dataclass(frozen=True)
class Proposal:
    """Optimal Gaussian proposal for one site: mean xi, variance omega2
    (equal to the conditional variance), envelope maximizer z_hat and the
    log of the envelope constant."""

    xi: float
    omega2: float
    z_hat: float
    log_bound: float


def full_conditional(
    t: int, z: np.ndarray, counts: np.ndarray, p: ModelParams
) -> FullConditional:
    """Gaussian mean/variance of site t's full conditional (0-based index).

    Boundary sites condition on a single neighbor; interior sites on both.
    """
    T = len(z)
    if not (0 <= t < T):
        raise IndexError(f"site index {t} out of range for length {T}")
    nat = p.natural()
    a, r, s2 = nat.a, nat.r, nat.sigma2
    if t == 0:
        mu, tau2 = _first_site_conditional(z[1], p.theta1, p.theta2, a, r, s2)
    elif t == T - 1:
        mu = a + r * z[T - 2]
        tau2 = s2
    else:
        mu = (a + r * (z[t + 1] + z[t - 1] - a)) / (1.0 + r * r)
        tau2 = s2 / (1.0 + r * r)
    return FullConditional(mu=float(mu), tau2=float(tau2), n_obs=int(counts[t]))


def _first_site_conditional(z2, theta1, theta2, a, r, s2):
    # Exact Gaussian conditioning of Z_1 ~ N(theta1, theta2) on
    # Z_2 | Z_1 ~ N(a + r Z_1, sigma2).
    denom = s2 + r * r * theta2
    mu = (theta1 * s2 + (z2 - a) * r * theta2) / denom
    tau2 = s2 * theta2 / denom
    return mu, tau2


def log_target(z, fc: FullConditional):
    """Unnormalized log full-conditional density at z (strictly concave)."""
    z = np.asarray(z, dtype=float)
    val = z * fc.n_obs - np.exp(z) - (z - fc.mu) ** 2 / (2.0 * fc.tau2)
    return float(val) if val.ndim == 0 else val


def optimal_proposal(fc: FullConditional) -> Proposal:
    """Proposal mean via the Lambert W fixed point; variance tied to tau2."""
    s = fc.n_obs * fc.tau2 + fc.mu
    w = lambert_w0_from_log(math.log(fc.tau2) + s)
    xi = s - w
    # analytically z_hat == xi; the log form is kept as the defining expression
    z_hat = math.log(w / fc.tau2) if w > 0.0 else xi
    log_bound = (
        z_hat * fc.n_obs
        + ((z_hat - xi) ** 2 - (z_hat - fc.mu) ** 2) / (2.0 * fc.tau2)
        - w / fc.tau2
    )
    return Proposal(xi=xi, omega2=fc.tau2, z_hat=z_hat, log_bound=log_bound)


def sample_site(
    fc: FullConditional,
    prop: Proposal,
    rng: np.random.Generator,
    max_attempts: int = MAX_ATTEMPTS,
) -> tuple[float, int]:
    """Exact draw from the normalized full conditional; returns (z, attempts)."""
    mu, tau2, n_obs = fc.mu, fc.tau2, fc.n_obs
    xi, log_bound = prop.xi, prop.log_bound
    sd = math.sqrt(tau2)
    inv2t = 1.0 / (2.0 * tau2)
    for attempt in range(1, max_attempts + 1):
        zc = xi + sd * rng.standard_normal()
        # log h(zc) = log target - log proposal kernel
        log_ratio = (
            zc * n_obs
            - math.exp(zc)
            + ((zc - xi) ** 2 - (zc - mu) ** 2) * inv2t
            - log_bound
        )
        if log_ratio >= 0.0 or rng.random() < math.exp(log_ratio):
            return zc, attempt
    raise EnvelopeError(
        f"accept-reject failed after {max_attempts} attempts (mu={mu}, "
        f"tau2={tau2}, n={n_obs})"
    )


def _sample_sites_vec(
    mu: np.ndarray,
    tau2: float,
    n_obs: int,
    rng: np.random.Generator,
    max_rounds: int = 10 ** 4,
) -> np.ndarray:
    """Vectorized accept-reject for many sites sharing (tau2, n_obs) but with
    differing Gaussian means. Returns one exact draw per entry of mu."""
    mu = np.asarray(mu, dtype=float)
    s = n_obs * tau2 + mu
    w = lambert_w0_from_log_vec(math.log(tau2) + s)
    xi = s - w
    log_bound = xi * n_obs - (xi - mu) ** 2 / (2.0 * tau2) - w / tau2
    out = np.empty_like(mu)
    pending = np.arange(mu.size)
    sd = math.sqrt(tau2)
    inv2t = 1.0 / (2.0 * tau2)
    for _ in range(max_rounds):
        k = pending.size
        zc = xi[pending] + sd * rng.standard_normal(k)
        m = mu[pending]
        log_ratio = (
            zc * n_obs
            - np.exp(zc)
            + ((zc - xi[pending]) ** 2 - (zc - m) ** 2) * inv2t
            - log_bound[pending]
        )
        acc = np.log(rng.random(k) + 1e-300) < log_ratio
        out[pending[acc]] = zc[acc]
        pending = pending[~acc]
        if pending.size == 0:
            return out
    raise EnvelopeError("vectorized accept-reject failed to terminate")


def gibbs_sweep(
    z: np.ndarray, counts: np.ndarray, p: ModelParams, rng: np.random.Generator
) -> np.ndarray:
    """One systematic-scan sweep t = 1..T of exact full-conditional draws."""
    T = len(z)
    if len(counts) != T:
        raise ValueError("trajectory and count series lengths differ")
    out = np.array(z, dtype=float, copy=True)
    nat = p.natural()
    a, r, s2 = nat.a, nat.r, nat.sigma2
    tau2_int = s2 / (1.0 + r * r)
    for t in range(T):
        if t == 0:
            mu, tau2 = _first_site_conditional(out[1], p.theta1, p.theta2, a, r, s2)
        elif t == T - 1:
            mu, tau2 = a + r * out[T - 2], s2
        else:
            mu, tau2 = (a + r * (out[t + 1] + out[t - 1] - a)) / (1.0 + r * r), tau2_int
        fc = FullConditional(mu=float(mu), tau2=tau2, n_obs=int(counts[t]))
        out[t], _ = sample_site(fc, optimal_proposal(fc), rng)
    return out


def _gauss_hermite_log_norm(mu, tau2, n_obs, xi, n_nodes=40):
    """Log normalizing constant of exp(log_target) per site, via Gauss-Hermite
    quadrature centered at the mode xi with scale matched to the curvature of
    the log target there."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    # integral exp(l(z)) dz with z = xi + sd * x, standard-normal-weight rule;
    # -l''(xi) = 1/tau2 + exp(xi), the matched Laplace scale
    sd = 1.0 / np.sqrt(1.0 / tau2 + np.exp(np.minimum(xi, 700.0)))
    zg = xi[:, None] + sd[:, None] * nodes[None, :]
    logf = (
        zg * n_obs
        - np.exp(zg)
        - (zg - mu[:, None]) ** 2 / (2.0 * tau2)
        + nodes[None, :] ** 2 / 2.0
    )
    logw = np.log(weights)[None, :] + logf
    m = np.max(logw, axis=1)
    return m + np.log(np.sum(np.exp(logw - m[:, None]), axis=1)) + np.log(sd)


def sir_draws(
    counts: np.ndarray,
    p: ModelParams,
    n_draws: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw trajectories from the forward importance density (each site's full
    conditional with the right neighbor pinned at log of its count) and return
    (draws, normalized weights)."""
    counts = validate_counts(counts)
    T = counts.size
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    nat = p.natural()
    a, r, s2 = nat.a, nat.r, nat.sigma2
    # pinned neighbor values; zero counts get a continuity correction
    pinned = np.where(counts >= 1, counts, counts + 0.5).astype(float)
    log_pinned = np.log(pinned)

    draws = np.empty((n_draws, T))
    log_q = np.zeros(n_draws)
    for t in range(T):
        if t == 0:
            mu_s, tau2 = _first_site_conditional(
                log_pinned[1], p.theta1, p.theta2, a, r, s2
            )
            mu = np.full(n_draws, mu_s)
        elif t == T - 1:
            mu = a + r * draws[:, T - 2]
            tau2 = s2
        else:
            mu = (a + r * (log_pinned[t + 1] + draws[:, t - 1] - a)) / (1.0 + r * r)
            tau2 = s2 / (1.0 + r * r)
        n_obs = int(counts[t])
        zt = _sample_sites_vec(mu, tau2, n_obs, rng)
        draws[:, t] = zt
        s = n_obs * tau2 + mu
        xi = s - lambert_w0_from_log_vec(math.log(tau2) + s)
        log_c = _gauss_hermite_log_norm(mu, tau2, n_obs, xi)
        log_q += zt * n_obs - np.exp(zt) - (zt - mu) ** 2 / (2.0 * tau2) - log_c

    log_w = (
        poisson_loglik_bank(draws, counts)
        + complete_data_loglik_bank(draws, p)
        - log_q
    )
    m = np.max(log_w)
    if not np.isfinite(m):
        raise RuntimeError("all SIR importance weights underflowed")
    w = np.exp(log_w - m)
    return draws, w / w.sum()


def sir_initialize(
    counts: np.ndarray,
    p: ModelParams,
    rng: np.random.Generator,
    n_draws: int = 10_000,
) -> np.ndarray:
    """Sampling-importance-resampling initializer for the latent trajectory."""
    draws, weights = sir_draws(counts, p, n_draws, rng)
    idx = rng.choice(n_draws, p=weights)
    return draws[idx]
