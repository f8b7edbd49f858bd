"""Frequentist estimation by Markov chain Monte Carlo EM.

The E-step replaces the conditional expectation of the complete-data
log-likelihood with a Monte Carlo average over Gibbs draws of the latent
trajectory; the M-step maximizes that average in a transformed unconstrained
space.  The Monte Carlo sample size J grows (doubling, capped) whenever the
estimated ascent is not statistically distinguishable from zero, and the
asymptotic covariance comes from the missing-information identity evaluated
on the final latent bank.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .latent import gibbs_sweep, sir_initialize
from .model import (
    ModelParams,
    ParameterError,
    complete_data_loglik_bank,
    validate_counts,
)

_B_LO = -2.0 + 1e-3
_B_HI = -1e-3
_THETA2_FLOOR = 1e-6


def invert_moments(mean: float, variance: float, lag1_cov: float) -> ModelParams:
    """Exact inverse of the stationary moment map (mean, variance, lag-1
    autocovariance) -> (theta1, theta2, b), clamped into the valid region
    when the moments fall outside its image."""
    if not mean > 0.0:
        raise ValueError(f"mean must be positive, got {mean}")
    if not variance > 0.0:
        raise ValueError(f"variance must be positive, got {variance}")
    theta2 = max(math.log1p(variance / (mean * mean)), _THETA2_FLOOR)
    theta1 = math.log(mean) - theta2 / 2.0
    ratio = lag1_cov / (mean * mean)
    if ratio <= -1.0:
        one_plus_b = -math.inf
    else:
        one_plus_b = math.log1p(ratio) / theta2
    b = min(max(one_plus_b - 1.0, _B_LO), _B_HI)
    return ModelParams(theta1=theta1, theta2=theta2, b=b)


def method_of_moments(counts) -> ModelParams:
    """Moment-matching starting values from the sample mean, variance and
    lag-1 autocovariance of the counts, clamped into the valid region."""
    counts = validate_counts(counts)
    x = counts.astype(float)
    m = x.mean()
    if m == 0.0:
        raise ValueError("all-zero count series")
    v = x.var()
    if v == 0.0:
        raise ValueError("constant count series has no moment information")
    d = x - m
    c1 = float(np.dot(d[:-1], d[1:])) / x.size
    return invert_moments(m, v, c1)


@dataclass
class McemConfig:
    j_initial: int = 1000
    j_max: int = 20_000
    max_iterations: int = 100
    rel_tol: float = 1e-3
    ascent_alpha: float = 0.25
    thinning: int = 1
    burn_in: int = 100  # Gibbs warm-up sweeps at the start of each E-step
    sir_draws: int = 10_000

    def __post_init__(self):
        if self.j_initial > self.j_max:
            raise ValueError("j_initial must not exceed j_max")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if not (0 < self.ascent_alpha < 1):
            raise ValueError("ascent_alpha must be in (0, 1)")


@dataclass
class IterationRecord:
    iteration: int
    j: int
    q_new: float
    q_old: float
    mc_sd: float
    accepted: bool
    theta: tuple


@dataclass
class MleFit:
    params: ModelParams
    covariance: np.ndarray  # 3x3, order (theta1, theta2, b)
    iterations: int
    wall_time: float
    converged: bool
    trace: list[IterationRecord] = field(default_factory=list)
    final_j: int = 0


def monte_carlo_e_step(
    z: np.ndarray,
    counts: np.ndarray,
    params: ModelParams,
    j: int,
    rng: np.random.Generator,
    burn_in: int = 100,
    thinning: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the latent Gibbs chain at the current parameters and collect a bank
    of J trajectories (after burn-in, spaced by the thinning knob).  Returns
    (bank, final state) so the next E-step can warm-start."""
    if j < 1:
        raise ValueError("bank size must be >= 1")
    for _ in range(burn_in):
        z = gibbs_sweep(z, counts, params, rng)
    bank = np.empty((j, len(z)))
    for i in range(j):
        for _ in range(thinning):
            z = gibbs_sweep(z, counts, params, rng)
        bank[i] = z
    return bank, z


@dataclass(frozen=True)
class _BankStats:
    """Bank-averaged sufficient statistics for the AR(1) complete-data
    objective: averages of z1, z1^2, tail/head sums and adjacent products."""

    T: int
    z1: float
    z1_sq: float
    s_tail: float  # mean of sum_{t>=2} z_t
    q_tail: float
    s_head: float  # mean of sum_{t<=T-1} z_t
    q_head: float
    cross: float  # mean of sum z_t z_{t+1}

    @classmethod
    def from_bank(cls, bank: np.ndarray) -> "_BankStats":
        bank = np.atleast_2d(np.asarray(bank, dtype=float))
        sq = bank * bank
        return cls(
            T=bank.shape[1],
            z1=float(bank[:, 0].mean()),
            z1_sq=float(sq[:, 0].mean()),
            s_tail=float(bank[:, 1:].sum(axis=1).mean()),
            q_tail=float(sq[:, 1:].sum(axis=1).mean()),
            s_head=float(bank[:, :-1].sum(axis=1).mean()),
            q_head=float(sq[:, :-1].sum(axis=1).mean()),
            cross=float((bank[:, 1:] * bank[:, :-1]).sum(axis=1).mean()),
        )


def _objective_from_stats(st: _BankStats, theta1, theta2, b) -> float:
    """Bank-averaged complete-data log-likelihood, O(1) given the statistics."""
    r = 1.0 + b
    sigma2 = theta2 * (1.0 - r * r)
    n1 = st.T - 1
    sq_first = st.z1_sq - 2.0 * theta1 * st.z1 + theta1 * theta1
    # sum (z_t - theta1)^2 over tail/head and the centered cross term
    a2 = st.q_tail - 2.0 * theta1 * st.s_tail + n1 * theta1 * theta1
    b2 = st.q_head - 2.0 * theta1 * st.s_head + n1 * theta1 * theta1
    cx = st.cross - theta1 * (st.s_tail + st.s_head) + n1 * theta1 * theta1
    ssq = a2 - 2.0 * r * cx + r * r * b2
    out = -0.5 * (math.log(2.0 * math.pi * theta2)) - sq_first / (2.0 * theta2)
    out += -0.5 * n1 * math.log(2.0 * math.pi * sigma2) - ssq / (2.0 * sigma2)
    return out


def _to_unconstrained(p: ModelParams) -> np.ndarray:
    frac = (p.b + 2.0) / 2.0
    return np.array([p.theta1, math.log(p.theta2), math.log(frac / (1.0 - frac))])


def _from_unconstrained(u: np.ndarray) -> ModelParams:
    b = 2.0 / (1.0 + math.exp(-min(max(u[2], -500.0), 500.0))) - 2.0
    b = min(max(b, -2.0 + 1e-12), -1e-12)
    log_t2 = min(max(u[1], -690.0), 690.0)
    return ModelParams(theta1=float(u[0]), theta2=math.exp(log_t2), b=b)


def m_step(bank: np.ndarray, theta_init: ModelParams) -> ModelParams:
    """Maximize the bank-averaged complete-data log-likelihood, started at the
    current iterate; the transformed space makes the constraints implicit."""
    bank = np.atleast_2d(np.asarray(bank, dtype=float))
    if bank.size == 0:
        raise ValueError("empty latent bank")
    st = _BankStats.from_bank(bank)

    def neg(u):
        p = _from_unconstrained(u)
        return -_objective_from_stats(st, p.theta1, p.theta2, p.b)

    u0 = _to_unconstrained(theta_init)
    best = None
    for start in (u0, u0 + np.array([0.0, 0.1, 0.2]), u0 - np.array([0.0, 0.1, 0.2])):
        res = minimize(neg, start, method="L-BFGS-B")
        if best is None or res.fun < best.fun:
            best = res
        if res.success and -res.fun >= -neg(u0) - 1e-9:
            break
    if best is None or not np.all(np.isfinite(best.x)):
        raise RuntimeError("M-step optimizer failed after restarts")
    out = _from_unconstrained(best.x)
    if -best.fun < -neg(u0):  # never move downhill
        return theta_init
    return out


def ascent_check(q_old: float, q_new: float, mc_sd: float, alpha: float = 0.25) -> str:
    """One-sided lower-confidence-bound ascent test: 'accept' when the
    (1 - alpha) lower bound of the estimated gain is positive, else 'grow'."""
    if mc_sd < 0:
        raise ValueError("mc_sd must be nonnegative")
    lcb = (q_new - q_old) - norm.ppf(1.0 - alpha) * mc_sd
    return "accept" if lcb > 0.0 else "grow"


def complete_data_score_bank(bank: np.ndarray, p: ModelParams) -> np.ndarray:
    """Analytic per-trajectory gradient of the complete-data log-likelihood
    with respect to (theta1, theta2, b); shape (J, 3)."""
    bank = np.atleast_2d(np.asarray(bank, dtype=float))
    T = bank.shape[1]
    r = 1.0 + p.b
    theta2 = p.theta2
    one_m = 1.0 - r * r
    sigma2 = theta2 * one_m
    w = bank - p.theta1
    e = w[:, 1:] - r * w[:, :-1]
    se = e.sum(axis=1)
    se2 = np.einsum("ij,ij->i", e, e)
    sew = np.einsum("ij,ij->i", e, w[:, :-1])

    g1 = w[:, 0] / theta2 + se / (theta2 * (1.0 + r))
    g2 = (
        -0.5 / theta2
        + w[:, 0] ** 2 / (2.0 * theta2 ** 2)
        - 0.5 * (T - 1) / theta2
        + se2 / (2.0 * theta2 ** 2 * one_m)
    )
    g3 = (T - 1) * r / one_m + sew / sigma2 - r * se2 / (theta2 * one_m ** 2)
    return np.stack([g1, g2, g3], axis=1)


def louis_information(
    bank: np.ndarray, theta_hat: ModelParams, counts=None
) -> np.ndarray:
    """Asymptotic covariance of the MLE from the missing-information identity:
    observed information = mean complete-data information minus the variance
    of the complete-data score over the latent bank; returns its inverse.

    The per-trajectory Hessian is obtained by central differences of the
    analytic score.
    """
    bank = np.atleast_2d(np.asarray(bank, dtype=float))
    scores = complete_data_score_bank(bank, theta_hat)
    theta = np.array([theta_hat.theta1, theta_hat.theta2, theta_hat.b])

    mean_hess = np.zeros((3, 3))
    for i in range(3):
        h = 1e-6 * max(abs(theta[i]), 1.0)
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        gu = complete_data_score_bank(bank, ModelParams(*up)).mean(axis=0)
        gd = complete_data_score_bank(bank, ModelParams(*dn)).mean(axis=0)
        mean_hess[:, i] = (gu - gd) / (2.0 * h)
    mean_hess = 0.5 * (mean_hess + mean_hess.T)

    score_cov = np.cov(scores, rowvar=False, bias=True)
    info = -mean_hess - score_cov
    info = 0.5 * (info + info.T)
    eigvals = np.linalg.eigvalsh(info)
    if np.min(eigvals) <= 0.0:
        warnings.warn(
            "observed information is not positive definite; using pseudo-inverse",
            RuntimeWarning,
        )
        cov = np.linalg.pinv(info)
    else:
        cov = np.linalg.inv(info)
    return 0.5 * (cov + cov.T)


def wald_intervals(fit: MleFit, level: float = 0.95) -> list[tuple[float, float]]:
    """Per-parameter normal-approximation intervals from the fit covariance."""
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must be in (0, 1), got {level}")
    zq = norm.ppf((1.0 + level) / 2.0)
    point = np.array([fit.params.theta1, fit.params.theta2, fit.params.b])
    sd = np.sqrt(np.maximum(np.diag(fit.covariance), 0.0))
    return [(float(p - zq * s), float(p + zq * s)) for p, s in zip(point, sd)]


def _rel_change(old: ModelParams, new: ModelParams) -> float:
    o = np.array([old.theta1, old.theta2, old.b])
    n = np.array([new.theta1, new.theta2, new.b])
    return float(np.max(np.abs(n - o) / (np.abs(o) + 1e-8)))


def mcem_fit(counts, cfg: McemConfig = McemConfig(), rng=0) -> MleFit:
    """Full MCMC-EM loop: moment start, SIR latent start, E/M cycling with the
    sample-size growth rule, and the Louis covariance at the final iterate."""
    counts = validate_counts(counts)
    if isinstance(rng, np.random.Generator):
        generator = rng
    else:
        generator = np.random.default_rng(int(rng))
    t0 = time.perf_counter()

    theta = method_of_moments(counts)
    z = sir_initialize(counts, theta, generator, n_draws=cfg.sir_draws)
    j = cfg.j_initial
    trace: list[IterationRecord] = []
    converged = False
    small_steps = 0
    bank = None

    for it in range(1, cfg.max_iterations + 1):
        bank, z = monte_carlo_e_step(
            z, counts, theta, j, generator, burn_in=cfg.burn_in, thinning=cfg.thinning
        )
        theta_new = m_step(bank, theta)
        ll_new = complete_data_loglik_bank(bank, theta_new)
        ll_old = complete_data_loglik_bank(bank, theta)
        diffs = ll_new - ll_old
        q_new, q_old = float(ll_new.mean()), float(ll_old.mean())
        mc_sd = float(diffs.std(ddof=1) / math.sqrt(j)) if j > 1 else 0.0
        decision = ascent_check(q_old, q_new, mc_sd, cfg.ascent_alpha)

        grow_possible = j < cfg.j_max
        accepted = decision == "accept" or not grow_possible
        trace.append(
            IterationRecord(
                iteration=it,
                j=j,
                q_new=q_new,
                q_old=q_old,
                mc_sd=mc_sd,
                accepted=accepted,
                theta=(theta_new.theta1, theta_new.theta2, theta_new.b),
            )
        )
        if not accepted:
            j = min(2 * j, cfg.j_max)
            continue
        rel = _rel_change(theta, theta_new)
        theta = theta_new
        small_steps = small_steps + 1 if rel < cfg.rel_tol else 0
        if small_steps >= 2:
            converged = True
            break

    covariance = louis_information(bank, theta, counts)
    return MleFit(
        params=theta,
        covariance=covariance,
        iterations=len(trace),
        wall_time=time.perf_counter() - t0,
        converged=converged,
        trace=trace,
        final_j=j,
    )
