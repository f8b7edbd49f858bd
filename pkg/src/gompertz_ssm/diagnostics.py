"""Chain and study summaries: autocorrelation, effective sample size,
credible intervals, MSE and interval coverage."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def autocorrelation(chain, max_lag: int) -> np.ndarray:
    """Sample autocorrelation rho(0..max_lag) with the biased (1/n)
    autocovariance estimator."""
    x = np.asarray(chain, dtype=float)
    n = x.size
    if n <= max_lag:
        raise ValueError("chain must be longer than max_lag")
    d = x - x.mean()
    gamma0 = float(np.dot(d, d)) / n
    if gamma0 == 0.0:
        raise ValueError("constant chain has undefined autocorrelation")
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for k in range(1, max_lag + 1):
        rho[k] = float(np.dot(d[:-k], d[k:])) / n / gamma0
    return rho


def effective_sample_size(chain) -> float:
    """ESS = n / (1 + 2 sum rho(k)), with the sum truncated at the first
    nonpositive pair sum rho(2m-1) + rho(2m) and the result capped at n."""
    x = np.asarray(chain, dtype=float)
    n = x.size
    max_lag = min(n - 1, 2 * (n // 2) - 1) if n > 2 else 1
    rho = autocorrelation(x, max_lag)
    s = 0.0
    m = 1
    while 2 * m < rho.size:
        pair = rho[2 * m - 1] + rho[2 * m]
        if pair <= 0.0:
            break
        s += pair
        m += 1
    denom = 1.0 + 2.0 * s
    if denom <= 0.0:
        return float(n)
    return float(min(n, n / denom))


def credible_interval(chain, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed empirical quantile interval (linear-interpolation
    quantiles)."""
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must be in (0, 1), got {level}")
    x = np.asarray(chain, dtype=float)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def mse_and_coverage(
    estimates: list[tuple[float, float, float]], truth: float
) -> tuple[float, float]:
    """MSE of the point estimates and fraction of (low, high) intervals
    containing the truth."""
    if not estimates:
        raise ValueError("empty estimate list")
    pts = np.array([e[0] for e in estimates], dtype=float)
    lows = np.array([e[1] for e in estimates], dtype=float)
    highs = np.array([e[2] for e in estimates], dtype=float)
    mse = float(np.mean((pts - truth) ** 2))
    coverage = float(np.mean((lows <= truth) & (truth <= highs)))
    return mse, coverage


@dataclass
class ChainSummary:
    mean: float
    median: float
    sd: float
    q025: float
    q25: float
    q75: float
    q975: float
    ess: float
    acf: np.ndarray

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "sd": self.sd,
            "q2.5": self.q025,
            "q25": self.q25,
            "q75": self.q75,
            "q97.5": self.q975,
            "ess": self.ess,
            "acf": list(map(float, self.acf)),
        }


def summarize_chain(chain, max_lag: int = 40) -> ChainSummary:
    x = np.asarray(chain, dtype=float)
    max_lag = min(max_lag, x.size - 1)
    q = np.quantile(x, [0.025, 0.25, 0.5, 0.75, 0.975])
    return ChainSummary(
        mean=float(x.mean()),
        median=float(q[2]),
        sd=float(x.std(ddof=1)) if x.size > 1 else 0.0,
        q025=float(q[0]),
        q25=float(q[1]),
        q75=float(q[3]),
        q975=float(q[4]),
        ess=effective_sample_size(x) if x.std() > 0 else float(x.size),
        acf=autocorrelation(x, max_lag) if x.std() > 0 else np.ones(1),
    )
