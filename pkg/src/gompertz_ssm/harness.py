"""Scenario registry and replicated simulation studies with deterministic
seeding and an optional worker pool."""
from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gibbs as gibbs_mod
from . import mcem as mcem_mod
from .diagnostics import credible_interval, effective_sample_size, mse_and_coverage
from .model import ModelParams, NoiseModel, simulate_latent, simulate_observations

PARAM_NAMES = ("theta1", "theta2", "b")
METHOD_GIBBS = "Gibbs"
METHOD_MLE = "MLE"


@dataclass(frozen=True)
class Scenario:
    id: str
    true_params: ModelParams
    T: int
    noise: NoiseModel


def builtin_scenarios() -> list[Scenario]:
    """The eight study settings: moderate (b=-0.5) and high (b=-0.22) serial
    correlation at T in {30, 100}, under a correctly specified Poisson channel
    (S1-S4) and a misspecified negative-binomial channel (S5-S8)."""
    base = [
        ("S1", -0.5, 30, NoiseModel.POISSON),
        ("S2", -0.22, 30, NoiseModel.POISSON),
        ("S3", -0.5, 100, NoiseModel.POISSON),
        ("S4", -0.22, 100, NoiseModel.POISSON),
        ("S5", -0.5, 30, NoiseModel.NEG_BINOMIAL_HALF),
        ("S6", -0.22, 30, NoiseModel.NEG_BINOMIAL_HALF),
        ("S7", -0.5, 100, NoiseModel.NEG_BINOMIAL_HALF),
        ("S8", -0.22, 100, NoiseModel.NEG_BINOMIAL_HALF),
    ]
    return [
        Scenario(sid, ModelParams(theta1=2.0, theta2=0.22, b=b), T, noise)
        for sid, b, T, noise in base
    ]


def scenario_by_id(sid: str) -> Scenario:
    for s in builtin_scenarios():
        if s.id == sid:
            return s
    raise KeyError(f"unknown scenario {sid!r}")


def replicate_seed(master_seed: int, scenario_id: str, index: int, tag: str = "") -> int:
    """Stable 64-bit seed from SHA-256 of the replicate identity; independent
    of worker scheduling."""
    key = f"{master_seed}|{scenario_id}|{index}|{tag}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


@dataclass
class MethodSettings:
    """Desk-scale knobs for the per-replicate fits."""

    gibbs_iterations: int = 10_000
    gibbs_burn_in: int = 1_000
    prior: gibbs_mod.PriorHyper = field(default_factory=gibbs_mod.PriorHyper)
    mcem: mcem_mod.McemConfig = field(default_factory=mcem_mod.McemConfig)
    sir_draws: int = 10_000
    level: float = 0.95


@dataclass
class ReplicateResult:
    scenario_id: str
    index: int
    method: str
    estimates: dict  # param -> (point, low, high)
    wall_time: float
    ess: dict | None = None
    converged: bool = True
    error: str | None = None


def run_replicate(
    scenario: Scenario,
    index: int,
    methods=frozenset({METHOD_GIBBS, METHOD_MLE}),
    master_seed: int = 0,
    settings: MethodSettings | None = None,
) -> list[ReplicateResult]:
    """Simulate one dataset and fit each requested method; failures are
    recorded per method rather than raised."""
    settings = settings or MethodSettings()
    data_rng = np.random.default_rng(
        replicate_seed(master_seed, scenario.id, index, "data")
    )
    z = simulate_latent(scenario.true_params, scenario.T, data_rng)
    counts = simulate_observations(z, scenario.noise, data_rng)

    results: list[ReplicateResult] = []
    if METHOD_GIBBS in methods:
        results.append(_fit_gibbs(scenario, index, counts, master_seed, settings))
    if METHOD_MLE in methods:
        results.append(_fit_mle(scenario, index, counts, master_seed, settings))
    return results


def _fit_gibbs(scenario, index, counts, master_seed, settings) -> ReplicateResult:
    seed = replicate_seed(master_seed, scenario.id, index, "gibbs")
    try:
        chain = gibbs_mod.gibbs_fit(
            counts,
            prior=settings.prior,
            iterations=settings.gibbs_iterations,
            burn_in=settings.gibbs_burn_in,
            rng=seed,
            sir_draws_n=settings.sir_draws,
        )
        estimates, ess = {}, {}
        for i, name in enumerate(PARAM_NAMES):
            col = chain.draws[:, i]
            low, high = credible_interval(col, settings.level)
            estimates[name] = (float(col.mean()), low, high)
            ess[name] = effective_sample_size(col)
        return ReplicateResult(
            scenario.id, index, METHOD_GIBBS, estimates, chain.wall_time, ess=ess
        )
    except Exception as exc:  # replicate failures must not sink the study
        return ReplicateResult(
            scenario.id, index, METHOD_GIBBS, {}, 0.0, converged=False, error=str(exc)
        )


def _fit_mle(scenario, index, counts, master_seed, settings) -> ReplicateResult:
    seed = replicate_seed(master_seed, scenario.id, index, "mle")
    try:
        fit = mcem_mod.mcem_fit(counts, settings.mcem, rng=seed)
        intervals = mcem_mod.wald_intervals(fit, settings.level)
        point = (fit.params.theta1, fit.params.theta2, fit.params.b)
        estimates = {
            name: (float(point[i]), intervals[i][0], intervals[i][1])
            for i, name in enumerate(PARAM_NAMES)
        }
        return ReplicateResult(
            scenario.id,
            index,
            METHOD_MLE,
            estimates,
            fit.wall_time,
            converged=fit.converged,
        )
    except Exception as exc:
        return ReplicateResult(
            scenario.id, index, METHOD_MLE, {}, 0.0, converged=False, error=str(exc)
        )


@dataclass
class StudySummary:
    scenario_id: str
    n_reps: int
    metrics: dict  # method -> param -> {"mse", "coverage", "se_p5", "se_p95"}
    timing: dict  # method -> {"q1", "mean", "median", "q3"} (seconds)
    ess_per_sec: dict  # method -> param -> mean ESS per second (Gibbs only)
    failures: dict  # method -> count

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "n_reps": self.n_reps,
            "metrics": self.metrics,
            "timing": self.timing,
            "ess_per_sec": self.ess_per_sec,
            "failures": self.failures,
        }


def aggregate_study(
    results: list[ReplicateResult], truths: ModelParams
) -> StudySummary:
    """Per method and parameter: MSE, interval coverage and squared-error
    percentiles; per method: timing quartiles and mean ESS/sec."""
    if not results:
        raise ValueError("no replicate results to aggregate")
    truth_by_name = dict(zip(PARAM_NAMES, (truths.theta1, truths.theta2, truths.b)))
    metrics: dict = {}
    timing: dict = {}
    ess_per_sec: dict = {}
    failures: dict = {}
    for method in sorted({r.method for r in results}):
        rows = sorted(
            (r for r in results if r.method == method), key=lambda r: r.index
        )
        ok = [r for r in rows if r.error is None and r.estimates]
        failures[method] = len(rows) - len(ok)
        metrics[method] = {}
        for name in PARAM_NAMES:
            ests = [r.estimates[name] for r in ok]
            if not ests:
                continue
            truth = truth_by_name[name]
            mse, coverage = mse_and_coverage(ests, truth)
            sq = np.array([(e[0] - truth) ** 2 for e in ests])
            metrics[method][name] = {
                "mse": mse,
                "coverage": coverage,
                "se_p5": float(np.percentile(sq, 5)),
                "se_p95": float(np.percentile(sq, 95)),
            }
        times = np.array([r.wall_time for r in ok])
        if times.size:
            timing[method] = {
                "q1": float(np.percentile(times, 25)),
                "mean": float(times.mean()),
                "median": float(np.median(times)),
                "q3": float(np.percentile(times, 75)),
            }
        with_ess = [r for r in ok if r.ess]
        if with_ess:
            ess_per_sec[method] = {
                name: float(
                    np.mean([r.ess[name] / max(r.wall_time, 1e-9) for r in with_ess])
                )
                for name in PARAM_NAMES
            }
    sid = results[0].scenario_id
    n_reps = len({r.index for r in results})
    return StudySummary(sid, n_reps, metrics, timing, ess_per_sec, failures)


def _replicate_task(args):
    scenario, index, methods, master_seed, settings = args
    return run_replicate(scenario, index, methods, master_seed, settings)


def run_study(
    scenario: Scenario,
    n_reps: int = 500,
    methods=frozenset({METHOD_GIBBS, METHOD_MLE}),
    master_seed: int = 0,
    workers: int = 1,
    settings: MethodSettings | None = None,
) -> StudySummary:
    """Run the replicated study; results are a pure function of
    (scenario, n_reps, methods, master_seed) regardless of worker count."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    settings = settings or MethodSettings()
    tasks = [(scenario, i, methods, master_seed, settings) for i in range(n_reps)]
    if workers <= 1:
        nested = [_replicate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(_replicate_task, tasks))
    results = [r for group in nested for r in group]
    return aggregate_study(results, scenario.true_params)
