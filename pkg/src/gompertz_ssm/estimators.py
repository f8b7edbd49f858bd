"""Scikit-learn style estimator wrappers around the two inference engines.

Both estimators consume a 1-D count series through ``fit`` and expose their
results as trailing-underscore attributes, so they compose with pipelines and
``get_params``/``set_params`` tooling.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .diagnostics import credible_interval, effective_sample_size
from .gibbs import PriorHyper, gibbs_fit
from .harness import PARAM_NAMES
from .mcem import McemConfig, mcem_fit, wald_intervals
from .model import validate_counts


def _as_series(X):
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    return validate_counts(arr)


class GibbsGompertzSampler(BaseEstimator):
    """Bayesian posterior sampler for the Gompertz count model.

    Parameters mirror the sampler knobs; after ``fit`` the posterior draws are
    in ``chain_`` (columns theta1, theta2, b) and point summaries in
    ``params_`` / ``intervals_`` / ``ess_``.
    """

    def __init__(
        self,
        iterations: int = 10_000,
        burn_in: int = 1_000,
        phi1: float = 0.1,
        phi2: float = 0.1,
        eta1: float = 0.0,
        eta2: float = 100.0,
        level: float = 0.95,
        sir_draws: int = 10_000,
        random_state: int = 0,
    ):
        self.iterations = iterations
        self.burn_in = burn_in
        self.phi1 = phi1
        self.phi2 = phi2
        self.eta1 = eta1
        self.eta2 = eta2
        self.level = level
        self.sir_draws = sir_draws
        self.random_state = random_state

    def fit(self, X, y=None):
        counts = _as_series(X)
        prior = PriorHyper(self.phi1, self.phi2, self.eta1, self.eta2)
        result = gibbs_fit(
            counts,
            prior=prior,
            iterations=self.iterations,
            burn_in=self.burn_in,
            rng=self.random_state,
            sir_draws_n=self.sir_draws,
        )
        self.chain_ = result.draws
        self.wall_time_ = result.wall_time
        self.params_ = {
            name: float(result.draws[:, i].mean())
            for i, name in enumerate(PARAM_NAMES)
        }
        self.intervals_ = {
            name: credible_interval(result.draws[:, i], self.level)
            for i, name in enumerate(PARAM_NAMES)
        }
        self.ess_ = {
            name: effective_sample_size(result.draws[:, i])
            for i, name in enumerate(PARAM_NAMES)
        }
        return self

    def predict(self, X=None):
        """Posterior-mean parameter vector (theta1, theta2, b)."""
        if not hasattr(self, "params_"):
            raise AttributeError("call fit before predict")
        return np.array([self.params_[name] for name in PARAM_NAMES])


class MonteCarloEMEstimator(BaseEstimator):
    """Maximum-likelihood estimator via MCMC-EM with Wald intervals."""

    def __init__(
        self,
        j_initial: int = 1_000,
        j_max: int = 20_000,
        max_iterations: int = 100,
        rel_tol: float = 1e-3,
        burn_in: int = 100,
        sir_draws: int = 10_000,
        level: float = 0.95,
        random_state: int = 0,
    ):
        self.j_initial = j_initial
        self.j_max = j_max
        self.max_iterations = max_iterations
        self.rel_tol = rel_tol
        self.burn_in = burn_in
        self.sir_draws = sir_draws
        self.level = level
        self.random_state = random_state

    def fit(self, X, y=None):
        counts = _as_series(X)
        cfg = McemConfig(
            j_initial=self.j_initial,
            j_max=self.j_max,
            max_iterations=self.max_iterations,
            rel_tol=self.rel_tol,
            burn_in=self.burn_in,
            sir_draws=self.sir_draws,
        )
        result = mcem_fit(counts, cfg, rng=self.random_state)
        self.result_ = result
        self.params_ = {
            "theta1": result.params.theta1,
            "theta2": result.params.theta2,
            "b": result.params.b,
        }
        self.covariance_ = result.covariance
        ivals = wald_intervals(result, self.level)
        self.intervals_ = dict(zip(PARAM_NAMES, ivals))
        self.converged_ = result.converged
        return self

    def predict(self, X=None):
        """MLE parameter vector (theta1, theta2, b)."""
        if not hasattr(self, "params_"):
            raise AttributeError("call fit before predict")
        return np.array([self.params_[name] for name in PARAM_NAMES])
