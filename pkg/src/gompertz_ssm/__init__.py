"""Full-likelihood inference for the Gompertz population-dynamics model with
Poisson sampling error: a Gibbs posterior sampler, an MCMC-EM maximum
likelihood estimator, and a replicated simulation-study harness."""

from .diagnostics import (
    autocorrelation,
    credible_interval,
    effective_sample_size,
    mse_and_coverage,
    summarize_chain,
)
from .estimators import GibbsGompertzSampler, MonteCarloEMEstimator
from .gibbs import PosteriorChain, PriorHyper, gibbs_fit
from .harness import (
    MethodSettings,
    Scenario,
    StudySummary,
    aggregate_study,
    builtin_scenarios,
    run_replicate,
    run_study,
    scenario_by_id,
)
from .mcem import (
    McemConfig,
    MleFit,
    invert_moments,
    mcem_fit,
    method_of_moments,
    wald_intervals,
)
from .model import (
    ModelParams,
    NaturalParams,
    NoiseModel,
    ParameterError,
    complete_data_loglik,
    derive_natural_params,
    simulate_latent,
    simulate_observations,
    stationary_moments,
)

__all__ = [
    "GibbsGompertzSampler",
    "McemConfig",
    "MethodSettings",
    "MleFit",
    "ModelParams",
    "MonteCarloEMEstimator",
    "NaturalParams",
    "NoiseModel",
    "ParameterError",
    "PosteriorChain",
    "PriorHyper",
    "Scenario",
    "StudySummary",
    "aggregate_study",
    "autocorrelation",
    "builtin_scenarios",
    "complete_data_loglik",
    "credible_interval",
    "derive_natural_params",
    "effective_sample_size",
    "gibbs_fit",
    "invert_moments",
    "mcem_fit",
    "method_of_moments",
    "mse_and_coverage",
    "run_replicate",
    "run_study",
    "scenario_by_id",
    "simulate_latent",
    "simulate_observations",
    "stationary_moments",
    "summarize_chain",
    "wald_intervals",
]

__version__ = "0.1.0"
