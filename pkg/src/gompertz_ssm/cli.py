"""Command-line front end.

Subcommands: simulate, fit-bayes, fit-mle, study, diagnose.  Every run with a
fixed seed is bit-reproducible in its numeric output files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io as io_mod
from .diagnostics import autocorrelation, credible_interval, effective_sample_size
from .gibbs import PriorHyper, gibbs_fit
from .harness import (
    METHOD_GIBBS,
    METHOD_MLE,
    MethodSettings,
    PARAM_NAMES,
    run_study,
    scenario_by_id,
)
from .mcem import McemConfig, mcem_fit, wald_intervals
from .model import ModelParams, NoiseModel, simulate_latent, simulate_observations

DEFAULT_CONFIG_ENV = "GOMPERTZ_SSM_CONFIG"

_DEFAULTS = {
    "phi1": 0.1,
    "phi2": 0.1,
    "eta1": 0.0,
    "eta2": 100.0,
    "iterations": 10_000,
    "burnin": 1_000,
    "j_initial": 1_000,
    "j_max": 20_000,
    "max_em_iterations": 100,
    "rel_tol": 1e-3,
    "sir_draws": 10_000,
}


def _load_config(path: str | None) -> dict:
    cfg = dict(_DEFAULTS)
    if path is None:
        path = os.environ.get(DEFAULT_CONFIG_ENV)
    if path:
        with open(path) as fh:
            user = json.load(fh)
        unknown = set(user) - set(_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    return cfg


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument("--config", help="JSON config file with default knobs")
    parser.add_argument("--output", required=True, help="output file path")
    parser.add_argument(
        "--format", choices=["json", "csv"], default="json", dest="fmt",
        help="format for summary output",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gompertz-ssm",
        description=(
            "Inference for the Gompertz population model with Poisson "
            "sampling error"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a count series to CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", help="builtin scenario id (S1..S8)")
    group.add_argument("--theta1", type=float)
    p.add_argument("--theta2", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--T", type=int)
    p.add_argument(
        "--noise", choices=[n.value for n in NoiseModel], default="poisson"
    )
    _add_common(p)

    p = sub.add_parser("fit-bayes", help="Gibbs posterior sampling for a series")
    p.add_argument("series", help="input series CSV (label,count)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--summary", help="summary JSON path (default: <output>.json)")
    _add_common(p)

    p = sub.add_parser("fit-mle", help="MCMC-EM maximum likelihood for a series")
    p.add_argument("series")
    p.add_argument("--iterations", type=int, help="EM iteration cap")
    _add_common(p)

    p = sub.add_parser("study", help="replicated simulation study")
    p.add_argument("--scenario", required=True)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument(
        "--methods", default="gibbs,mle", help="comma list from {gibbs,mle}"
    )
    p.add_argument("--iterations", type=int, help="Gibbs chain length per replicate")
    p.add_argument("--burnin", type=int)
    p.add_argument("--plot-data", help="prefix for tidy plot-data CSV files")
    _add_common(p)

    p = sub.add_parser("diagnose", help="ACF/ESS/interval summary of a chain CSV")
    p.add_argument("chain")
    p.add_argument("--max-lag", type=int, default=40)
    p.add_argument("--level", type=float, default=0.95)
    _add_common(p)

    return parser


def _cmd_simulate(args, cfg) -> int:
    rng = np.random.default_rng(args.seed)
    if args.scenario:
        sc = scenario_by_id(args.scenario)
        params, T, noise = sc.true_params, sc.T, sc.noise
    else:
        missing = [k for k in ("theta2", "b", "T") if getattr(args, k) is None]
        if missing:
            raise ValueError(f"explicit simulation needs --{', --'.join(missing)}")
        params = ModelParams(args.theta1, args.theta2, args.b)
        T, noise = args.T, NoiseModel(args.noise)
    z = simulate_latent(params, T, rng)
    counts = simulate_observations(z, noise, rng)
    io_mod.write_series_csv(args.output, counts)
    return 0


def _prior_from_cfg(cfg) -> PriorHyper:
    return PriorHyper(cfg["phi1"], cfg["phi2"], cfg["eta1"], cfg["eta2"])


def _cmd_fit_bayes(args, cfg) -> int:
    counts, _ = io_mod.load_series_csv(args.series)
    iterations = args.iterations or cfg["iterations"]
    burn_in = args.burnin if args.burnin is not None else cfg["burnin"]
    chain = gibbs_fit(
        counts,
        prior=_prior_from_cfg(cfg),
        iterations=iterations,
        burn_in=burn_in,
        rng=args.seed,
        sir_draws_n=cfg["sir_draws"],
    )
    io_mod.write_chain_csv(args.output, chain)
    summary_path = args.summary or (args.output + ".json")
    # wall-clock numbers are hardware dependent; they go to a sidecar so the
    # primary outputs are byte-identical across reruns with the same seed
    io_mod.write_json(summary_path + ".timing.json", {"wall_time_sec": chain.wall_time})
    payload = {
        "method": METHOD_GIBBS,
        "iterations": iterations,
        "burn_in": burn_in,
        "seed": args.seed,
        "parameters": {},
    }
    for i, name in enumerate(PARAM_NAMES):
        col = chain.draws[:, i]
        low, high = credible_interval(col)
        payload["parameters"][name] = {
            "mean": float(col.mean()),
            "low": low,
            "high": high,
            "ess": effective_sample_size(col),
        }
    io_mod.write_json(summary_path, payload)
    return 0


def _cmd_fit_mle(args, cfg) -> int:
    counts, _ = io_mod.load_series_csv(args.series)
    mc = McemConfig(
        j_initial=cfg["j_initial"],
        j_max=cfg["j_max"],
        max_iterations=args.iterations or cfg["max_em_iterations"],
        rel_tol=cfg["rel_tol"],
        sir_draws=cfg["sir_draws"],
    )
    fit = mcem_fit(counts, mc, rng=args.seed)
    intervals = wald_intervals(fit)
    point = (fit.params.theta1, fit.params.theta2, fit.params.b)
    io_mod.write_json(args.output + ".timing.json", {"wall_time_sec": fit.wall_time})
    payload = {
        "method": METHOD_MLE,
        "seed": args.seed,
        "converged": fit.converged,
        "em_iterations": fit.iterations,
        "final_j": fit.final_j,
        "estimates": {
            name: {
                "point": float(point[i]),
                "low": intervals[i][0],
                "high": intervals[i][1],
            }
            for i, name in enumerate(PARAM_NAMES)
        },
        "covariance": [[float(v) for v in row] for row in fit.covariance],
    }
    io_mod.write_json(args.output, payload)
    return 0


def _cmd_study(args, cfg) -> int:
    scenario = scenario_by_id(args.scenario)
    methods = set()
    for tok in args.methods.split(","):
        tok = tok.strip().lower()
        if tok == "gibbs":
            methods.add(METHOD_GIBBS)
        elif tok == "mle":
            methods.add(METHOD_MLE)
        elif tok:
            raise ValueError(f"unknown method {tok!r}")
    settings = MethodSettings(
        gibbs_iterations=args.iterations or cfg["iterations"],
        gibbs_burn_in=args.burnin if args.burnin is not None else cfg["burnin"],
        prior=_prior_from_cfg(cfg),
        mcem=McemConfig(
            j_initial=cfg["j_initial"],
            j_max=cfg["j_max"],
            max_iterations=cfg["max_em_iterations"],
            rel_tol=cfg["rel_tol"],
            sir_draws=cfg["sir_draws"],
        ),
        sir_draws=cfg["sir_draws"],
    )
    summary = run_study(
        scenario,
        n_reps=args.reps,
        methods=frozenset(methods),
        master_seed=args.seed,
        workers=args.workers,
        settings=settings,
    )
    full = summary.to_dict()
    # timing quartiles and ESS/sec depend on wall time; sidecar keeps the
    # primary summary byte-identical across reruns
    io_mod.write_json(
        args.output + ".timing.json",
        {"timing": full.pop("timing"), "ess_per_sec": full.pop("ess_per_sec")},
    )
    io_mod.write_json(args.output, full)
    if args.plot_data:
        io_mod.write_mse_plot_data(args.plot_data + "_mse.csv", summary)
        io_mod.write_coverage_plot_data(args.plot_data + "_coverage.csv", summary)
    return 0


def _cmd_diagnose(args, cfg) -> int:
    draws = io_mod.read_chain_csv(args.chain)
    payload = {"chain": str(args.chain), "parameters": {}}
    acf_by_param = {}
    for i, name in enumerate(PARAM_NAMES):
        col = draws[:, i]
        acf = autocorrelation(col, min(args.max_lag, col.size - 1))
        low, high = credible_interval(col, args.level)
        payload["parameters"][name] = {
            "mean": float(col.mean()),
            "low": low,
            "high": high,
            "ess": effective_sample_size(col),
            "acf": [float(v) for v in acf],
        }
        acf_by_param[name] = acf
    io_mod.write_json(args.output, payload)
    if args.fmt == "csv":
        io_mod.write_acf_plot_data(args.output + ".acf.csv", acf_by_param)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit-bayes": _cmd_fit_bayes,
    "fit-mle": _cmd_fit_mle,
    "study": _cmd_study,
    "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
