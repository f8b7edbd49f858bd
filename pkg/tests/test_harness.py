import numpy as np
import pytest

from gompertz_ssm.gibbs import PriorHyper
from gompertz_ssm.harness import (
    METHOD_GIBBS,
    METHOD_MLE,
    MethodSettings,
    ReplicateResult,
    Scenario,
    aggregate_study,
    builtin_scenarios,
    replicate_seed,
    run_replicate,
    run_study,
    scenario_by_id,
)
from gompertz_ssm.mcem import McemConfig
from gompertz_ssm.model import ModelParams, NoiseModel

FAST = MethodSettings(
    gibbs_iterations=80,
    gibbs_burn_in=20,
    prior=PriorHyper(),
    mcem=McemConfig(j_initial=60, j_max=240, max_iterations=4, burn_in=20, sir_draws=500),
    sir_draws=500,
)


class TestScenarios:
    def test_registry_complete(self):
        scenarios = builtin_scenarios()
        assert [s.id for s in scenarios] == [f"S{i}" for i in range(1, 9)]
        for s in scenarios:
            assert s.true_params.theta1 == 2.0
            assert s.true_params.theta2 == 0.22
            assert s.true_params.b in (-0.5, -0.22)
            assert s.T in (30, 100)
        assert sum(s.noise == NoiseModel.POISSON for s in scenarios) == 4

    def test_lookup(self):
        s3 = scenario_by_id("S3")
        assert (s3.T, s3.true_params.b, s3.noise) == (100, -0.5, NoiseModel.POISSON)
        with pytest.raises(KeyError):
            scenario_by_id("S9")


class TestReplicateSeed:
    def test_deterministic_and_distinct(self):
        a = replicate_seed(0, "S1", 0, "data")
        assert a == replicate_seed(0, "S1", 0, "data")
        seen = {
            replicate_seed(m, sid, i, tag)
            for m in (0, 1)
            for sid in ("S1", "S2")
            for i in range(5)
            for tag in ("data", "gibbs", "mle")
        }
        assert len(seen) == 2 * 2 * 5 * 3
        assert all(0 <= s < 2 ** 64 for s in seen)


class TestRunReplicate:
    def test_both_methods(self):
        sc = scenario_by_id("S1")
        results = run_replicate(sc, 0, master_seed=3, settings=FAST)
        assert {r.method for r in results} == {METHOD_GIBBS, METHOD_MLE}
        for r in results:
            assert r.error is None
            assert set(r.estimates) == {"theta1", "theta2", "b"}
            point, low, high = r.estimates["theta1"]
            assert low <= point <= high
            assert r.wall_time > 0
        gibbs = next(r for r in results if r.method == METHOD_GIBBS)
        assert gibbs.ess and all(v > 0 for v in gibbs.ess.values())

    def test_single_method_and_determinism(self):
        sc = scenario_by_id("S1")
        r1 = run_replicate(sc, 2, methods={METHOD_GIBBS}, master_seed=5, settings=FAST)
        r2 = run_replicate(sc, 2, methods={METHOD_GIBBS}, master_seed=5, settings=FAST)
        assert len(r1) == 1
        assert r1[0].estimates == r2[0].estimates


class TestAggregateStudy:
    def _fake(self, idx, method, point, lo, hi, err=None):
        ests = {} if err else {
            name: (point, lo, hi) for name in ("theta1", "theta2", "b")
        }
        return ReplicateResult("S1", idx, method, ests, 1.0, error=err)

    def test_metrics(self):
        truth = ModelParams(2.0, 0.22, -0.5)
        results = [
            self._fake(0, METHOD_GIBBS, 2.0, 1.0, 3.0),
            self._fake(1, METHOD_GIBBS, 3.0, 2.5, 3.5),
            self._fake(2, METHOD_GIBBS, 0.0, 0.0, 0.0, err="boom"),
        ]
        s = aggregate_study(results, truth)
        m = s.metrics[METHOD_GIBBS]["theta1"]
        assert m["mse"] == pytest.approx(0.5)
        assert m["coverage"] == pytest.approx(0.5)
        assert s.failures[METHOD_GIBBS] == 1
        assert s.n_reps == 3
        d = s.to_dict()
        assert d["scenario"] == "S1"

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_study([], ModelParams(2.0, 0.22, -0.5))


class TestRunStudy:
    def test_serial_matches_parallel(self):
        sc = scenario_by_id("S1")
        serial = run_study(sc, n_reps=2, methods={METHOD_GIBBS}, master_seed=1,
                           workers=1, settings=FAST)
        parallel = run_study(sc, n_reps=2, methods={METHOD_GIBBS}, master_seed=1,
                             workers=2, settings=FAST)
        assert serial.metrics == parallel.metrics
        assert serial.failures == parallel.failures

    def test_bad_reps(self):
        with pytest.raises(ValueError):
            run_study(scenario_by_id("S1"), n_reps=0)
