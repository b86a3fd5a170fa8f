import json
import math

import numpy as np
import pytest
from scipy import stats

from normthresh import harness
from normthresh.bounds import ConfidenceSpec, MomentProfile, VarianceInfo, bound_second_moment_only, derive_params
from normthresh.distributions import GeneratorSpec, MomentDoesNotExist, ground_truth, sample
from normthresh.harness import (
    CampaignReport,
    EstimatorConfig,
    ExperimentSpec,
    InsufficientTrials,
    clopper_pearson,
    coverage_test,
    run_campaign,
    run_trial,
)

GAUSS = GeneratorSpec("gaussian", 5)
HEAVY = GeneratorSpec("student_t", 5, {"df": 3.0})


def _fake_report(k, n, delta=0.05, mode="known"):
    spec = ExperimentSpec(GAUSS, 10, n, ConfidenceSpec(delta=delta), variance_mode=mode)
    return CampaignReport(spec, n, k, k / n, clopper_pearson(k, n), {}, {}, None, None, None, 0.0)


def _binom_upper_bisect(k, n, level=0.99):
    # upper p solves P(Bin(n, p) <= k) = (1 - level) / 2; the cdf is decreasing in p
    target = (1 - level) / 2
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        cdf = sum(math.comb(n, j) * mid**j * (1 - mid) ** (n - j) for j in range(k + 1))
        lo, hi = (mid, hi) if cdf > target else (lo, mid)
    return 0.5 * (lo + hi)


# --- clopper-pearson / coverage ------------------------------------------


@pytest.mark.parametrize("k, n", [(0, 2000), (1, 2000), (40, 2000), (3, 50), (25, 60)])
def test_clopper_pearson_upper_vs_bisection(k, n):
    _, hi = clopper_pearson(k, n)
    assert hi == pytest.approx(_binom_upper_bisect(k, n), rel=1e-9)


def test_clopper_pearson_edges():
    assert clopper_pearson(0, 10)[0] == 0.0
    assert clopper_pearson(10, 10)[1] == 1.0
    with pytest.raises(ValueError):
        clopper_pearson(11, 10)


def test_coverage_zero_violations_passes():
    res = coverage_test(_fake_report(0, 2000))
    assert res.passed and res.upper < 0.003 and res.margin > 0


def test_coverage_all_violations_fails():
    res = coverage_test(_fake_report(2000, 2000))
    assert not res.passed and res.upper == 1.0 and res.margin < 0


def test_coverage_forty_of_two_thousand():
    res = coverage_test(_fake_report(40, 2000))
    assert res.passed
    assert res.upper == pytest.approx(0.0295, abs=5e-4)


def test_coverage_needs_enough_trials():
    with pytest.raises(InsufficientTrials):
        coverage_test(_fake_report(0, 999))


def test_coverage_rejects_plug_in():
    with pytest.raises(ValueError, match="plug-in"):
        coverage_test(_fake_report(0, 2000, mode="plug_in"))


# --- trials ---------------------------------------------------------------


def test_run_trial_deterministic():
    spec = ExperimentSpec(HEAVY, 200, 5, base_seed=12, estimators=(EstimatorConfig("thresholded"), EstimatorConfig("mom", blocks=8)))
    assert run_trial(spec, 3) == run_trial(spec, 3)
    assert run_trial(spec, 3) != run_trial(spec, 4)


def test_trial_record_matches_manual_computation():
    spec = ExperimentSpec(GAUSS, 100, 3, base_seed=5)
    rec = run_trial(spec, 2)
    x = sample(GAUSS, 100, harness.stream(5, 2))
    assert rec.deviations["empirical"] == float(np.linalg.norm(x.mean(axis=0)))


def test_single_trial_quantiles_collapse():
    rep = run_campaign(ExperimentSpec(GAUSS, 50, 1), workers=1)
    for qs in rep.quantiles.values():
        assert len(set(qs.values())) == 1


def test_tiny_lambda_makes_thresholded_equal_empirical():
    # override far below 1 / max ||X_i||, so nothing is clipped
    spec = ExperimentSpec(GAUSS, 64, 20, lambda_override=1e-6)
    rep = run_campaign(spec, workers=1)
    for r in rep.records:
        assert r.deviations["thresholded"] == r.deviations["empirical"]


def test_two_atom_mixture_large_n_small_deviation():
    gen = GeneratorSpec("point_mass_mixture", 2, {"atoms": [[1, 0], [-1, 0]]})
    rep = run_campaign(ExperimentSpec(gen, 20_000, 20), workers=1)
    assert rep.quantiles["empirical"][0.99] < 0.05


def test_bound_constant_across_trials_and_matches_bounds_module():
    spec = ExperimentSpec(HEAVY, 300, 15, ConfidenceSpec(delta=0.1))
    rep = run_campaign(spec, workers=1)
    assert len({r.bound_value for r in rep.records}) == 1
    gt = ground_truth(HEAVY)
    var = VarianceInfo(gt.v, gt.trace_second_moment)
    params = derive_params(ConfidenceSpec(delta=0.1), var, 300)
    prof = MomentProfile(gt.norm_moments, gt.mean_norm)
    assert rep.bound_value == bound_second_moment_only(params, prof).total
    assert rep.records[0].lam == params.lam


def test_parallel_determinism():
    spec = ExperimentSpec(
        HEAVY, 200, 64, base_seed=3,
        estimators=(EstimatorConfig("thresholded"), EstimatorConfig("empirical"), EstimatorConfig("mom", blocks=5), EstimatorConfig("trimmed", fraction=0.1)),
    )
    a = json.dumps(run_campaign(spec, workers=1).to_dict())
    b = json.dumps(run_campaign(spec, workers=8).to_dict())
    assert a == b


def test_workers_env(monkeypatch):
    monkeypatch.setenv(harness.WORKERS_ENV, "3")
    assert harness.default_workers() == 3
    monkeypatch.setenv(harness.WORKERS_ENV, "0")
    with pytest.raises(ValueError):
        harness.default_workers()


def test_doubling_n_shrinks_median_deviation():
    reps = [run_campaign(ExperimentSpec(HEAVY, n, 200, base_seed=1), workers=1) for n in (250, 500)]
    assert reps[1].quantiles["thresholded"][0.5] < reps[0].quantiles["thresholded"][0.5]


def test_missing_moment_in_full_mode_fails_fast():
    gen = GeneratorSpec("pareto_radial", 3, {"alpha": 2.5})
    spec = ExperimentSpec(gen, 100, 10, bound_variant="full", pp_grid=(2.0, 3.0))
    with pytest.raises(MomentDoesNotExist, match="does not exist"):
        run_campaign(spec, workers=1)


def test_full_variant_bound_not_above_envelope():
    spec_full = ExperimentSpec(HEAVY, 500, 2, bound_variant="full")
    spec_env = ExperimentSpec(HEAVY, 500, 2)
    full = run_campaign(spec_full, workers=1)
    env = run_campaign(spec_env, workers=1)
    assert full.bound_value <= env.bound_value


def test_plug_in_campaign_has_no_guarantee():
    rep = run_campaign(ExperimentSpec(GAUSS, 100, 4, variance_mode="plug_in"), workers=1)
    d = rep.to_dict()
    assert d["variance_mode"] == "plug_in" and "no coverage guarantee" in d["disclaimer"]
    assert rep.bound_value is None
    assert len({r.lam for r in rep.records}) == 4


def test_report_json_has_no_timing_by_default():
    rep = run_campaign(ExperimentSpec(GAUSS, 20, 2), workers=1)
    assert "timing_seconds" not in rep.to_dict()
    assert rep.to_dict(include_timing=True)["timing_seconds"] >= 0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n=0, trials=1),
        dict(n=10, trials=0),
        dict(n=10, trials=1, estimators=()),
        dict(n=10, trials=1, bound_variant="tight"),
        dict(n=10, trials=1, lambda_override=-1.0),
        dict(n=10, trials=1, estimators=(EstimatorConfig("empirical"), EstimatorConfig("empirical"))),
    ],
)
def test_experiment_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentSpec(GAUSS, **kwargs)


@pytest.mark.parametrize("kwargs", [dict(kind="mom"), dict(kind="trimmed", fraction=0.5), dict(kind="x"), dict(kind="empirical", blocks=2)])
def test_estimator_config_validation(kwargs):
    with pytest.raises(ValueError):
        EstimatorConfig(**kwargs)


def test_empirical_deviation_distribution_gaussian():
    # n ||xbar - m||^2 ~ chi^2_d for unit gaussian; compare the median
    rep = run_campaign(ExperimentSpec(GAUSS, 40, 4000, estimators=(EstimatorConfig("empirical"),)), workers=4)
    devs = np.array([r.deviations["empirical"] for r in rep.records])
    expected = math.sqrt(stats.chi2.median(5) / 40)
    assert np.median(devs) == pytest.approx(expected, rel=0.05)
    assert rep.violations is None
