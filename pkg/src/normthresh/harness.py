"""Monte Carlo campaigns measuring estimator deviations against the bound.

A campaign draws ``trials`` independent samples from a synthetic generator,
runs every configured estimator on each, and records the Euclidean
deviation from the exact generator mean. In the default known-variance mode
the shrinkage scale and the deviation bound are computed once from the
generator's exact ``v`` and ``T``; the fraction of trials in which the
thresholded mean exceeds the bound is the empirical violation rate, which
the bound promises to keep below ``delta``.

Trial ``i`` draws its sample from seed ``stream(base_seed, i)``, so records
do not depend on how trials are scheduled across workers.
"""

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from . import estimators as est
from ._rng import stream
from .bounds import (
    BoundReport,
    ConfidenceSpec,
    EstimatorParams,
    MomentProfile,
    VarianceInfo,
    bound_full,
    bound_second_moment_only,
    derive_params,
    plug_in_variance,
)
from .distributions import GeneratorSpec, GroundTruth, ground_truth, norm_moment, sample

__all__ = [
    "EstimatorConfig",
    "ExperimentSpec",
    "TrialRecord",
    "CampaignReport",
    "CoverageResult",
    "InsufficientTrials",
    "run_trial",
    "run_campaign",
    "coverage_test",
    "clopper_pearson",
    "default_workers",
    "QUANTILE_LEVELS",
    "WORKERS_ENV",
]

QUANTILE_LEVELS = (0.5, 0.9, 0.95, 0.99)
WORKERS_ENV = "NORMTHRESH_WORKERS"
ESTIMATOR_KINDS = ("thresholded", "empirical", "mom", "trimmed")


class InsufficientTrials(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    kind: str
    blocks: Optional[int] = None
    fraction: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}; expected one of {ESTIMATOR_KINDS}")
        if self.kind == "mom":
            if self.blocks is None or int(self.blocks) < 1:
                raise ValueError("mom estimator needs blocks >= 1")
        elif self.blocks is not None:
            raise ValueError(f"'blocks' is not a parameter of {self.kind}")
        if self.kind == "trimmed":
            if self.fraction is None or not 0.0 <= float(self.fraction) < 0.5:
                raise ValueError("trimmed estimator needs fraction in [0, 0.5)")
        elif self.fraction is not None:
            raise ValueError(f"'fraction' is not a parameter of {self.kind}")

    @property
    def name(self) -> str:
        if self.kind == "mom":
            return f"mom(blocks={int(self.blocks)})"
        if self.kind == "trimmed":
            return f"trimmed(fraction={float(self.fraction)!r})"
        return self.kind


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of a Monte Carlo campaign.

    ``p_grid`` and ``pp_grid`` are the exponent grids of the two
    higher-order bound terms (``bound_variant="full"`` only); ``None`` means
    the library defaults restricted to the moments the generator has.
    ``mixed_moments`` supplies mixed-moment bounds for exponents above 1.
    ``lambda_override`` replaces the derived shrinkage scale in the
    estimator (the bound is still computed from the derived parameters).
    """

    generator: GeneratorSpec
    n: int
    trials: int
    confidence: ConfidenceSpec = field(default_factory=ConfidenceSpec)
    estimators: Tuple[EstimatorConfig, ...] = (EstimatorConfig("thresholded"), EstimatorConfig("empirical"))
    bound_variant: str = "second_moment_only"
    p_grid: Optional[Tuple[float, ...]] = None
    pp_grid: Optional[Tuple[float, ...]] = None
    mixed_moments: Dict[float, float] = field(default_factory=dict)
    base_seed: int = 0
    variance_mode: str = "known"
    lambda_override: Optional[float] = None

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be >= 1")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if not self.estimators:
            raise ValueError("estimator list must not be empty")
        names = [e.name for e in self.estimators]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate estimators: {names}")
        if self.bound_variant not in ("full", "second_moment_only"):
            raise ValueError(f"bound_variant must be 'full' or 'second_moment_only', got {self.bound_variant!r}")
        if self.variance_mode not in ("known", "plug_in"):
            raise ValueError(f"variance_mode must be 'known' or 'plug_in', got {self.variance_mode!r}")
        if self.variance_mode == "plug_in" and int(self.n) < 2:
            raise ValueError("plug-in variance needs n >= 2")
        if self.lambda_override is not None and not float(self.lambda_override) > 0:
            raise ValueError("lambda_override must be positive")
        if int(self.base_seed) < 0:
            raise ValueError("base_seed must be non-negative")
        object.__setattr__(self, "estimators", tuple(self.estimators))

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "n": int(self.n),
            "trials": int(self.trials),
            "confidence": {"delta": self.confidence.delta, "mu": self.confidence.mu},
            "estimators": [e.name for e in self.estimators],
            "bound_variant": self.bound_variant,
            "p_grid": None if self.p_grid is None else [float(p) for p in self.p_grid],
            "pp_grid": None if self.pp_grid is None else [float(p) for p in self.pp_grid],
            "mixed_moments": {repr(float(k)): float(v) for k, v in sorted(self.mixed_moments.items())},
            "base_seed": int(self.base_seed),
            "variance_mode": self.variance_mode,
            "lambda_override": self.lambda_override,
        }


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    deviations: Dict[str, float]
    bound_value: float
    lam: float
    exceeded: Optional[bool]


@dataclass
class _Context:
    truth: GroundTruth
    params: Optional[EstimatorParams]
    bound: Optional[BoundReport]


def _moment_profile(spec: ExperimentSpec, truth: GroundTruth, variance: VarianceInfo) -> MomentProfile:
    norm_moments = dict(truth.norm_moments)
    # explicit grids may ask for orders outside the default 2, 3, 4 set
    for p in spec.pp_grid or ():
        p = float(p)
        if p not in norm_moments:
            norm_moments[p] = norm_moment(spec.generator, p)[0]
    return MomentProfile.with_default_mixed(norm_moments, truth.mean_norm, variance, spec.mixed_moments)


def _bound(spec: ExperimentSpec, params: EstimatorParams, moments: MomentProfile) -> BoundReport:
    if spec.bound_variant == "full":
        return bound_full(params, moments, spec.p_grid, spec.pp_grid)
    return bound_second_moment_only(params, moments)


def _prepare(spec: ExperimentSpec) -> _Context:
    truth = ground_truth(spec.generator)
    if spec.variance_mode == "plug_in":
        return _Context(truth, None, None)
    variance = VarianceInfo(v=truth.v, trace_second_moment=truth.trace_second_moment)
    params = derive_params(spec.confidence, variance, spec.n)
    bound = _bound(spec, params, _moment_profile(spec, truth, variance))
    return _Context(truth, params, bound)


def _estimate(cfg: EstimatorConfig, x: np.ndarray, lam: float, seed: int) -> np.ndarray:
    if cfg.kind == "thresholded":
        return est.thresholded_mean(x, lam)
    if cfg.kind == "empirical":
        return est.empirical_mean(x)
    if cfg.kind == "mom":
        return est.median_of_means(x, min(int(cfg.blocks), x.shape[0]), seed)
    return est.trimmed_mean(x, float(cfg.fraction))


def _run_trial(spec: ExperimentSpec, ctx: _Context, i: int) -> TrialRecord:
    seed = stream(int(spec.base_seed), i)
    x = sample(spec.generator, spec.n, seed)
    if spec.variance_mode == "plug_in":
        variance = plug_in_variance(x)
        params = derive_params(spec.confidence, variance, spec.n)
        bound = _bound(spec, params, _moment_profile(spec, ctx.truth, variance)).total
    else:
        params, bound = ctx.params, ctx.bound.total
    lam = float(spec.lambda_override) if spec.lambda_override is not None else params.lam
    mom_seed = stream(seed, 1)
    deviations = {}
    for cfg in spec.estimators:
        m_hat = _estimate(cfg, x, lam, mom_seed)
        deviations[cfg.name] = float(np.linalg.norm(m_hat - ctx.truth.mean))
    exceeded = deviations["thresholded"] > bound if "thresholded" in deviations else None
    return TrialRecord(trial_index=i, deviations=deviations, bound_value=bound, lam=lam, exceeded=exceeded)


def run_trial(spec: ExperimentSpec, trial_index: int) -> TrialRecord:
    """Run a single trial; deterministic in ``(spec, trial_index)``."""
    if not 0 <= int(trial_index):
        raise ValueError("trial_index must be non-negative")
    return _run_trial(spec, _prepare(spec), int(trial_index))


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        k = int(raw)
        if k < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1, got {raw}")
        return k
    return os.cpu_count() or 1


def clopper_pearson(k: int, n: int, level: float = 0.99) -> Tuple[float, float]:
    """Exact two-sided binomial confidence interval for ``k`` successes in ``n``."""
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")
    alpha = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


@dataclass
class CampaignReport:
    spec: ExperimentSpec
    trials: int
    violations: Optional[int]
    coverage_violation_rate: Optional[float]
    binomial_ci: Optional[Tuple[float, float]]
    quantiles: Dict[str, Dict[float, float]]
    rmse: Dict[str, float]
    bound_value: Optional[float]
    bound: Optional[BoundReport]
    params_echo: Optional[EstimatorParams]
    timing: float
    records: List[TrialRecord] = field(repr=False, default_factory=list)

    @property
    def plug_in(self) -> bool:
        return self.spec.variance_mode == "plug_in"

    def to_dict(self, include_timing: bool = False) -> dict:
        """JSON-ready dict with a fixed key order.

        Wall-clock timing is left out unless requested so that identical
        campaigns serialise to identical bytes.
        """
        out = {
            "spec": self.spec.to_dict(),
            "variance_mode": self.spec.variance_mode,
            "disclaimer": (
                "exploratory: v estimated from each sample, no coverage guarantee" if self.plug_in else None
            ),
            "trials": self.trials,
            "violations": self.violations,
            "coverage_violation_rate": self.coverage_violation_rate,
            "binomial_ci_99": None if self.binomial_ci is None else list(self.binomial_ci),
            "bound_value": self.bound_value,
            "bound": None if self.bound is None else self.bound.to_dict(),
            "params": None if self.params_echo is None else self.params_echo.to_dict(),
            "estimators": {
                name: {
                    "rmse": self.rmse[name],
                    "quantiles": {repr(q): val for q, val in self.quantiles[name].items()},
                }
                for name in self.quantiles
            },
        }
        if include_timing:
            out["timing_seconds"] = self.timing
        return out


def run_campaign(spec: ExperimentSpec, workers: Optional[int] = None) -> CampaignReport:
    """Run every trial and aggregate in trial-index order.

    ``workers`` defaults to :func:`default_workers`. The report does not
    depend on the number of workers.
    """
    start = time.perf_counter()
    ctx = _prepare(spec)
    k = default_workers() if workers is None else int(workers)
    if k < 1:
        raise ValueError("workers must be >= 1")
    trials = int(spec.trials)

    def job(i):
        try:
            return _run_trial(spec, ctx, i)
        except Exception as exc:
            raise RuntimeError(f"trial {i} failed: {exc}") from exc

    if k == 1:
        records = [job(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=k) as pool:
            records = list(pool.map(job, range(trials), chunksize=max(1, trials // (4 * k))))

    names = [cfg.name for cfg in spec.estimators]
    dev = {name: np.array([r.deviations[name] for r in records]) for name in names}
    quantiles = {name: {q: float(np.quantile(dev[name], q)) for q in QUANTILE_LEVELS} for name in names}
    rmse = {name: float(math.sqrt(np.mean(dev[name] ** 2))) for name in names}

    if "thresholded" in names:
        violations = int(sum(bool(r.exceeded) for r in records))
        rate = violations / trials
        ci = clopper_pearson(violations, trials, 0.99)
    else:
        violations, rate, ci = None, None, None

    return CampaignReport(
        spec=spec,
        trials=trials,
        violations=violations,
        coverage_violation_rate=rate,
        binomial_ci=ci,
        quantiles=quantiles,
        rmse=rmse,
        bound_value=None if ctx.bound is None else ctx.bound.total,
        bound=ctx.bound,
        params_echo=ctx.params,
        timing=time.perf_counter() - start,
        records=records,
    )


@dataclass(frozen=True)
class CoverageResult:
    passed: bool
    upper: float
    margin: float
    delta: float


def coverage_test(report: CampaignReport, delta: Optional[float] = None, min_trials: int = 1000) -> CoverageResult:
    """Pass iff the 99% Clopper-Pearson upper limit of the violation rate is <= delta.

    ``margin`` is ``delta - upper``; positive when the test passes.
    """
    if report.plug_in:
        raise ValueError("plug-in campaigns carry no coverage guarantee and cannot be coverage-tested")
    if report.violations is None:
        raise ValueError("campaign has no thresholded estimator to test")
    if report.trials < min_trials:
        raise InsufficientTrials(f"coverage test needs at least {min_trials} trials, got {report.trials}")
    delta = report.spec.confidence.delta if delta is None else float(delta)
    _, upper = clopper_pearson(report.violations, report.trials, 0.99)
    return CoverageResult(passed=upper <= delta, upper=upper, margin=delta - upper, delta=delta)
