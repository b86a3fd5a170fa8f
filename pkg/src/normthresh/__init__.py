"""Norm-thresholded mean estimation with non-asymptotic deviation bounds."""

from .bounds import (
    BoundReport,
    ConfidenceSpec,
    EstimatorParams,
    MomentProfile,
    VarianceInfo,
    bound_full,
    bound_second_moment_only,
    cauchy_schwarz_mixed_bound,
    derive_params,
    g1,
    g2,
    plug_in_variance,
)
from .distributions import GeneratorSpec, GroundTruth, MomentDoesNotExist, ground_truth, sample
from .estimators import (
    empirical_mean,
    geometric_median,
    median_of_means,
    psi,
    shrink,
    thresholded_mean,
    trimmed_mean,
)
from .harness import (
    CampaignReport,
    EstimatorConfig,
    ExperimentSpec,
    TrialRecord,
    coverage_test,
    run_campaign,
    run_trial,
)

__version__ = "0.1.0"
