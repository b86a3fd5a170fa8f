# %% [markdown]
# # Checking coverage by simulation
#
# The bound should hold with probability at least 1 - delta. A campaign
# draws many independent samples from a generator with known moments,
# computes the thresholded mean with lam from the exact v and T, and counts
# how often the error exceeds the bound. The check passes when the 99%
# Clopper-Pearson upper limit on the violation rate is at most delta.

# %%
from normthresh import (
    ConfidenceSpec,
    ExperimentSpec,
    GeneratorSpec,
    coverage_test,
    ground_truth,
    run_campaign,
)

# %% [markdown]
# Ground truth comes from closed forms where they exist and numerical
# quadrature otherwise. Moments that do not exist are left out.

# %%
gen = GeneratorSpec("pareto_radial", 10, {"alpha": 2.5})
gt = ground_truth(gen)
print(gt.v, gt.trace_second_moment, gt.norm_moments, gt.moment_methods)

# %% [markdown]
# ## A campaign
#
# 2000 trials of n = 1000. Trial i always uses the seed derived from
# (base_seed, i), so the report does not depend on the number of workers.

# %%
spec = ExperimentSpec(gen, n=1000, trials=2000, confidence=ConfidenceSpec(delta=0.05), base_seed=1)
report = run_campaign(spec)
print("bound", report.bound_value)
print("violations", report.violations, "of", report.trials)
print("99% interval", report.binomial_ci)

res = coverage_test(report)
print("passed", res.passed, "upper", round(res.upper, 5), "margin", round(res.margin, 5))

# %% [markdown]
# The bound is conservative, so violations are usually zero. The
# deviation quantiles show how much room is left.

# %%
for q, val in report.quantiles["thresholded"].items():
    print(f"q{q}: {val:.4f}  (bound {report.bound_value:.4f})")
