# %% [markdown]
# # Thresholded means on heavy-tailed data
#
# The thresholded mean pulls every observation back onto a ball of radius
# 1/lam before averaging. Points already inside the ball are untouched, so
# on tame data it is the ordinary sample mean. This walkthrough compares it
# with the sample mean, median-of-means and a trimmed mean.

# %%
import numpy as np

from normthresh import (
    GeneratorSpec,
    empirical_mean,
    geometric_median,
    median_of_means,
    sample,
    shrink,
    thresholded_mean,
    trimmed_mean,
)

# %% [markdown]
# ## The shrink map
#
# A vector longer than 1/lam keeps its direction and gets norm 1/lam.

# %%
print(shrink([3.0, 4.0], 1.0))     # (0.6, 0.8)
print(shrink([0.3, 0.4], 1.0))     # unchanged
print(shrink([10.0, 0.0], 0.5))    # (2, 0)

# %% [markdown]
# ## Nothing clipped means nothing changes
#
# With lam small enough that every row sits inside the ball, the two means
# agree bit for bit. Both sum rows in the same pairwise order.

# %%
x = np.random.default_rng(0).standard_normal((1000, 5))
lam = 0.9 / np.linalg.norm(x, axis=1).max()
print(np.array_equal(thresholded_mean(x, lam), empirical_mean(x)))

# %% [markdown]
# ## A heavy-tailed sample
#
# Student-t with 3 degrees of freedom has finite variance but a heavy tail.
# A handful of large rows moves the sample mean a long way.

# %%
gen = GeneratorSpec("student_t", 20, {"df": 3.0})
x = sample(gen, 500, seed=11)
truth = np.zeros(20)

for name, est in [
    ("empirical", empirical_mean(x)),
    ("thresholded", thresholded_mean(x, lam=0.15)),
    ("mom(10 blocks)", median_of_means(x, 10, rng_seed=1)),
    ("trimmed(5%)", trimmed_mean(x, 0.05)),
]:
    print(f"{name:16s} error {np.linalg.norm(est - truth):.4f}")

# %% [markdown]
# ## Geometric median
#
# Median-of-means combines block means with the geometric median, computed
# by Weiszfeld iteration. The result carries a convergence flag.

# %%
res = geometric_median([[1, 0], [-1, 0], [0, 1], [0, -1], [5, 5]])
print(res.point, res.converged, res.n_iter)
