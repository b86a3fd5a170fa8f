# %% [markdown]
# # Deviation bounds
#
# Given a confidence level delta, a directional variance bound v and a
# bound T on E||X - m||^2, `derive_params` returns the shrinkage scale lam
# and the constants a, b, beta. The deviation bound is then the sum of a
# sub-Gaussian leading term, a second-order term and two higher-order terms.

# %%
import math

from normthresh import (
    ConfidenceSpec,
    MomentProfile,
    VarianceInfo,
    bound_full,
    bound_second_moment_only,
    derive_params,
    g1,
    g2,
)

# %% [markdown]
# The helper functions g1(t) = (e^t - 1)/t and g2(t) = 2(e^t - 1 - t)/t^2
# equal 1 at t = 0 and increase with t. Small arguments use a Taylor series
# to avoid cancellation.

# %%
for t in (0.0, 1e-9, 0.1, 0.5, 2.0):
    print(f"t={t:<6g} g1={float(g1(t)):.15f} g2={float(g2(t)):.15f}")

# %% [markdown]
# ## Parameters for a worked case
#
# mu = 1/4, delta = e^-2, v = T = 1, n = 100.

# %%
conf = ConfidenceSpec(delta=math.exp(-2), mu=0.25)
var = VarianceInfo(v=1.0, trace_second_moment=1.0)
params = derive_params(conf, var, 100)
print(params.to_dict())

# %% [markdown]
# ## Second-moment-only bound
#
# When only E||X||^2 and ||m|| are known, the higher-order terms are replaced
# by an envelope built from the second moment.

# %%
moments = MomentProfile(norm_moments={2.0: 1.0}, mean_norm=0.0)
print(bound_second_moment_only(params, moments).to_dict())

# %% [markdown]
# ## Full bound
#
# With higher norm moments available, each higher-order term is minimised
# over a finite grid of exponents. Mixed moments default to a
# Cauchy-Schwarz bound for p = 1; larger exponents need explicit values.

# %%
moments = MomentProfile.with_default_mixed({2.0: 1.0, 3.0: 1.6, 4.0: 3.0}, 0.0, var, {2.0: 1.0})
rep = bound_full(params, moments)
print(f"total {rep.total:.5f}  best p {rep.cp_p}  best p' {rep.cpp_p}")

# %% [markdown]
# ## Scaling with n
#
# Every term shrinks as n grows; the leading term decays like n^-1/2.

# %%
for n in (100, 1_000, 10_000, 100_000):
    p = derive_params(conf, var, n)
    r = bound_second_moment_only(p, MomentProfile({2.0: 1.0}, 0.0))
    print(f"n={n:>6d} lam={p.lam:.4f} total={r.total:.5f} first={r.first_term:.5f}")
