# %% [markdown]
# # Comparing estimators
#
# The same campaign machinery runs several estimators on identical samples.
# On Gaussian data they all behave alike. On heavy tails the upper
# quantiles separate.

# %%
from normthresh import EstimatorConfig, ExperimentSpec, GeneratorSpec, run_campaign

ESTIMATORS = (
    EstimatorConfig("thresholded"),
    EstimatorConfig("empirical"),
    EstimatorConfig("mom", blocks=10),
    EstimatorConfig("trimmed", fraction=0.05),
)


def table(gen, n=500, trials=500):
    rep = run_campaign(ExperimentSpec(gen, n, trials, estimators=ESTIMATORS, base_seed=3))
    print(f"{'estimator':24s} {'rmse':>8s} {'q0.5':>8s} {'q0.99':>8s}")
    for name, qs in rep.quantiles.items():
        print(f"{name:24s} {rep.rmse[name]:8.4f} {qs[0.5]:8.4f} {qs[0.99]:8.4f}")


# %%
table(GeneratorSpec("gaussian", 20))

# %%
table(GeneratorSpec("student_t", 20, {"df": 3.0}))

# %% [markdown]
# The same comparison is available from the command line:
#
#     normthresh compare --config demos/configs/compare_student_t.toml --output-dir out/
