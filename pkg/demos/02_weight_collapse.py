# %% [markdown]
# Large dictionaries: the weights collapse onto a bad function
#
# With M = ceil(sqrt(n log n)) functions at equal distance from the oracle, one
# of them wins the empirical race by a margin large enough for the Gibbs
# weights to put almost all their mass on it.  Every trial checks that the
# sufficient system of inequalities really forces the heavy weight.

# %%
from expweights.harness import ExperimentConfig, run_experiment

# %%
table = run_experiment(ExperimentConfig("B", [1000, 10_000], [0.05], 200, seed=2))
for r in table.rows:
    print(f"n={r['n']:6d} M={r['M']:4d} collapse={r['collapse_freq']:.3f} "
          f"[{r['collapse_lo']:.3f}, {r['collapse_hi']:.3f}] violations={r['implication_violations']}")

# %% which index collapsed, and how much weight it took
rec = next(r for r in table.records[(10_000, 0.05)] if r.flags["collapsed"])
j = rec.flags["collapsed"][0]
print("index", j, "weight", rec.weights[j], "oracle weight", rec.weights[0])
