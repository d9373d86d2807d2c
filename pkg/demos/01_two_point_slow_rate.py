# %% [markdown]
# Two functions, one sample, and why exponential weights can be slow
#
# Y is identically 0 and X is a sign with P[X = 1] = 1/2 - 1/sqrt(n).  The
# dictionary holds the indicators of X = 1 (the oracle) and of X = -1.
# Their empirical risks are the two sign frequencies, which differ by only
# order 1/sqrt(n), so the aggregate keeps a visible weight on the worse
# function and its excess risk decays like 1/sqrt(n) rather than 1/n.

# %%
import math

import numpy as np

from expweights.constructions import TheoremAModel, theorem_a_exact_expected_excess, theorem_a_exact_tail
from expweights.harness import ExperimentConfig, run_experiment

# %% exact expectation over the binomial lattice, no sampling
for n in (101, 1001, 10001):
    e = theorem_a_exact_expected_excess(n, 0.1)
    print(f"n={n:6d}  E excess={e:.3e}  sqrt(n) E excess={math.sqrt(n) * e:.4f}")

# %% the excess stays positive with non-vanishing probability at T = 1
for n in (101, 1001):
    print(n, theorem_a_exact_tail(n, 1.0, 1 / (2 * math.sqrt(n))))

# %% Monte Carlo only cross-checks the exact numbers
row = run_experiment(ExperimentConfig("A", [101], [0.1], 20_000, seed=1)).rows[0]
print(row["exact_mean_excess"], row["mc_mean_excess"], "+/-", row["mc_stderr"])

# %% the model itself
model = TheoremAModel(101)
print("P[x = 1] =", model.p_plus, " excess risk of f2 =", model.risk_model().excess_risks()[1])
print("values at X = -1 and X = 1:", model.dictionary().evaluate(np.array([-1.0, 1.0])).tolist())
