# %% [markdown]
# Normal approximation tools behind the lower bound
#
# Sums of uniforms are compared with the standard normal: the Kolmogorov
# distance against the Berry-Esseen bound, the quantile gamma_1 of the
# minimum of ell copies, and the moderate-deviation envelope.

# %%
import numpy as np

from expweights.gaussian import (
    Gamma1Query,
    NormalizedSumSpec,
    berry_esseen_distance,
    gamma1,
    lemma_gamma1_checks,
    moderate_deviation_envelope,
)

# %%
rng = np.random.default_rng(4)
for inner_n in (4, 16, 64):
    res = berry_esseen_distance(NormalizedSumSpec("uniform", inner_n), 200_000, rng)
    print(f"inner_n={inner_n:3d} distance={res.distance:.4f} bound={res.bound:.4f}")

# %% exact quantiles (Irwin-Hall below 61 summands, Fourier inversion above)
for inner_n in (20, 10_000):
    q = Gamma1Query(1000, 1e4, NormalizedSumSpec("uniform", inner_n))
    print(inner_n, gamma1(q))
print(lemma_gamma1_checks(Gamma1Query(1000, 1e4, NormalizedSumSpec("uniform", 10_000))))

# %%
xs = np.linspace(-2, 2, 21)
for n in (16, 64, 256):
    print(n, moderate_deviation_envelope(NormalizedSumSpec("uniform", n), xs, B0=2.0).max_ratio)
