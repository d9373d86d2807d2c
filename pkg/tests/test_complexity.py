import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from expweights.complexity import (
    ExcessRiskProfile,
    aggregation_bound,
    bucket_counts,
    default_jmax,
    k0_partition,
    key_estimate_bound,
    lambda_x,
    pac_bound_residual,
    psi,
    r_bar,
    u_of_r,
)

LOG2 = math.log(2.0)


def profile_strategy(max_size=60):
    deltas = st.lists(st.floats(0, 10, allow_nan=False, allow_subnormal=False), min_size=0, max_size=max_size)
    return st.builds(
        lambda d, b, B: ExcessRiskProfile(np.array([0.0] + d), b, B),
        deltas,
        st.floats(0.1, 5),
        st.floats(0.1, 5),
    )


positive_r = st.floats(1e-6, 100, allow_subnormal=False)


def test_profile_validation():
    with pytest.raises(ValueError):
        ExcessRiskProfile(np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        ExcessRiskProfile(np.array([0.0, -0.1]))
    with pytest.raises(ValueError):
        ExcessRiskProfile(np.array([0.0, np.inf]))
    p = ExcessRiskProfile.from_risks([0.5, 0.2, 0.9])
    np.testing.assert_allclose(p.deltas, [0.0, 0.3, 0.7])


# ---------------------------------------------------------------- psi


def test_psi_all_zero():
    p = ExcessRiskProfile(np.zeros(7))
    assert psi(p, 0.3).psi_value == pytest.approx(math.log(8), rel=1e-15)


def test_psi_fixed_example():
    rep = psi(ExcessRiskProfile(np.array([0.0, 1.5, 3.0])), 1.0)
    assert abs(rep.psi_value - 1.75 * LOG2) <= 1e-12
    assert {j: c for j, c in rep.bucket_counts.items() if c} == {0: 1, 1: 1, 2: 1}


def test_psi_rejects_nonpositive_r():
    p = ExcessRiskProfile(np.zeros(2))
    for r in (0.0, -1.0):
        with pytest.raises(ValueError):
            psi(p, r)


def test_bucket_edges_are_right_closed():
    # 2 is in shell 1 (1, 2], 2 + ulp in shell 2
    p = ExcessRiskProfile(np.array([0.0, 1.0, 2.0, np.nextafter(2.0, 3.0)]))
    assert bucket_counts(p, 1.0).tolist() == [2, 1, 1, 0]


@given(profile_strategy(), positive_r)
def test_psi_range(p, r):
    v = psi(p, r).psi_value
    assert LOG2 - 1e-15 <= v <= 2 * math.log(p.M + 1) + 1e-12


@given(profile_strategy(), positive_r)
def test_psi_truncation_doubling(p, r):
    j = default_jmax(p, r)
    assert abs(psi(p, r, j).psi_value - psi(p, r, 2 * j).psi_value) <= 1e-15
    assert sum(psi(p, r).bucket_counts.values()) == p.M


# ---------------------------------------------------------------- u(r) and r_bar


def test_u_small_r_limit():
    p = ExcessRiskProfile(np.array([0.0, 1.0, 2.0]), b=1.0, B=2.0)
    n = 100
    r = 1e-12
    assert u_of_r(p, r, n) == pytest.approx(LOG2 / n + math.sqrt(2 * r / n) * math.sqrt(LOG2), rel=1e-12)


@given(profile_strategy(), positive_r, st.integers(2, 10 ** 6))
def test_u_upper_bound(p, r, n):
    assume(p.M >= 2)
    logM = math.log(p.M)
    c2 = 4.0
    assert u_of_r(p, r, n) <= c2 * max(p.b * logM / n, math.sqrt(r * p.B * logM / n)) * (1 + 1e-12)


def test_u_parts_not_monotone_counterexample():
    # moving the third element from shell 1 into shell 0 lowers the first sum:
    # log 3 + log(2)/2 just below r = 1, log 4 at r = 1
    from expweights.complexity import _u_parts
    p = ExcessRiskProfile(np.array([0.0, 0.0, 1.0]))
    below = _u_parts(bucket_counts(p, 1 - 1e-9))[0]
    at = _u_parts(bucket_counts(p, 1.0))[0]
    assert below == pytest.approx(math.log(3) + LOG2 / 2)
    assert at == pytest.approx(math.log(4))
    assert at < below


@given(profile_strategy(), positive_r, st.floats(1.0, 100.0))
def test_cumulative_counts_monotone(p, r, factor):
    # what does hold: #{d <= 2^j r} is non-decreasing in r for every j
    lo = np.cumsum(bucket_counts(p, r, 60))
    hi = np.cumsum(bucket_counts(p, r * factor, 60))
    assert np.all(hi >= lo)


def test_r_bar_single_function_closed_form():
    b, B, n = 1.3, 2.1, 250
    p = ExcessRiskProfile(np.array([0.0]), b, B)
    A = b / n * LOG2
    C = math.sqrt(B / n) * math.sqrt(LOG2)
    # u(r) = A + C sqrt(r) = r / 2  <=>  sqrt(r) = C + sqrt(C^2 + 2A)
    expected = (C + math.sqrt(C * C + 2 * A)) ** 2
    assert r_bar(p, n) == pytest.approx(expected, rel=1e-12)


@given(profile_strategy(), st.integers(1, 10 ** 5))
def test_r_bar_definition(p, n):
    r = r_bar(p, n)
    eps = 1e-6
    assert u_of_r(p, r * (1 + eps), n) <= r * (1 + eps) / 2
    # nothing clearly smaller works on a grid below
    for s in np.geomspace(r * 1e-3, r * (1 - 1e-6), 40):
        assert u_of_r(p, s, n) > s / 2


@given(profile_strategy(), st.integers(2, 10 ** 5))
def test_r_bar_below_theta(p, n):
    assume(p.M >= 2)
    # u(r) <= 4 max(b log M / n, sqrt(r B log M / n)) gives r_bar <= 64 (b + B) log M / n
    theta = 64 * (p.b + p.B) * math.log(p.M) / n
    assert r_bar(p, n) <= theta


@given(profile_strategy(), st.integers(1, 10 ** 5))
def test_r_bar_decreases_in_n(p, n):
    assert r_bar(p, 2 * n) <= r_bar(p, n) * (1 + 1e-12)


@given(profile_strategy(), st.integers(1, 10 ** 5))
def test_r_bar_bounded_by_its_own_complexity(p, n):
    # just left of r_bar, s < 2 u(s) = 2 (b/n) psi(s) + 2 sqrt(B s / n) phi(s),
    # hence s <= 4 (b + B) max(psi(s), phi(s)^2) / n
    from expweights.complexity import _u_parts
    s = r_bar(p, n) * (1 - 1e-9)
    first, second = _u_parts(bucket_counts(p, s))
    assert s <= 4 * (p.b + p.B) * max(first, second ** 2) / n * (1 + 1e-9)


def test_r_bar_psi_theta_constant_on_random_profiles():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        M = int(rng.integers(2, 60))
        scale = 10.0 ** rng.uniform(-4, 1)
        d = np.concatenate([[0.0], rng.uniform(0, 10, M - 1) * scale])
        b, B = rng.uniform(0.1, 5, 2)
        n = int(10 ** rng.uniform(0.3, 5))
        p = ExcessRiskProfile(d, b, B)
        theta = 64 * (b + B) * math.log(M) / n
        assert r_bar(p, n) <= 16 * (b + B) / n * psi(p, theta).psi_value


# ---------------------------------------------------------------- lambda(x), k0


def test_lambda_branches():
    p = ExcessRiskProfile(np.linspace(0, 1, 100), 1.0, 1.0)
    n = 10_000
    rb = r_bar(p, n)
    assert lambda_x(p, n, 1.0) == pytest.approx(rb)          # r_bar branch dominates at x = 1
    assert rb > 2 * 1.0 / n
    x_cross = n * rb / 2
    assert lambda_x(p, n, x_cross) == pytest.approx(rb, rel=1e-12)
    assert lambda_x(p, n, 1e9) == pytest.approx(2 * 1e9 / n)
    with pytest.raises(ValueError):
        lambda_x(p, n, 0.0)


def test_k0_all_inside():
    p = ExcessRiskProfile(np.zeros(5))
    part = k0_partition(p, 100, 1.0)
    assert part.J_plus == {} and part.k0 == -math.inf and part.two_pow_k0 == 0.0


def test_k0_example():
    # kappa1 (b + B) / n = rho = 1; shells (0, 1], (1, 2], (2, 4]
    n, x = 2, 1e-9
    deltas = np.concatenate([[0.0], np.full(3, 0.9), np.full(10, 1.5), np.full(3, 3.0)])
    p = ExcessRiskProfile(deltas, 1.0, 1.0)
    part = k0_partition(p, n, x, c=1e-9)
    assert part.rho == 1.0
    sizes = {k: len(v) for k, v in part.J_plus.items()}
    assert sizes == {0: 3, 1: 10, 2: 3}
    assert part.k0 == 1


@given(profile_strategy(), st.integers(2, 10 ** 5), st.floats(0.1, 10))
def test_two_pow_k0_below_log_m(p, n, x):
    assume(p.M >= 2)
    part = k0_partition(p, n, x)
    assert part.two_pow_k0 <= math.log(p.M)
    # the partition covers every index exactly once
    covered = np.concatenate([part.J_minus] + list(part.J_plus.values()))
    assert sorted(covered.tolist()) == list(range(p.M))


@given(profile_strategy(), st.integers(2, 10 ** 5), st.floats(0.1, 10))
def test_two_pow_k0_below_local_count(p, n, x):
    assume(p.M >= 2)
    part = k0_partition(p, n, x)
    # J_{+,k0} lies within 2^k0 rho <= theta of the oracle when shells are counted from rho
    theta = (p.b + p.B) * math.log(p.M + 1) / n * 2 ** max(part.k0, 0)
    count = int(np.count_nonzero(p.deltas <= max(theta, part.rho * part.two_pow_k0)))
    assert part.two_pow_k0 <= math.log(count + 1) + 1e-12


# ---------------------------------------------------------------- bounds


def test_pac_residual_examples():
    n, T, x = 100, 0.5, 2.0
    assert pac_bound_residual(ExcessRiskProfile(np.zeros(8)), n, T, x) == pytest.approx(T / n * (x + math.log(8)))
    assert pac_bound_residual(ExcessRiskProfile(np.zeros(1)), n, T, x) == pytest.approx(T / n * x)
    big = ExcessRiskProfile(np.array([0.0, 1e6, 2e6]))
    assert pac_bound_residual(big, n, T, x) == pytest.approx(T / n * x, rel=1e-12)


def test_key_estimate_examples():
    p = ExcessRiskProfile(np.zeros(4), 1.0, 1.0)
    assert key_estimate_bound(p, 100, 1.0, 0.5) == pytest.approx(lambda_x(p, 100, 1.0))
    with pytest.warns(UserWarning):
        key_estimate_bound(p, 100, 1.0, 10.0)


@given(profile_strategy(), st.integers(2, 10 ** 5), st.floats(0.1, 10))
def test_key_estimate_doubling_x(p, n, x):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = key_estimate_bound(p, n, x, 0.1)
        b = key_estimate_bound(p, n, 2 * x, 0.1)
    assert b - a <= (p.b + p.B) * x / n * (1 + 1e-9) + (p.b + p.B) * math.log(p.M + 1) / n


@given(profile_strategy(), st.integers(2, 10 ** 5), st.floats(0.1, 10))
def test_aggregation_bound_dominates_key_estimate(p, n, x):
    assume(p.M >= 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        key = key_estimate_bound(p, n, x, 0.1)
    assert key <= 32 * aggregation_bound(p, n, x)
