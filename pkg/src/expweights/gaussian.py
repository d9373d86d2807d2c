"""Gaussian approximation of normalized sums X = n^(-1/2) sum W_i.

Built-in summands:

``uniform``    W = sqrt(12) (V - 1/2), V ~ U[0, 1]  (exact CDF via Irwin-Hall)
``rademacher`` W = (D - p) / sqrt(p (1 - p)), D ~ Bernoulli(p)  (lattice)
``gaussian``   W ~ N(0, 1)
``custom``     user sampler ``sampler(rng, shape) -> W``
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import ndtr, ndtri

DEFAULT_A = 0.56
IRWIN_HALL_EXACT_MAX = 60
P_G_BELOW_MINUS_2 = float(ndtr(-2.0))


class UnsupportedDistributionError(ValueError):
    """The requested quantity needs an absolutely continuous summand."""


def normal_cdf(x):
    return ndtr(x)


def normal_sf(x):
    """P[g >= x] without cancellation in the upper tail."""
    return ndtr(np.negative(x))


def _require_generator(rng) -> np.random.Generator:
    if not isinstance(rng, np.random.Generator):
        raise TypeError("pass an explicitly seeded numpy.random.Generator")
    return rng


# ---------------------------------------------------------------------------
# Irwin-Hall law of V_1 + ... + V_n


def irwin_hall_cdf(x: float, n: int) -> float:
    """P[V_1 + ... + V_n <= x], alternating sum at extended precision."""
    if x <= 0:
        return 0.0
    if x >= n:
        return 1.0
    if x > n / 2:
        return 1.0 - irwin_hall_cdf(n - x, n)
    with mpmath.workdps(30 + n):
        xm = mpmath.mpf(x)
        total = mpmath.mpf(0)
        for k in range(int(math.floor(x)) + 1):
            total += (-1) ** k * mpmath.binomial(n, k) * (xm - k) ** n
        return float(total / mpmath.factorial(n))


def irwin_hall_pdf(x: float, n: int) -> float:
    if x <= 0 or x >= n:
        return 0.0
    x = min(x, n - x)
    with mpmath.workdps(30 + n):
        xm = mpmath.mpf(x)
        total = mpmath.mpf(0)
        for k in range(int(math.floor(x)) + 1):
            total += (-1) ** k * mpmath.binomial(n, k) * (xm - k) ** (n - 1)
        return float(total / mpmath.factorial(n - 1))


def irwin_hall_ppf(q: float, n: int) -> float:
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    return optimize.brentq(lambda s: irwin_hall_cdf(s, n) - q, 0.0, float(n), xtol=1e-14, rtol=1e-15)


# ---------------------------------------------------------------------------
# standardized uniform sums for large n: characteristic-function inversion


def _uniform_cf(t: np.ndarray, n: int) -> np.ndarray:
    # phi_W(s) = sin(sqrt3 s) / (sqrt3 s); np.sinc(z) = sin(pi z) / (pi z)
    return np.sinc(math.sqrt(3.0) * t / (math.pi * math.sqrt(n))) ** n


_CF_TMAX = 40.0


def uniform_sum_cdf_cf(x: float, n: int) -> float:
    """CDF of the standardized uniform sum via Gil-Pelaez inversion."""
    integrand = lambda t: math.sin(t * x) / t * _uniform_cf(np.array(t), n)
    val, _ = integrate.quad(integrand, 0.0, _CF_TMAX, limit=1000, epsabs=1e-14, epsrel=1e-12)
    return 0.5 + val / math.pi


def uniform_sum_pdf_cf(x: float, n: int) -> float:
    integrand = lambda t: math.cos(t * x) * _uniform_cf(np.array(t), n)
    val, _ = integrate.quad(integrand, 0.0, _CF_TMAX, limit=1000, epsabs=1e-14, epsrel=1e-12)
    return val / math.pi


# ---------------------------------------------------------------------------


@dataclass
class NormalizedSumSpec:
    kind: str = "uniform"
    inner_n: int = 1
    A: float = DEFAULT_A
    p: float = 0.5
    sampler: Optional[Callable] = field(default=None, repr=False)
    third_abs_moment: Optional[float] = None
    third_moment: Optional[float] = None
    continuous: bool = True

    def __post_init__(self):
        if self.kind not in ("uniform", "rademacher", "gaussian", "custom"):
            raise ValueError(f"unknown summand kind {self.kind!r}")
        if self.inner_n < 1:
            raise ValueError("inner_n must be >= 1")
        if self.kind == "custom" and self.sampler is None:
            raise ValueError("custom summands need a sampler")
        if self.kind == "rademacher":
            if not 0 < self.p < 1:
                raise ValueError("p must lie in (0, 1)")
            self.continuous = False
        if self.kind in ("uniform", "gaussian"):
            self.continuous = True

    @property
    def abs_third(self) -> float:
        if self.kind == "uniform":
            return 3.0 * math.sqrt(3.0) / 4.0
        if self.kind == "gaussian":
            return 2.0 * math.sqrt(2.0 / math.pi)
        if self.kind == "rademacher":
            p = self.p
            return ((1 - p) ** 2 + p ** 2) / math.sqrt(p * (1 - p))
        if self.third_abs_moment is None:
            raise ValueError("custom summands need third_abs_moment")
        return self.third_abs_moment

    @property
    def skew(self) -> Optional[float]:
        """E W^3 (None when unknown)."""
        if self.kind in ("uniform", "gaussian"):
            return 0.0
        if self.kind == "rademacher":
            p = self.p
            return (1 - 2 * p) / math.sqrt(p * (1 - p))
        return self.third_moment

    @property
    def beta(self) -> float:
        """A E|W|^3."""
        return self.A * self.abs_third

    def sample(self, size: int, rng: np.random.Generator, chunk: int = 1 << 18) -> np.ndarray:
        """``size`` independent draws of the normalized sum."""
        rng = _require_generator(rng)
        n = self.inner_n
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            k = rng.binomial(n, self.p, size)
            return (k - n * self.p) / math.sqrt(n * self.p * (1 - self.p))
        out = np.empty(size)
        rows = max(1, chunk // n)
        for start in range(0, size, rows):
            m = min(rows, size - start)
            if self.kind == "uniform":
                s = rng.random((m, n)).sum(axis=1)
                out[start:start + m] = (s - 0.5 * n) * math.sqrt(12.0 / n)
            else:
                out[start:start + m] = np.asarray(self.sampler(rng, (m, n))).sum(axis=1) / math.sqrt(n)
        return out

    def exact_cdf(self, x: float) -> float:
        """P[X <= x] for the built-in kinds."""
        n = self.inner_n
        if self.kind == "gaussian":
            return float(ndtr(x))
        if self.kind == "uniform":
            if n <= IRWIN_HALL_EXACT_MAX:
                return irwin_hall_cdf(0.5 * n + x * math.sqrt(n / 12.0), n)
            return uniform_sum_cdf_cf(x, n)
        if self.kind == "rademacher":
            k = n * self.p + x * math.sqrt(n * self.p * (1 - self.p))
            return float(stats.binom.cdf(math.floor(k + 1e-12), n, self.p))
        raise UnsupportedDistributionError("no closed form for custom summands")

    def exact_pdf(self, x: float) -> float:
        n = self.inner_n
        if self.kind == "gaussian":
            return float(stats.norm.pdf(x))
        if self.kind == "uniform":
            if n <= IRWIN_HALL_EXACT_MAX:
                return irwin_hall_pdf(0.5 * n + x * math.sqrt(n / 12.0), n) * math.sqrt(n / 12.0)
            return uniform_sum_pdf_cf(x, n)
        raise UnsupportedDistributionError("density only available for continuous built-ins")

    def exact_ppf(self, q: float) -> float:
        n = self.inner_n
        if self.kind == "gaussian":
            return float(ndtri(q))
        if self.kind == "uniform":
            if n <= IRWIN_HALL_EXACT_MAX:
                return (irwin_hall_ppf(q, n) - 0.5 * n) * math.sqrt(12.0 / n)
            lo, hi = -10.0, 10.0
            return optimize.brentq(lambda x: uniform_sum_cdf_cf(x, n) - q, lo, hi, xtol=1e-12)
        raise UnsupportedDistributionError("quantiles need a continuous built-in summand")


# ---------------------------------------------------------------------------
# Berry-Esseen


def dkw_epsilon(n_samples: int, alpha: float = 0.001) -> float:
    """Half-width of the DKW confidence band at level 1 - alpha."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n_samples))


def kolmogorov_distance(samples: np.ndarray, cdf=normal_cdf, grid: Optional[np.ndarray] = None) -> float:
    """sup_x |F_hat(x) - cdf(x)|, checked on both sides of every jump and on ``grid``."""
    values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
    N = counts.sum()
    above = np.cumsum(counts) / N
    below = above - counts / N
    F = cdf(values)
    d = max(np.max(np.abs(above - F)), np.max(np.abs(F - below)))
    if grid is not None:
        Fhat = np.searchsorted(values, grid, side="right")
        Fhat = np.where(Fhat > 0, above[np.maximum(Fhat - 1, 0)], 0.0)
        d = max(d, np.max(np.abs(Fhat - cdf(grid))))
    return float(d)


@dataclass
class BerryEsseenResult:
    distance: float
    bound: float
    mc_samples: int

    @property
    def slack(self) -> float:
        return dkw_epsilon(self.mc_samples)


def berry_esseen_distance(
    spec: NormalizedSumSpec,
    mc_samples: int,
    rng: np.random.Generator,
    grid_size: int = 10_000,
) -> BerryEsseenResult:
    """Empirical Kolmogorov distance to N(0, 1) and the bound A E|W|^3 / sqrt(n)."""
    _require_generator(rng)
    if mc_samples < 100_000:
        raise ValueError("mc_samples must be >= 1e5")
    x = spec.sample(mc_samples, rng)
    lim = max(6.0, float(np.abs(x).max()))
    grid = np.linspace(-lim, lim, grid_size)
    return BerryEsseenResult(kolmogorov_distance(x, grid=grid), spec.beta / math.sqrt(spec.inner_n), mc_samples)


def gaussian_tail_sandwich(x: float):
    """(lower, upper) with lower <= P[g >= x] <= upper, valid for x >= 2."""
    if x < 2:
        raise ValueError("the sandwich is only claimed for x >= 2")
    core = math.exp(-x * x / 2.0) / (x * math.sqrt(2.0 * math.pi))
    return 0.75 * core, core


# ---------------------------------------------------------------------------
# gamma_1


@dataclass
class Gamma1Query:
    ell: int
    level_n: float
    spec: NormalizedSumSpec

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        if self.level_n < 2:
            raise ValueError("level_n must be >= 2")

    @property
    def exceed_prob(self) -> float:
        """P[X > gamma_1] = level_n^(-1/ell)."""
        return math.exp(-math.log(self.level_n) / self.ell)

    @property
    def level(self) -> float:
        """P[X <= gamma_1] = 1 - level_n^(-1/ell), without cancellation."""
        return -math.expm1(-math.log(self.level_n) / self.ell)


def gamma1(query: Gamma1Query, method: str = "auto", mc_samples: int = 10_000_000, rng=None) -> float:
    """gamma_1 with P[min of ell copies <= gamma_1] = 1 - 1/level_n.

    ``method``: "exact" (built-in continuous kinds), "mc", or "auto" (exact
    when available, otherwise Monte Carlo with ``rng``).
    """
    spec = query.spec
    if not spec.continuous:
        raise UnsupportedDistributionError("gamma_1 needs an absolutely continuous summand")
    if method == "auto":
        method = "mc" if spec.kind == "custom" else "exact"
    if method == "exact":
        return spec.exact_ppf(query.level)
    if method == "mc":
        x = spec.sample(mc_samples, _require_generator(rng))
        return mc_quantile(x, query.level)
    raise ValueError(f"unknown method {method!r}")


def mc_quantile(x: np.ndarray, q: float) -> float:
    """Nearest-rank quantile."""
    k = max(1, math.ceil(q * x.size))
    return float(np.partition(x, k - 1)[k - 1])


def quantile_stderr(q: float, density: float, n_samples: int) -> float:
    """Asymptotic standard error of the empirical q-quantile."""
    return math.sqrt(q * (1 - q) / n_samples) / density


@dataclass
class Gamma1Report:
    ell: int
    level_n: float
    gamma1: float
    exceed_prob: float
    part1_lower: bool
    part1_upper: Optional[bool]
    part2_premise: bool
    gamma1_le_minus_2: bool
    part3_in_range: bool
    part3_ratio: Optional[float]
    part3_window: tuple
    part3_holds: Optional[bool]
    notes: list = field(default_factory=list)


def lemma_gamma1_part1(ell: int, level_n: float):
    """(1 - x <= n^(-1/ell), n^(-1/ell) <= 1 - x/3 or None) with x = log(n)/ell, at 50 digits."""
    with mpmath.workdps(50):
        x = mpmath.log(mpmath.mpf(level_n)) / ell
        tail = mpmath.exp(-x)
        lower = bool(1 - x <= tail)
        upper = bool(tail <= 1 - x / 3) if x <= 1 else None
    return lower, upper


def lemma_gamma1_checks(
    query: Gamma1Query,
    c0: float = 1.0,
    c2: float = 1.0,
    c3: float = 1.0,
    window: tuple = (0.25, 4.0),
    **gamma_kwargs,
) -> Gamma1Report:
    """Report which parts of the gamma_1 estimates hold for this configuration.

    Part (3) is only evaluated when gamma_1 <= -2 and
    c0 log n <= ell <= c2 sqrt(inner_n) log n / beta.
    """
    ell, n = query.ell, query.level_n
    spec = query.spec
    lower, upper = lemma_gamma1_part1(ell, n)
    g1 = gamma1(query, **gamma_kwargs)
    log_n = math.log(n)
    beta_term = spec.beta / math.sqrt(spec.inner_n)
    premise2 = beta_term + log_n / ell < P_G_BELOW_MINUS_2
    notes = []
    if premise2 and g1 > -2:
        notes.append("part (2) premise holds but gamma_1 > -2")
    in_range = c0 * log_n <= ell <= c2 * math.sqrt(spec.inner_n) * log_n / spec.beta
    ratio = holds = None
    if g1 <= -2 and in_range:
        arg = c3 * ell / log_n
        if arg > 1:
            ratio = abs(g1) / math.sqrt(math.log(arg))
            holds = window[0] <= ratio <= window[1]
        else:
            notes.append("log(c3 ell / log n) <= 0; part (3) undefined")
    return Gamma1Report(
        ell=ell,
        level_n=n,
        gamma1=g1,
        exceed_prob=query.exceed_prob,
        part1_lower=lower,
        part1_upper=upper,
        part2_premise=premise2,
        gamma1_le_minus_2=g1 <= -2,
        part3_in_range=in_range,
        part3_ratio=ratio,
        part3_window=tuple(window),
        part3_holds=holds,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# moderate deviations


@dataclass
class EnvelopeReport:
    x: np.ndarray
    ratio: np.ndarray
    excluded: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(self.ratio.max()) if self.ratio.size else 0.0


def moderate_deviation_envelope(
    spec: NormalizedSumSpec,
    x_grid,
    mc_samples: Optional[int] = None,
    rng=None,
    B0: float = 1.0,
) -> EnvelopeReport:
    """|F(x) - Phi(x)| / (n^(-1/2) exp(-x^2/2)) on the admissible part of ``x_grid``.

    F is the empirical CDF of ``mc_samples`` draws, or the exact CDF of a
    built-in summand when ``mc_samples`` is None.
    """
    if not spec.continuous:
        raise UnsupportedDistributionError("the envelope is only meaningful for continuous summands")
    if spec.skew is None or abs(spec.skew) > 1e-12:
        raise ValueError("the envelope assumes E W^3 = 0")
    x_grid = np.asarray(x_grid, dtype=float)
    n = spec.inner_n
    keep = np.abs(x_grid) <= B0 * n ** (1.0 / 6.0)
    if not keep.all():
        warnings.warn(f"{(~keep).sum()} grid points beyond B0 n^(1/6) excluded", stacklevel=2)
    xs = x_grid[keep]
    if mc_samples is None:
        F = np.array([spec.exact_cdf(float(v)) for v in xs])
    else:
        samples = np.sort(spec.sample(mc_samples, _require_generator(rng)))
        F = np.searchsorted(samples, xs, side="right") / samples.size
    ratio = np.abs(F - ndtr(xs)) / (n ** -0.5 * np.exp(-xs ** 2 / 2))
    return EnvelopeReport(xs, ratio, x_grid[~keep])
