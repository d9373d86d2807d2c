"""Counterexample dictionaries and a Bernstein-class dictionary.

* Two-point model: Y = 0, X = +1 w.p. 1/2 - 1/sqrt(n), f_1 = 1[0,1],
  f_2 = 1[-1,0].  Quantities driven by S = sum X_i are evaluated exactly
  by enumerating the binomial law of S.
* Large-dictionary model: Y = 0, f_1 = 12^(1/4) U_1, f_j = 12^(1/4)(U_j + lam)
  with U_j i.i.d. of density 2(u + lam) on [-lam, 1 - lam].
* Bernstein model: well-specified regression with step functions on [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy import stats
from scipy.special import expit

from .core import Dictionary, RiskModel

TWELVE_QUARTER = 12.0 ** 0.25
SQRT12 = math.sqrt(12.0)
_U32_SCALE = 2.0 ** -32


# ---------------------------------------------------------------------------
# two-function model


@dataclass(frozen=True)
class TheoremAModel:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 5 or self.n % 2 == 0:
            raise ValueError("n must be odd and ≥ 5")

    @property
    def p_plus(self) -> float:
        return 0.5 - self.n ** -0.5

    @property
    def alpha(self) -> float:
        return math.sqrt(self.n) / 2.0

    @property
    def PL2(self) -> float:
        return 2.0 / math.sqrt(self.n)

    @property
    def sigma2(self) -> float:
        return 1.0 - 4.0 / self.n

    def dictionary(self) -> Dictionary:
        return Dictionary(
            functions=[
                lambda x: ((np.asarray(x) >= 0) & (np.asarray(x) <= 1)).astype(float),
                lambda x: ((np.asarray(x) >= -1) & (np.asarray(x) <= 0)).astype(float),
            ],
            risk_model=self.risk_model(),
            bound=1.0,
        )

    def risk_model(self) -> RiskModel:
        # f_1^2 = 1{X=1}, f_2^2 = 1{X=-1}, f_1 f_2 = 0 on {-1, 1}
        p = self.p_plus
        return RiskModel(gram=np.diag([p, 1.0 - p]), cross=np.zeros(2), y2=0.0)


def theorem_a_sample(model: TheoremAModel, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw X_1..X_size in {-1, +1} (Y is identically 0)."""
    size = model.n if size is None else size
    return np.where(rng.random(size) < model.p_plus, 1.0, -1.0)


def theorem_a_theta1(PnL2, n: int, T: float):
    """Weight of f_1, 1 / (1 + exp(-(n/T) P_n L_2))."""
    return expit(np.multiply(n / T, PnL2))


def theorem_a_excess(theta1, model: TheoremAModel):
    """Excess risk (1 - t - alpha t (1 - t)) P L_2 of the aggregate t f_1 + (1 - t) f_2."""
    t = np.asarray(theta1, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("theta1 must lie in [0, 1]")
    out = (1.0 - t - model.alpha * t * (1.0 - t)) * model.PL2
    return out if out.ndim else float(out)


def _lattice(model: TheoremAModel):
    """Support of S = sum X_i and its probabilities.

    scipy's binomial pmf (saddle-point deviance form) keeps the total mass
    within a few ulps of 1, unlike a plain log-gamma expansion.
    """
    n = model.n
    k = np.arange(n + 1)
    return 2 * k - n, stats.binom.pmf(k, n, model.p_plus)


def theorem_a_excess_distribution(n: int, T: float):
    """(excess values, probabilities) of the AEW excess risk over the lattice of S."""
    model = TheoremAModel(n)
    if T <= 0:
        raise ValueError("temperature must be > 0")
    s, pmf = _lattice(model)
    # P_n L_2 = -S / n, so (n/T) P_n L_2 = -S / T
    theta1 = expit(-s / T)
    return theorem_a_excess(theta1, model), pmf


def theorem_a_exact_expected_excess(n: int, T: float) -> float:
    values, pmf = theorem_a_excess_distribution(n, T)
    return float(np.sum(pmf * values))


def theorem_a_exact_tail(n: int, T: float, threshold: float) -> float:
    """P[excess >= threshold], exact."""
    values, pmf = theorem_a_excess_distribution(n, T)
    return float(min(1.0, np.sum(pmf[values >= threshold])))


# ---------------------------------------------------------------------------
# large-dictionary model


@dataclass(frozen=True)
class TheoremBModel:
    """Parameters of the large-dictionary counterexample.

    ``c_M`` scales M = ceil(c_M sqrt(n log n)); ``c_lambda`` scales
    lam = c_lambda * eps * sqrt(log M / n); ``c_eps`` is the constant in the
    lower limit c_eps T / sqrt(n log n) < eps.  ``M`` and ``lam`` can be set
    directly instead.
    """

    n: int
    epsilon: float = 0.1
    kappa: float = 1.0
    T: float = 0.05
    c_M: float = 1.0
    c_lambda: float = 1.0
    c_eps: float = 1.0
    M_override: Optional[int] = None
    lambda_override: Optional[float] = None
    check_epsilon: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.T <= 0:
            raise ValueError("temperature must be > 0")
        if self.M < 3:
            raise ValueError("the construction needs M >= 3")
        if not 0 < self.lam < 0.5:
            raise ValueError(f"lambda must lie in (0, 1/2), got {self.lam}")
        if not 0 < self.rho < 0.5:
            raise ValueError(f"rho must lie in (0, 1/2), got {self.rho}")
        if self.check_epsilon:
            lo = self.c_eps * self.T / math.sqrt(self.n * math.log(self.n))
            if not lo < self.epsilon < 0.125:
                raise ValueError(f"epsilon must lie in ({lo:.3g}, 1/8)")

    @property
    def M(self) -> int:
        if self.M_override is not None:
            return int(self.M_override)
        return math.ceil(self.c_M * math.sqrt(self.n * math.log(self.n)))

    @property
    def lam(self) -> float:
        if self.lambda_override is not None:
            return float(self.lambda_override)
        return self.c_lambda * self.epsilon * math.sqrt(math.log(self.M) / self.n)

    @property
    def rho(self) -> float:
        return self.n ** (-self.epsilon * self.kappa / self.T)

    @property
    def delta(self) -> float:
        rho = self.rho
        return -(self.T / math.sqrt(self.n)) * math.log(rho / (2 * (self.M - 2) * (1 - rho)))

    @property
    def loss_bound(self) -> float:
        # f^2 <= sqrt(12) (U + lam)^2 <= sqrt(12)
        return SQRT12

    def xi(self, rbar1: float) -> float:
        rho, lam = self.rho, self.lam
        return (
            rbar1
            + (self.T / math.sqrt(self.n)) * math.log(rho / (2 * (1 - rho)))
            - SQRT12 * lam * (2 - lam) * math.sqrt(self.n)
        )

    def excess_risk_gap(self) -> float:
        """E f_j^2 - E f_1^2 for j >= 2, equal to sqrt(12) lam (4/3 - lam)."""
        lam = self.lam
        return SQRT12 * lam * (4.0 / 3.0 - lam)


def _u32_blocks(rng: np.random.Generator, M: int, n: int, chunk: int) -> Iterator[np.ndarray]:
    """Yield (M, rows) uint32 blocks covering n rows, from raw 64-bit words."""
    chunk += chunk % 2
    done = 0
    while done < n:
        rows = min(chunk, n - done)
        raw = rng.bit_generator.random_raw((M, (rows + 1) // 2))
        yield raw.view(np.uint32)[:, :rows]
        done += rows


def _to_unit(block: np.ndarray) -> np.ndarray:
    # midpoint of each 2^-32 cell, so V lies strictly inside (0, 1)
    return (block.astype(np.float64) + 0.5) * _U32_SCALE


def theorem_b_sample(model: TheoremBModel, rng: np.random.Generator, chunk: int = 4096) -> np.ndarray:
    """(n, M) matrix of dictionary values f_j(X_i).

    U = sqrt(V) - lam with V uniform on (0, 1) (inverse of the CDF (u + lam)^2).
    """
    lam = model.lam
    v = np.concatenate([_to_unit(b) for b in _u32_blocks(rng, model.M, model.n, chunk)], axis=1).T
    vals = TWELVE_QUARTER * np.sqrt(v)          # 12^(1/4) (U_j + lam)
    vals[:, 0] -= TWELVE_QUARTER * lam          # f_1 = 12^(1/4) U_1
    return vals


@dataclass(frozen=True)
class TheoremBStatistics:
    """Per-trial sufficient statistics: column sums of V and sum of sqrt(V_1)."""

    sum_v: np.ndarray
    sum_sqrt_v1: float
    n: int


def theorem_b_statistics(model: TheoremBModel, rng: np.random.Generator, chunk: int = 4096) -> TheoremBStatistics:
    """Same draws as :func:`theorem_b_sample`, reduced on the fly (O(M) memory)."""
    sum_k = np.zeros(model.M, dtype=np.uint64)
    sum_sqrt = 0.0
    rows = 0
    for block in _u32_blocks(rng, model.M, model.n, chunk):
        sum_k += block.sum(axis=1, dtype=np.uint64)
        sum_sqrt += float(np.sqrt(_to_unit(block[0])).sum())
        rows += block.shape[1]
    sum_v = (sum_k.astype(np.float64) + 0.5 * rows) * _U32_SCALE
    return TheoremBStatistics(sum_v, sum_sqrt, rows)


def theorem_b_statistics_from_values(values: np.ndarray, model: TheoremBModel) -> TheoremBStatistics:
    v = (np.asarray(values) / TWELVE_QUARTER) ** 2
    v[:, 0] = (values[:, 0] / TWELVE_QUARTER + model.lam) ** 2
    return TheoremBStatistics(v.sum(axis=0), float(np.sqrt(v[:, 0]).sum()), values.shape[0])


def theorem_b_rbar(stats: TheoremBStatistics) -> np.ndarray:
    """Rbar_j = sqrt(12/n) (sum_i (U_j + lam)^2 - n/2)."""
    n = stats.n
    return math.sqrt(12.0 / n) * (stats.sum_v - 0.5 * n)


def theorem_b_empirical_risks(stats: TheoremBStatistics, model: TheoremBModel) -> np.ndarray:
    """R_n(f_j) for Y = 0; U_1^2 = V_1 - 2 lam sqrt(V_1) + lam^2."""
    n, lam = stats.n, model.lam
    risks = SQRT12 * stats.sum_v / n
    risks[0] = SQRT12 * (stats.sum_v[0] - 2 * lam * stats.sum_sqrt_v1 + n * lam * lam) / n
    return risks


def theorem_b_risk_model(model: TheoremBModel) -> RiskModel:
    lam, M = model.lam, model.M
    mean = np.full(M, TWELVE_QUARTER * 2.0 / 3.0)
    mean[0] = TWELVE_QUARTER * (2.0 / 3.0 - lam)
    gram = np.outer(mean, mean)
    second = np.full(M, SQRT12 / 2.0)
    second[0] = SQRT12 * (0.5 - 4.0 * lam / 3.0 + lam * lam)
    np.fill_diagonal(gram, second)
    return RiskModel(gram=gram, cross=np.zeros(M), y2=0.0)


def system_cj_indices(rbar, model: TheoremBModel) -> list:
    """Indices j >= 1 (0-based) solving the collapse system.

    Rbar_j <= xi(Rbar_0) and Rbar_k - Rbar_j >= delta for every k not in {0, j}.
    """
    rbar = np.asarray(rbar, dtype=float)
    if rbar.shape[0] < 3:
        raise ValueError("the system needs M >= 3")
    rest = rbar[1:]
    order = np.argsort(rest, kind="stable")
    j, second = order[0], order[1]
    # only the smallest can be separated from all others by delta > 0
    if rest[j] <= model.xi(rbar[0]) and rest[second] - rest[j] >= model.delta:
        return [int(j) + 1]
    return []


# ---------------------------------------------------------------------------
# Bernstein model


@dataclass
class BernsteinModel:
    """Well-specified regression Y = f_1(X) + eps on X ~ U[0, 1].

    Every f_j is piecewise constant on ``cells`` equal cells and
    f_j = f_1 + a_j s_j with s_j a +-1 pattern, so R(f_j) - R(f_1) = a_j^2
    exactly.  Noise is +-sigma with equal probability.
    """

    heights: np.ndarray              # (M, cells) value of f_j on each cell
    sigma: float
    b: float
    B: float
    excess: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return self.heights.shape[0]

    @property
    def cells(self) -> int:
        return self.heights.shape[1]

    def cell_of(self, x) -> np.ndarray:
        return np.minimum((np.asarray(x) * self.cells).astype(int), self.cells - 1)

    def dictionary(self) -> Dictionary:
        def make(h):
            return lambda x: h[self.cell_of(x)]
        return Dictionary([make(h) for h in self.heights], self.risk_model(), self.b)

    def risk_model(self) -> RiskModel:
        h = self.heights
        gram = h @ h.T / self.cells
        cross = h @ h[0] / self.cells
        y2 = float(h[0] @ h[0] / self.cells + self.sigma ** 2)
        return RiskModel(gram, cross, y2)

    def sample(self, n: int, rng: np.random.Generator):
        """(x, y) with x uniform on [0, 1) and y = f_1(x) +- sigma."""
        x = rng.random(n)
        eps = np.where(rng.random(n) < 0.5, -self.sigma, self.sigma)
        return x, self.heights[0][self.cell_of(x)] + eps

    def values(self, x) -> np.ndarray:
        return self.heights[:, self.cell_of(x)].T

    def excess_loss_moments(self):
        """Exact (E L_j, E L_j^2) for L_j = (Y - f_j)^2 - (Y - f_1)^2."""
        d = self.heights - self.heights[0]
        first = (d ** 2).mean(axis=1)
        # L = d^2 + 2 eps d with eps^2 = sigma^2 and E eps = 0
        second = (d ** 4).mean(axis=1) + 4 * self.sigma ** 2 * first
        return first, second

    def loss_bound_holds(self) -> bool:
        d = np.abs(self.heights - self.heights[0]).max()
        return (self.sigma + d) ** 2 <= self.b * (1 + 1e-12)


def bernstein_dictionary(
    M: int,
    b: float,
    rng: np.random.Generator,
    cells: int = 16,
    sigma: Optional[float] = None,
    step: float = 0.003,
    shared_pattern: bool = True,
) -> BernsteinModel:
    """Step-function dictionary whose excess losses form a (1, B)-Bernstein class.

    f_j = f_1 + a_j s with a_j = j * step * sqrt(b), i.e. excess risks
    (j * step)^2 b.  With ``shared_pattern`` every member moves away from f_1
    along the same +-1 pattern s; otherwise each gets its own pattern.

    Since |Y - f| <= sqrt(b) for every member, L_f^2 <= 4 b (f - f_1)^2,
    so B = max(1, 4 b) works for any such dictionary.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    if b <= 0:
        raise ValueError("b must be > 0")
    sigma = b / 4 if sigma is None else float(sigma)
    if not 0 <= sigma < math.sqrt(b):
        raise ValueError("noise level must lie in [0, sqrt(b))")
    amplitudes = step * math.sqrt(b) * np.arange(M)
    if sigma + amplitudes[-1] > math.sqrt(b):
        raise ValueError("step too large: losses would exceed b")
    base = rng.uniform(-0.5, 0.5, size=cells)
    if shared_pattern:
        signs = np.broadcast_to(np.where(rng.random(cells) < 0.5, -1.0, 1.0), (M, cells))
    else:
        signs = np.where(rng.random((M, cells)) < 0.5, -1.0, 1.0)
    heights = base + amplitudes[:, None] * signs
    return BernsteinModel(heights=heights, sigma=sigma, b=float(b), B=max(1.0, 4.0 * b), excess=amplitudes ** 2)
