"""Localized complexity of a finite dictionary and the bounds built on it.

All quantities depend on the dictionary only through its sorted excess risks
(``ExcessRiskProfile``).  Logarithms are natural.  Unnamed absolute constants
are keyword arguments defaulting to 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class ExcessRiskProfile:
    """Sorted excess risks R(f_j) - R(f_1) with loss bound b and Bernstein constant B."""

    deltas: np.ndarray
    b: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        d = np.sort(np.asarray(self.deltas, dtype=float))
        if d.ndim != 1 or d.size == 0:
            raise ValueError("profile needs at least one excess risk")
        if not np.all(np.isfinite(d)) or d[0] < 0:
            raise ValueError("excess risks must be finite and non-negative")
        if d[0] != 0:
            raise ValueError("the oracle (excess risk 0) must be part of the profile")
        object.__setattr__(self, "deltas", d)

    @classmethod
    def from_risks(cls, risks, b: float = 1.0, B: float = 1.0) -> "ExcessRiskProfile":
        risks = np.asarray(risks, dtype=float)
        return cls(risks - risks.min(), b, B)

    @property
    def M(self) -> int:
        return self.deltas.size


@dataclass
class ComplexityReport:
    psi_value: float
    r: float
    bucket_counts: dict = field(default_factory=dict)


def _check_r(r: float) -> float:
    r = float(r)
    if not r > 0:
        raise ValueError(f"r must be > 0, got {r}")
    return r


def default_jmax(profile: ExcessRiskProfile, r: float) -> int:
    """Last shell index that can be non-empty."""
    top = profile.deltas[-1]
    if top <= r:
        return 1
    return int(math.ceil(math.log2(top / r))) + 1


def bucket_counts(profile: ExcessRiskProfile, r: float, j_max: int | None = None) -> np.ndarray:
    """counts[0] = #{d <= r}, counts[j] = #{2^(j-1) r < d <= 2^j r} for j = 1..j_max."""
    r = _check_r(r)
    j_max = default_jmax(profile, r) if j_max is None else int(j_max)
    edges = r * np.exp2(np.arange(j_max + 1))
    # searchsorted(side="right") counts entries <= edge
    cum = np.searchsorted(profile.deltas, edges, side="right")
    return np.diff(np.concatenate([[0], cum]))


def psi(profile: ExcessRiskProfile, r: float, j_max: int | None = None) -> ComplexityReport:
    """Weighted log-count of the excess-risk shells around the oracle."""
    counts = bucket_counts(profile, r, j_max)
    weights = np.exp2(-np.arange(counts.size, dtype=float))
    # fsum is correctly rounded, so empty trailing shells cannot change the value
    value = math.fsum(weights * np.log1p(counts))
    return ComplexityReport(value, float(r), {j: int(c) for j, c in enumerate(counts)})


def _u_parts(counts: np.ndarray):
    j = np.arange(counts.size, dtype=float)
    logs = np.log1p(counts)
    return math.fsum(np.exp2(-j) * logs), math.fsum(np.exp2(-j / 2) * np.sqrt(logs))


def u_of_r(profile: ExcessRiskProfile, r: float, n: int, c1: float = 1.0) -> float:
    """Upper bound on the localized empirical-process supremum at level r."""
    r = _check_r(r)
    first, second = _u_parts(bucket_counts(profile, r))
    return c1 * (profile.b / n) * first + c1 * math.sqrt(profile.B * r / n) * second


def r_bar(profile: ExcessRiskProfile, n: int, c1: float = 1.0) -> float:
    """inf{r > 0 : u(r) <= r/2}.

    Bucket counts are constant on [lo, hi) between consecutive breakpoints
    d_i / 2^j; there u(r) = A + C sqrt(r) and u(r) <= r/2 iff
    sqrt(r) >= C + sqrt(C^2 + 2A).  Pieces are scanned left to right.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    b, B = profile.b, profile.B
    # u(r) >= c1 (b/n) log 2, so nothing below twice that qualifies
    r_min = 2.0 * c1 * b * math.log(2.0) / n
    pos = profile.deltas[profile.deltas > 0]
    breaks = [r_min]
    if pos.size:
        j_top = int(math.ceil(math.log2(pos[-1] / r_min))) + 1 if pos[-1] > r_min else 0
        cand = (pos[:, None] / np.exp2(np.arange(j_top + 1))[None, :]).ravel()
        breaks.extend(cand[cand > r_min].tolist())
    breaks = np.unique(breaks)
    breaks = np.append(breaks, np.inf)
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        counts = bucket_counts(profile, lo)
        first, second = _u_parts(counts)
        A = c1 * b / n * first
        C = c1 * math.sqrt(B / n) * second
        s = C + math.sqrt(C * C + 2 * A)
        r = max(lo, s * s)
        if r < hi:
            return float(r)
    raise RuntimeError("no crossing u(r) <= r/2 found")  # unreachable: the last piece is unbounded


def r_bar_theta(profile: ExcessRiskProfile, n: int, c: float = 1.0) -> float:
    """theta = c (b + B) log M / n."""
    return c * (profile.b + profile.B) * math.log(profile.M) / n


def lambda_x(profile: ExcessRiskProfile, n: int, x: float, c: float = 1.0, c1: float = 1.0) -> float:
    """Isomorphism level c * max(r_bar, (b + B) x / n), with r_bar standing in for r*."""
    if not x > 0:
        raise ValueError("x must be > 0")
    return c * max(r_bar(profile, n, c1), (profile.b + profile.B) * x / n)


@dataclass
class KPartition:
    lam: float
    rho: float
    J_minus: np.ndarray
    J_plus: dict                   # k -> indices of the k-th shell above rho
    k0: float                      # -inf when no shell qualifies

    @property
    def two_pow_k0(self) -> float:
        return 0.0 if self.k0 == -math.inf else 2.0 ** self.k0


def k0_partition(
    profile: ExcessRiskProfile,
    n: int,
    x: float,
    c: float = 1.0,
    c1: float = 1.0,
    kappa1: float = 1.0,
) -> KPartition:
    """Split the dictionary at lambda(x) and shell the remainder at rho 2^k."""
    lam = lambda_x(profile, n, x, c, c1)
    rho = kappa1 * (profile.B + profile.b) / n
    d = profile.deltas
    idx = np.arange(d.size)
    minus = idx[d <= lam]
    plus = idx[d > lam]
    shells = {}
    if plus.size:
        dp = d[plus]
        top = max(0, int(math.ceil(math.log2(dp[-1] / rho))) + 1)
        edges = rho * np.exp2(np.arange(top + 1, dtype=float))
        # first k with d <= rho 2^k, i.e. 2^(k-1) rho < d <= 2^k rho
        k = np.searchsorted(edges, dp, side="left")
        for kk in range(int(k.max()) + 1):
            shells[kk] = plus[k == kk]
    k0 = -math.inf
    for kk, members in shells.items():
        if 2.0 ** kk <= math.log(members.size + 1):
            k0 = max(k0, kk)
    return KPartition(lam, rho, minus, shells, k0)


def pac_bound_residual(profile: ExcessRiskProfile, n: int, T: float, x: float, c2: float = 1.0) -> float:
    """(T c2 / n) (x + log sum_f exp(-(n / 2T) (R(f) - R(f*))))."""
    if not T > 0 or not x > 0:
        raise ValueError("T and x must be > 0")
    return T * c2 / n * (x + float(logsumexp(-(n / (2 * T)) * profile.deltas)))


def key_estimate_bound(
    profile: ExcessRiskProfile,
    n: int,
    x: float,
    T: float,
    c2: float = 1.0,
    c0: float = 1.0,
    **consts,
) -> float:
    """c2 (lambda(x) + (b + B) 2^k0 / n); warns outside the low-temperature regime."""
    if T > c0 * max(profile.b, profile.B):
        warnings.warn("temperature above c0 max(b, B): outside the low-temperature regime", stacklevel=2)
    part = k0_partition(profile, n, x, **consts)
    return c2 * (part.lam + (profile.b + profile.B) * part.two_pow_k0 / n)


def aggregation_bound(profile: ExcessRiskProfile, n: int, x: float, c1: float = 1.0, c2: float = 1.0) -> float:
    """c1 (b + B) (x + psi(theta)) / n with theta = c2 (b + B) log M / n."""
    theta = c2 * (profile.b + profile.B) * math.log(max(profile.M, 2)) / n
    return c1 * (profile.b + profile.B) * (x + psi(profile, theta).psi_value) / n
