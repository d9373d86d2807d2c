"""Empirical risks and exponential-weights aggregation over a finite dictionary.

Dictionary indices are 0-based throughout the package: index 0 is the first
function of the dictionary (the oracle in every bundled construction).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

SIMPLEX_TOL = 1e-12


class Loss(enum.Enum):
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class RiskModel:
    """Second-moment description of a dictionary under quadratic loss.

    ``gram[j, k] = E f_j(X) f_k(X)``, ``cross[j] = E Y f_j(X)``, ``y2 = E Y^2``.
    """

    gram: np.ndarray
    cross: np.ndarray
    y2: float

    def __post_init__(self):
        gram = np.asarray(self.gram, dtype=float)
        cross = np.asarray(self.cross, dtype=float)
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
            raise ValueError("gram must be a square matrix")
        if cross.shape != (gram.shape[0],):
            raise ValueError("cross must have one entry per dictionary function")
        if not np.allclose(gram, gram.T, rtol=0, atol=1e-12 * max(1.0, np.abs(gram).max())):
            raise ValueError("gram must be symmetric")
        if np.any(np.diag(gram) < 0):
            raise ValueError("gram diagonal must be non-negative")
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "cross", cross)
        object.__setattr__(self, "y2", float(self.y2))

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    def risks(self) -> np.ndarray:
        """Risk of every dictionary member, R(f_j) = y2 - 2 cross_j + gram_jj."""
        return self.y2 - 2.0 * self.cross + np.diag(self.gram)

    def excess_risks(self) -> np.ndarray:
        r = self.risks()
        return r - r.min()


@dataclass
class Dictionary:
    """Finite family of real functions, optionally with an exact risk model.

    ``functions`` take an array of inputs and return an array of values.
    ``bound`` is a uniform bound on the loss values.
    """

    functions: Sequence[Callable[[np.ndarray], np.ndarray]]
    risk_model: Optional[RiskModel] = None
    bound: float = np.inf

    def __post_init__(self):
        if len(self.functions) < 1:
            raise ValueError("a dictionary needs at least one function")
        if self.risk_model is not None and self.risk_model.size != len(self.functions):
            raise ValueError("risk model size does not match the dictionary")
        if self.bound < 0:
            raise ValueError("loss bound must be non-negative")

    @property
    def size(self) -> int:
        return len(self.functions)

    def evaluate(self, x) -> np.ndarray:
        """Matrix of values, shape (len(x), M)."""
        x = np.asarray(x)
        cols = [np.broadcast_to(np.asarray(f(x), dtype=float), x.shape[:1]) for f in self.functions]
        return np.stack(cols, axis=1)


@dataclass(frozen=True)
class EmpiricalRisks:
    values: np.ndarray
    n: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("risks must be a non-empty vector")
        if self.n < 1:
            raise ValueError("sample size must be positive")
        object.__setattr__(self, "values", values)


def check_temperature(T: float) -> float:
    T = float(T)
    if not np.isfinite(T) or T <= 0:
        raise ValueError(f"temperature must be finite and > 0, got {T}")
    return T


def check_simplex(theta, tol: float = SIMPLEX_TOL) -> None:
    """Raise ValueError unless ``theta`` is a probability vector."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(~np.isfinite(theta)) or np.any(theta < -tol) or np.any(theta > 1 + tol):
        raise ValueError("weights must lie in [0, 1]")
    if abs(theta.sum() - 1.0) > tol * max(1, theta.size):
        raise ValueError(f"weights sum to {theta.sum()!r}, not 1")


def loss_matrix(values: np.ndarray, y, loss: Loss = Loss.QUADRATIC) -> np.ndarray:
    """Pointwise losses Q((x_i, y_i), f_j) from an (n, M) matrix of values."""
    if loss is not Loss.QUADRATIC:
        raise ValueError(f"unsupported loss {loss}")
    y = np.asarray(y, dtype=float)
    return (y[:, None] - values) ** 2


def empirical_risk(dictionary: Dictionary, x, y, loss: Loss = Loss.QUADRATIC) -> EmpiricalRisks:
    """Empirical risks R_n(f_j) = (1/n) sum_i (y_i - f_j(x_i))^2."""
    x = np.asarray(x)
    y = np.asarray(y, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("sample must be non-empty")
    if y.shape[0] != x.shape[0]:
        raise ValueError("x and y must have the same length")
    losses = loss_matrix(dictionary.evaluate(x), y, loss)
    return EmpiricalRisks(losses.mean(axis=0), x.shape[0])


def gibbs_weights(scaled_risks: np.ndarray) -> np.ndarray:
    """Softmax of ``-scaled_risks``, stabilized by subtracting the minimum."""
    shifted = scaled_risks - scaled_risks.min()
    w = np.exp(-shifted)
    return w / w.sum()


def aew_weights(risks: EmpiricalRisks, T: float) -> np.ndarray:
    """Exponential weights theta_j proportional to exp(-(n/T) R_n(f_j))."""
    T = check_temperature(T)
    r = risks.values
    if not np.all(np.isfinite(r)):
        raise ValueError("empirical risks must be finite")
    # the minimum is subtracted before scaling so that a common shift cancels
    return gibbs_weights((risks.n / T) * (r - r.min()))


def erm_indices(risks: EmpiricalRisks) -> np.ndarray:
    """All minimizers of the empirical risk (ascending)."""
    r = risks.values
    if not np.all(np.isfinite(r)):
        raise ValueError("empirical risks must be finite")
    return np.flatnonzero(r == r.min())


def erm_select(risks: EmpiricalRisks) -> int:
    """Single ERM choice; ties go to the smallest index."""
    return int(erm_indices(risks)[0])


def aggregate_risk(theta, model: RiskModel) -> float:
    """Exact quadratic risk of sum_j theta_j f_j."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.size,):
        raise ValueError(f"weights have shape {theta.shape}, model has size {model.size}")
    value = model.y2 - 2.0 * theta @ model.cross + theta @ model.gram @ theta
    scale = max(1.0, model.y2, np.abs(model.gram).max())
    if value < -SIMPLEX_TOL * scale:
        raise ValueError(f"negative quadratic risk {value}; gram is not PSD")
    return max(float(value), 0.0)


def aggregate_excess_risk(theta, model: RiskModel) -> float:
    """R(sum_j theta_j f_j) - min_j R(f_j); can be negative."""
    return aggregate_risk(theta, model) - float(model.risks().min())


def prefix_risks(losses: np.ndarray) -> np.ndarray:
    """Row k holds the empirical risks over the first k+1 observations."""
    k = np.arange(1, losses.shape[0] + 1, dtype=float)
    return np.cumsum(losses, axis=0) / k[:, None]


def progressive_mixture(dictionary: Dictionary, x, y, T: float) -> np.ndarray:
    """Average of the AEW weights built on the first k observations, k = 1..n."""
    T = check_temperature(T)
    x = np.asarray(x)
    if x.shape[0] == 0:
        raise ValueError("sample must be non-empty")
    losses = loss_matrix(dictionary.evaluate(x), y)
    return progressive_mixture_from_losses(losses, T)


def progressive_mixture_from_losses(losses: np.ndarray, T: float) -> np.ndarray:
    T = check_temperature(T)
    risks = prefix_risks(np.asarray(losses, dtype=float))
    k = np.arange(1, risks.shape[0] + 1, dtype=float)
    scaled = (k / T)[:, None] * (risks - risks.min(axis=1, keepdims=True))
    w = np.exp(-scaled)
    w /= w.sum(axis=1, keepdims=True)
    return w.mean(axis=0)


# batched kernels: one row per independent trial


def check_simplex_rows(theta: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    """Row-wise ``check_simplex`` for a (trials, M) matrix."""
    theta = np.asarray(theta, dtype=float)
    bad = (
        ~np.all(np.isfinite(theta), axis=1)
        | np.any(theta < -tol, axis=1)
        | np.any(theta > 1 + tol, axis=1)
        | (np.abs(theta.sum(axis=1) - 1.0) > tol * max(1, theta.shape[1]))
    )
    if bad.any():
        raise ValueError(f"row {int(np.flatnonzero(bad)[0])} is not a probability vector")


def aew_weights_rows(risks: np.ndarray, n: int, T: float) -> np.ndarray:
    """``aew_weights`` applied to every row of a (trials, M) risk matrix."""
    T = check_temperature(T)
    risks = np.asarray(risks, dtype=float)
    if not np.all(np.isfinite(risks)):
        raise ValueError("empirical risks must be finite")
    w = np.exp(-(n / T) * (risks - risks.min(axis=1, keepdims=True)))
    return w / w.sum(axis=1, keepdims=True)


def aggregate_excess_risk_rows(theta: np.ndarray, model: RiskModel) -> np.ndarray:
    """``aggregate_excess_risk`` for every row of a (trials, M) weight matrix."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[1] != model.size:
        raise ValueError(f"weights have shape {theta.shape}, model has size {model.size}")
    quad = np.einsum("tj,jk,tk->t", theta, model.gram, theta)
    value = model.y2 - 2.0 * theta @ model.cross + quad
    scale = max(1.0, model.y2, np.abs(model.gram).max())
    if np.any(value < -SIMPLEX_TOL * scale):
        raise ValueError("negative quadratic risk; gram is not PSD")
    return np.maximum(value, 0.0) - float(model.risks().min())
