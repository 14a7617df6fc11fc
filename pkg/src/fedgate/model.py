"""Linear model, local empirical risk, and the seeded local solvers.

The local objective on client k is mean squared error
F_k(w) = (1/n_k) sum_i (w . x_i + b - y_i)^2.  The proximal solver
minimizes the surrogate F_k(w) + g_scale * mu * ||w - w0||^2, whose
gradient is grad F_k(w) + 2 * g_scale * mu * (w - w0); g_scale = 1/2
recovers the classic proximal surrogate F_k(w) + (mu/2) ||w - w0||^2.

Every solver is a pure function of (inputs, seed): repeated calls are
bit-identical.  The bias is an ordinary coordinate of the weight vector,
included in distances and in gating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ClientDataset, Dataset
from .errors import DataError, DivergenceError


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Model parameters: feature coefficients plus a bias coordinate."""

    coefficients: np.ndarray
    bias: float

    def __post_init__(self):
        coef = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if not np.all(np.isfinite(coef)) or not np.isfinite(self.bias):
            raise DataError("weight vector contains non-finite entries")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.coefficients.shape[0]

    def as_array(self) -> np.ndarray:
        """Augmented view [coefficients..., bias]."""
        return np.concatenate([self.coefficients, [self.bias]])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "WeightVector":
        arr = np.asarray(arr, dtype=float)
        return cls(coefficients=arr[:-1].copy(), bias=float(arr[-1]))

    @classmethod
    def zeros(cls, dim: int) -> "WeightVector":
        return cls(coefficients=np.zeros(dim), bias=0.0)

    def equals(self, other: "WeightVector") -> bool:
        """Bitwise equality, the determinism contract."""
        return np.array_equal(self.as_array(), other.as_array())

    def distance_to(self, other: "WeightVector") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))


@dataclass(frozen=True)
class LocalSolveConfig:
    """Knobs for one client's local optimization pass."""

    epochs: int
    learning_rate: float
    batch_size: int = 32
    mu: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise DataError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.mu < 0:
            raise DataError("mu must be >= 0")


@dataclass(frozen=True)
class InexactnessReport:
    """Measured solution quality: surrogate gradient-norm ratio."""

    beta: float
    grad_norm_at_solution: float
    grad_norm_at_start: float
    already_stationary: bool = False


def predict(w: WeightVector, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (w.dim,):
        raise DataError(f"feature vector shape {x.shape} does not match model dim {w.dim}")
    return float(w.coefficients @ x + w.bias)


def local_loss(w: WeightVector, data: ClientDataset) -> float:
    """Mean squared error of the model on one client's data."""
    residuals = data.features @ w.coefficients + w.bias - data.targets
    return float(np.mean(residuals**2))


def _loss_gradient_array(w_arr: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    residuals = X @ w_arr[:-1] + w_arr[-1] - y
    grad = np.empty_like(w_arr)
    grad[:-1] = 2.0 * (X.T @ residuals) / y.shape[0]
    grad[-1] = 2.0 * residuals.mean()
    return grad


def gradient(w: WeightVector, data: ClientDataset) -> WeightVector:
    """Exact gradient of local_loss at w, in weight-vector shape."""
    arr = _loss_gradient_array(w.as_array(), data.features, data.targets)
    return WeightVector.from_array(arr)


def _surrogate_gradient_array(
    w_arr: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    prox_coeff: float,
    anchor: np.ndarray,
) -> np.ndarray:
    grad = _loss_gradient_array(w_arr, X, y)
    if prox_coeff != 0.0:
        grad = grad + prox_coeff * (w_arr - anchor)
    return grad


def _run_sgd(
    w0_arr: np.ndarray,
    data: ClientDataset,
    cfg: LocalSolveConfig,
    prox_coeff: float,
) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    w = w0_arr.copy()
    anchor = w0_arr
    n = data.n_k
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grad = _surrogate_gradient_array(
                w, data.features[batch], data.targets[batch], prox_coeff, anchor
            )
            w = w - cfg.learning_rate * grad
            if not np.all(np.isfinite(w)):
                raise DivergenceError(
                    f"weights became non-finite during epoch {epoch}", epoch=epoch
                )
    return w


def sgd_local(w0: WeightVector, data: ClientDataset, cfg: LocalSolveConfig) -> WeightVector:
    """Plain mini-batch SGD on the local loss for cfg.epochs passes.

    Shuffles once per epoch from cfg.seed; cfg.mu is ignored.
    """
    return WeightVector.from_array(_run_sgd(w0.as_array(), data, cfg, prox_coeff=0.0))


def prox_local(
    w0: WeightVector,
    data: ClientDataset,
    cfg: LocalSolveConfig,
    g_scale: float = 0.5,
) -> WeightVector:
    """Mini-batch SGD on the proximal surrogate anchored at w0.

    The surrogate gradient is grad F(w) + 2 * g_scale * cfg.mu * (w - w0).
    With g_scale = 0 or mu = 0 this reduces bitwise to sgd_local.
    """
    if g_scale < 0:
        raise DataError("g_scale must be >= 0")
    return WeightVector.from_array(
        _run_sgd(w0.as_array(), data, cfg, prox_coeff=2.0 * g_scale * cfg.mu)
    )


def measure_inexactness(
    w_star: WeightVector,
    w0: WeightVector,
    data: ClientDataset,
    mu: float,
    g_scale: float = 0.5,
) -> InexactnessReport:
    """Ratio of surrogate gradient norms at the solution vs the start.

    At the anchor the proximal term vanishes, so the denominator is just
    ||grad F(w0)||.  A zero denominator is reported as already stationary
    rather than raised.
    """
    anchor = w0.as_array()
    prox_coeff = 2.0 * g_scale * mu
    g_star = _surrogate_gradient_array(
        w_star.as_array(), data.features, data.targets, prox_coeff, anchor
    )
    g_start = _loss_gradient_array(anchor, data.features, data.targets)
    norm_star = float(np.linalg.norm(g_star))
    norm_start = float(np.linalg.norm(g_start))
    if norm_start == 0.0:
        return InexactnessReport(0.0, norm_star, 0.0, already_stationary=True)
    return InexactnessReport(norm_star / norm_start, norm_star, norm_start)


def fit_line(x: np.ndarray, y: np.ndarray) -> WeightVector:
    """Closed-form least squares line through (x, y) samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    var = np.mean((x - x.mean()) ** 2)
    if var == 0.0:
        raise DataError("least squares degenerate: all x values equal")
    slope = np.mean((x - x.mean()) * (y - y.mean())) / var
    intercept = y.mean() - slope * x.mean()
    return WeightVector(coefficients=np.array([slope]), bias=float(intercept))


def fit_least_squares(dataset: Dataset, x_col: str, y_col: str) -> WeightVector:
    """Ordinary least squares slope/intercept for one column pair."""
    return fit_line(dataset.column(x_col), dataset.column(y_col))
