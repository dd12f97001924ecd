"""Ridge-stabilized linear least squares for lag features.

Solves min over (beta, intercept) of (1/n)||X beta + intercept - y||^2
+ ridge * ||beta||^2. The intercept is handled by centering and is exempt
from the penalty. Lag matrices are ill-conditioned by construction (adjacent
hours correlate strongly), so the solve goes through an orthogonal
factorization of an augmented system instead of explicit normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, DomainError, NumericalFailure

# Scale factor for the automatic stabilization ridge.
_AUTO_RIDGE = 1e-10


def default_ridge(X: np.ndarray) -> float:
    """Stabilization default: 1e-10 * trace(X^T X) / d (0 for an all-zero X)."""
    X = np.asarray(X, dtype=float)
    return _AUTO_RIDGE * float(np.square(X).sum()) / X.shape[1]


@dataclass(frozen=True)
class LinearCoefficients:
    """Fitted affine predictor: y_hat = X @ beta + intercept."""

    beta: np.ndarray
    intercept: float

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float).reshape(-1).copy()
        if not np.isfinite(beta).all() or not np.isfinite(self.intercept):
            raise NumericalFailure("coefficients must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "intercept", float(self.intercept))

    def to_dict(self) -> dict:
        # JSON floats use shortest round-trip repr, so this is lossless.
        return {"beta": self.beta.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, payload: dict) -> "LinearCoefficients":
        beta = np.array(payload["beta"], dtype=float)
        return cls(beta, float(payload["intercept"]))


def fit_linear(
    X: np.ndarray,
    y: np.ndarray,
    ridge: Optional[float] = None,
    intercept: bool = True,
) -> LinearCoefficients:
    """Fit the penalized least-squares problem.

    ``ridge=None`` applies the automatic stabilization default; pass 0 for
    the unpenalized problem (rank-deficient cases then get the minimum-norm
    solution). ``intercept=False`` drops the offset term entirely, matching
    the bare objective (1/n)||X beta - y||^2 + ridge ||beta||^2.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DomainError(f"X must be a nonempty 2-D matrix, got shape {X.shape}")
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, y has {y.shape[0]}")
    if ridge is None:
        ridge = default_ridge(X)
    if ridge < 0:
        raise DomainError(f"ridge must be >= 0, got {ridge}")

    n, d = X.shape
    if intercept:
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        Xc = X - x_mean
        yc = y - y_mean
    else:
        x_mean = np.zeros(d)
        y_mean = 0.0
        Xc, yc = X, y

    # (1/n)||Xc b - yc||^2 + ridge ||b||^2 as one stacked least-squares
    # problem: rows Xc over sqrt(n * ridge) * I, zero targets for the
    # penalty block.
    if ridge > 0:
        A = np.vstack([Xc, np.sqrt(n * ridge) * np.eye(d)])
        b = np.concatenate([yc, np.zeros(d)])
    else:
        A, b = Xc, yc
    try:
        beta, *_ = np.linalg.lstsq(A, b, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"least-squares factorization failed: {exc}") from exc
    offset = y_mean - float(x_mean @ beta) if intercept else 0.0
    return LinearCoefficients(beta, offset)


def predict_linear(model: LinearCoefficients, X_new: np.ndarray) -> np.ndarray:
    """Affine prediction X_new @ beta + intercept for each row."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != model.beta.shape[0]:
        raise DimensionMismatch(
            f"model expects {model.beta.shape[0]} features, got {X_new.shape[1]}"
        )
    return X_new @ model.beta + model.intercept
