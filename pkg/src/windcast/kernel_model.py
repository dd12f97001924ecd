"""Gaussian-kernel ridge regression, exact and Nystrom-approximated.

The exact solver factorizes the full regularized kernel matrix and exists
mainly as a ground truth for small problems. The production path samples
``m`` centers uniformly from the training set and solves the reduced system

    (K_nm^T K_nm + n * lam * K_mm) w = K_nm^T y

with conjugate gradients, preconditioned by Cholesky factors of the center
matrix so that the preconditioned operator is close to the identity when the
low-rank approximation is good. Features are standardized with training
statistics before any kernel evaluation (a single length-scale is
meaningless across columns of different magnitude); the scaler rides along
in the model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from .errors import (
    CgNotConverged,
    DimensionMismatch,
    DomainError,
    MTooLarge,
    NumericalFailure,
)

# Jitter scale for the center-matrix Cholesky.
_CHOL_JITTER = 1e-9


@dataclass(frozen=True)
class KernelParams:
    """Gaussian kernel length-scale and ridge regularization strength."""

    sigma: float
    lam: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"lambda must be positive, got {self.lam}")


@dataclass(frozen=True)
class CgOptions:
    """Conjugate-gradient stopping rule: iteration cap and relative tolerance."""

    max_iters: int = 500
    tolerance: float = 1e-7

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (math.isfinite(self.tolerance) and self.tolerance > 0):
            raise DomainError(f"tolerance must be positive, got {self.tolerance}")


@dataclass(frozen=True)
class CgResult:
    """Outcome of one CG run. ``residuals`` is the running-best relative
    preconditioned residual per recorded iteration, so it is non-increasing;
    the returned weights correspond to the iterate that achieved its last
    entry."""

    converged: bool
    iterations: int
    residuals: tuple[float, ...]


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature affine map x -> (x - mean) / std frozen at fit time."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).reshape(-1).copy()
        std = np.asarray(self.std, dtype=float).reshape(-1).copy()
        if mean.shape != std.shape:
            raise DimensionMismatch("mean and std must have equal length")
        if (std <= 0).any() or not np.isfinite(std).all():
            raise DomainError("std entries must be positive and finite")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def fit(cls, X: np.ndarray) -> "FeatureScaler":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        # Constant columns carry no scale information; leave them centered.
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    @classmethod
    def identity(cls, d: int) -> "FeatureScaler":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.mean.shape[0]:
            raise DimensionMismatch(
                f"scaler expects {self.mean.shape[0]} features, got {X.shape[1]}"
            )
        return (X - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureScaler":
        return cls(np.array(payload["mean"], float), np.array(payload["std"], float))


# ---------------------------------------------------------------------------
# kernel evaluation
# ---------------------------------------------------------------------------

def gaussian_kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> float:
    """exp(-||a - b||^2 / (2 sigma^2)) for two points."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatch(f"points differ in length: {a.shape} vs {b.shape}")
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    diff = a - b
    return float(np.exp(-(diff @ diff) / (2.0 * sigma * sigma)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian kernel between all row pairs: shape (len(A), len(B)).

    Uses the expanded squared-distance form; tiny negative squared distances
    from cancellation are clipped to zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"feature counts differ: {A.shape[1]} vs {B.shape[1]}")
    a2 = np.square(A).sum(axis=1)[:, None]
    b2 = np.square(B).sum(axis=1)[None, :]
    sq = np.clip(a2 + b2 - 2.0 * (A @ B.T), 0.0, None)
    return np.exp(-sq / (2.0 * sigma * sigma))


# ---------------------------------------------------------------------------
# exact solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactKrrModel:
    """Dense-solve kernel ridge model: alpha = (K + n lam I)^{-1} y."""

    training_points: np.ndarray
    alpha: np.ndarray
    params: KernelParams
    scaler: FeatureScaler

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.training_points, dtype=float)).copy()
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1).copy()
        if pts.shape[0] != alpha.shape[0]:
            raise DimensionMismatch("one dual weight per training point required")
        pts.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "training_points", pts)
        object.__setattr__(self, "alpha", alpha)


def fit_exact(
    X: np.ndarray,
    y: np.ndarray,
    params: KernelParams,
    standardize: bool = True,
) -> ExactKrrModel:
    """Solve (K + n lam I) alpha = y by Cholesky factorization.

    Quadratic memory and cubic time in n; intended for oracles, small data
    and cross-checks rather than production fits.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    if n == 0 or y.shape[0] != n:
        raise DimensionMismatch(f"X has {n} rows, y has {y.shape[0]}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DomainError("X and y must be finite")
    scaler = FeatureScaler.fit(X) if standardize else FeatureScaler.identity(X.shape[1])
    Xs = scaler.transform(X)
    K = kernel_matrix(Xs, Xs, params.sigma)
    K[np.diag_indices_from(K)] += n * params.lam
    try:
        alpha = cho_solve(cho_factor(K, lower=False), y)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Cholesky solve failed: {exc}") from exc
    return ExactKrrModel(Xs, alpha, params, scaler)


# ---------------------------------------------------------------------------
# Nystrom solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NystromModel:
    """Reduced kernel model over m sampled centers."""

    centers: np.ndarray
    weights: np.ndarray
    params: KernelParams
    scaler: FeatureScaler
    seed: int
    cg_result: CgResult

    def __post_init__(self) -> None:
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float)).copy()
        weights = np.asarray(self.weights, dtype=float).reshape(-1).copy()
        if centers.shape[0] != weights.shape[0]:
            raise DimensionMismatch("one weight per center required")
        if not np.isfinite(weights).all():
            raise NumericalFailure("weights must be finite")
        centers.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        return {
            "params": {"sigma": self.params.sigma, "lam": self.params.lam},
            "seed": self.seed,
            "scaler": self.scaler.to_dict(),
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NystromModel":
        params = KernelParams(**payload["params"])
        return cls(
            np.array(payload["centers"], float),
            np.array(payload["weights"], float),
            params,
            FeatureScaler.from_dict(payload["scaler"]),
            int(payload["seed"]),
            CgResult(True, 0, (0.0,)),
        )


def default_centers(n: int) -> int:
    """Default center count: ceil(10 sqrt(n)), capped at n."""
    return min(n, math.ceil(10.0 * math.sqrt(n)))


def sample_centers(X: np.ndarray, m: int, seed: int) -> np.ndarray:
    """m distinct rows of X, uniformly without replacement, fixed by seed."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if m > n:
        raise MTooLarge(f"m = {m} exceeds the {n} training rows")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=m, replace=False)
    return X[idx].copy()


def fit_nystrom(
    X: np.ndarray,
    y: np.ndarray,
    params: KernelParams,
    m: Optional[int] = None,
    cg: CgOptions = CgOptions(),
    seed: int = 0,
    standardize: bool = True,
) -> NystromModel:
    """Fit the reduced system (K_nm^T K_nm + n lam K_mm) w = K_nm^T y.

    CG stops when the relative preconditioned residual drops below
    ``cg.tolerance`` or at ``cg.max_iters``; in the latter case a
    CgNotConverged warning carries the achieved residual and the model is
    still returned with the best iterate found.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    if n == 0 or y.shape[0] != n:
        raise DimensionMismatch(f"X has {n} rows, y has {y.shape[0]}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DomainError("X and y must be finite")
    if m is None:
        m = default_centers(n)
    scaler = FeatureScaler.fit(X) if standardize else FeatureScaler.identity(X.shape[1])
    Xs = scaler.transform(X)
    centers = sample_centers(Xs, m, seed)

    K_nm = kernel_matrix(Xs, centers, params.sigma)
    K_mm = kernel_matrix(centers, centers, params.sigma)
    lam_n = n * params.lam

    # Preconditioner: with K_mm = U^T U, the heuristic K_nm^T K_nm ~
    # (n/m) K_mm^2 turns the system matrix into U^T ((n/m) U U^T +
    # n lam I) U = (A U)^T (A U), so P = A U whitens it approximately.
    jitter = _CHOL_JITTER * float(np.trace(K_mm)) / m
    try:
        U = cholesky(K_mm + jitter * np.eye(m), lower=False)
        inner = (n / m) * (U @ U.T) + lam_n * np.eye(m)
        A = cholesky(inner, lower=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"preconditioner factorization failed: {exc}") from exc

    def apply_p_inv(v: np.ndarray) -> np.ndarray:
        return solve_triangular(U, solve_triangular(A, v, lower=False), lower=False)

    def apply_p_inv_t(v: np.ndarray) -> np.ndarray:
        return solve_triangular(
            A, solve_triangular(U, v, lower=False, trans="T"), lower=False, trans="T"
        )

    def apply_h(v: np.ndarray) -> np.ndarray:
        return K_nm.T @ (K_nm @ v) + lam_n * (K_mm @ v)

    def matvec(u: np.ndarray) -> np.ndarray:
        return apply_p_inv_t(apply_h(apply_p_inv(u)))

    b_hat = apply_p_inv_t(K_nm.T @ y)
    b_norm = float(np.linalg.norm(b_hat))
    if b_norm == 0.0:
        weights = np.zeros(m)
        return NystromModel(centers, weights, params, scaler, seed,
                            CgResult(True, 0, (0.0,)))

    u = np.zeros(m)
    r = b_hat.copy()
    p = r.copy()
    rs = float(r @ r)
    best_rel = math.sqrt(rs) / b_norm
    best_u = u.copy()
    reported = [best_rel]
    iterations = 0
    for iterations in range(1, cg.max_iters + 1):
        hp = matvec(p)
        denom = float(p @ hp)
        if denom <= 0 or not math.isfinite(denom):
            break  # loss of positive definiteness in finite precision
        step = rs / denom
        u = u + step * p
        r = r - step * hp
        rs_new = float(r @ r)
        rel = math.sqrt(rs_new) / b_norm
        if rel < best_rel:
            best_rel = rel
            best_u = u.copy()
        reported.append(best_rel)
        if best_rel < cg.tolerance:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new

    weights = apply_p_inv(best_u)
    converged = best_rel < cg.tolerance
    result = CgResult(converged, iterations, tuple(reported))
    if not converged:
        warnings.warn(
            CgNotConverged(
                f"CG stopped after {iterations} iterations at relative "
                f"residual {best_rel:.3e} (tolerance {cg.tolerance:.1e})"
            )
        )
    return NystromModel(centers, weights, params, scaler, seed, result)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

KrrModel = Union[ExactKrrModel, NystromModel]


def predict(model: KrrModel, X_new: np.ndarray) -> np.ndarray:
    """Kernel expansion at the stored points: k(x, points) @ weights."""
    X_new = np.asarray(X_new, dtype=float)
    if X_new.size == 0 and (X_new.ndim < 2 or X_new.shape[1] != 0):
        return np.empty(0)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    Xs = model.scaler.transform(X_new)
    if isinstance(model, ExactKrrModel):
        return kernel_matrix(Xs, model.training_points, model.params.sigma) @ model.alpha
    return kernel_matrix(Xs, model.centers, model.params.sigma) @ model.weights
