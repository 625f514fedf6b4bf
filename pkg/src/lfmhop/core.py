"""Core data model for linear-Gaussian latent feature models.

Matrices are plain numpy arrays: ``Z`` is an N x K array of 0/1 entries,
``W`` is a K x D real array and ``X`` the N x D observations.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError, DomainError

# Instrumentation: every routine that reads all N rows of a data-sized matrix
# bumps this counter, so callers can assert that a hot loop never does.
ROW_SCANS: collections.Counter = collections.Counter()


def note_row_scan(tag: str) -> None:
    ROW_SCANS[tag] += 1


def total_row_scans() -> int:
    return sum(ROW_SCANS.values())


def as_binary(Z, name="Z") -> np.ndarray:
    """Validate ``Z`` as a non-empty 2-D 0/1 matrix and return it as int64."""
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[0] < 1 or Z.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {Z.shape}")
    if not np.all((Z == 0) | (Z == 1)):
        raise DomainError(f"{name} has entries outside {{0,1}}")
    return Z.astype(np.int64, copy=False)


def as_features(W, name="W") -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise DomainError(f"{name} has non-finite entries")
    return W


def _check_product_shapes(X, Z, W):
    if X.ndim != 2:
        raise DimensionError(f"X must be 2-D, got shape {X.shape}")
    if Z.shape[0] != X.shape[0] or Z.shape[1] != W.shape[0] or W.shape[1] != X.shape[1]:
        raise DimensionError(
            f"shape mismatch: X {X.shape}, Z {Z.shape}, W {W.shape}"
        )


@dataclass(frozen=True)
class LfmInstance:
    """Observed data with the hyperparameters of the linear-Gaussian model.

    ``tau`` is the ridge weight sigma_x**2 / sigma_w**2 of the MAP objective.
    ``pi`` holds per-feature incidence probabilities (default: all 1/2).
    """

    X: np.ndarray
    sigma_x: float = 0.0
    sigma_w: float = 1.0
    pi: np.ndarray | None = None
    tau: float | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DimensionError(f"X must be 2-D, got shape {X.shape}")
        if self.sigma_x < 0 or self.sigma_w <= 0:
            raise DomainError("need sigma_x >= 0 and sigma_w > 0")
        object.__setattr__(self, "X", X)
        ratio = float(self.sigma_x) ** 2 / float(self.sigma_w) ** 2
        if self.tau is None:
            object.__setattr__(self, "tau", ratio)
        elif abs(self.tau - ratio) > 1e-12 * max(abs(ratio), 1e-300):
            raise DomainError(f"tau={self.tau} inconsistent with sigma_x/sigma_w ({ratio})")
        if self.pi is not None:
            pi = np.asarray(self.pi, dtype=float)
            if np.any(pi <= 0) or np.any(pi >= 1):
                raise DomainError("feature probabilities must lie strictly in (0, 1)")
            object.__setattr__(self, "pi", pi)

    @classmethod
    def from_tau(cls, X, tau: float, pi=None) -> "LfmInstance":
        """Build an instance with sigma_w = 1 and the given ridge weight."""
        if tau < 0:
            raise DomainError("tau must be nonnegative")
        return cls(X, sigma_x=float(np.sqrt(tau)), sigma_w=1.0, pi=pi, tau=float(tau))

    def feature_probs(self, K: int) -> np.ndarray:
        if self.pi is None:
            return np.full(K, 0.5)
        if self.pi.shape != (K,):
            raise DimensionError(f"pi has shape {self.pi.shape}, expected ({K},)")
        return self.pi


@dataclass(frozen=True)
class SolutionPair:
    """A factorization (Z, W) of X with cached residual and Gram data."""

    Z: np.ndarray
    W: np.ndarray
    residual: float
    gram: np.ndarray
    colsum: np.ndarray

    @classmethod
    def build(cls, X, Z, W) -> "SolutionPair":
        Z = as_binary(Z)
        W = as_features(W)
        return cls(Z, W, residual(X, Z, W), gram_matrix(Z), Z.sum(axis=0))


def gram_matrix(Z) -> np.ndarray:
    """Integer Gram matrix Z^T Z."""
    Z = np.asarray(Z, dtype=np.int64)
    note_row_scan("gram")
    return Z.T @ Z


def residual(X, Z, W) -> float:
    """Frobenius norm of X - ZW."""
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z)
    W = np.asarray(W, dtype=float)
    _check_product_shapes(X, Z, W)
    note_row_scan("residual")
    return float(np.linalg.norm(X - Z @ W))


def map_objective(inst: LfmInstance, Z, W) -> float:
    """||X - ZW||_F^2 + tau ||W||_F^2."""
    r = residual(inst.X, Z, W)
    W = np.asarray(W, dtype=float)
    return r * r + inst.tau * float(np.sum(W * W))


def solve_w_given_z(inst: LfmInstance, Z) -> np.ndarray:
    """Closed-form minimizer of the MAP objective over W for fixed Z.

    Solves (Z^T Z + tau I) W = Z^T X. With tau = 0 the minimum-norm
    least-squares solution is returned, which also covers rank-deficient Z.
    """
    X = inst.X
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != X.shape[0]:
        raise DimensionError(f"Z shape {Z.shape} incompatible with X {X.shape}")
    note_row_scan("solve_w")
    if inst.tau == 0:
        W, *_ = np.linalg.lstsq(Z, X, rcond=None)
        return W
    K = Z.shape[1]
    A = Z.T @ Z + inst.tau * np.eye(K)
    return np.linalg.solve(A, Z.T @ X)


def column_mismatch_counts(Z, Z_star) -> np.ndarray:
    """K x K matrix whose (i, j) entry counts rows where Z[:, i] != Z_star[:, j]."""
    Z = np.asarray(Z, dtype=np.int64)
    Zs = np.asarray(Z_star, dtype=np.int64)
    N = Z.shape[0]
    agree_ones = Z.T @ Zs
    agree_zeros = (1 - Z).T @ (1 - Zs)
    return N - agree_ones - agree_zeros


def hamming_error(Z, Z_star, allow_complement: bool = False) -> float:
    """Fraction of mismatched entries after the best column matching.

    The matching is an exact linear assignment over column permutations.
    With ``allow_complement`` a column may also be matched to the complement
    of its partner, a diagnostic for inverted features.
    """
    Z = as_binary(Z)
    Z_star = as_binary(Z_star, "Z_star")
    if Z.shape != Z_star.shape:
        raise DimensionError(f"shape mismatch: {Z.shape} vs {Z_star.shape}")
    N, K = Z.shape
    cost = column_mismatch_counts(Z, Z_star)
    if allow_complement:
        cost = np.minimum(cost, N - cost)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum()) / (N * K)


def regularizer_metric(W) -> float:
    """||W||_F / (K D)."""
    W = np.asarray(W, dtype=float)
    K, D = W.shape
    return float(np.linalg.norm(W)) / (K * D)
