"""Binarity defect f(M) = 1/2 sum m (m - 1) and its sphere geometry.

For a full-rank binary Z and an integer column u, f(Zu) depends on Z only
through the Gram matrix Z^T Z and the column sums Z^T 1, which makes the
defect O(K^2) to evaluate. Writing s = Lambda^{-1} u with
Lambda Lambda^T = (Z^T Z)^{-1} and mu = Lambda^T Z^T 1 / 2 turns the
zero-defect condition into "s lies on the sphere of radius ||mu|| around mu".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_binary, note_row_scan
from .errors import DimensionError, DomainError, RankError

RANK_RTOL = 1e-8


def _as_integer(M, name="M") -> np.ndarray:
    A = np.asarray(M)
    if A.dtype.kind in "iub":
        return A.astype(np.int64, copy=False)
    if A.dtype.kind != "f" or not np.all(np.isfinite(A)) or np.any(A != np.round(A)):
        raise DomainError(f"{name} must have integer entries")
    return A.astype(np.int64)


def defect(M) -> int:
    """Exact binarity defect of an integer matrix (or vector)."""
    A = _as_integer(M)
    return int(np.sum(A * (A - 1)) // 2)


def defect_column(gram, colsum, u) -> int:
    """f(Zu) from the Gram data of Z, in exact integer arithmetic."""
    u = _as_integer(u, "u")
    gram = np.asarray(gram, dtype=np.int64)
    colsum = np.asarray(colsum, dtype=np.int64)
    if u.shape != colsum.shape:
        raise DimensionError(f"u has shape {u.shape}, expected {colsum.shape}")
    return int((u @ gram @ u - u @ colsum) // 2)


def defect_columns(gram, colsum, U) -> np.ndarray:
    """Vectorized ``defect_column`` over the rows of an (M, K) integer array."""
    U = _as_integer(U, "U")
    gram = np.asarray(gram, dtype=np.int64)
    colsum = np.asarray(colsum, dtype=np.int64)
    quad = np.einsum("mi,ij,mj->m", U, gram, U)
    return (quad - U @ colsum) // 2


@dataclass(frozen=True)
class SphereGeometry:
    Lambda: np.ndarray
    mu: np.ndarray
    mu_norm_sq: float
    gram: np.ndarray
    colsum: np.ndarray
    # Lambda = psi @ diag(1/sigma); kept so Lambda^{-1} never needs inverting.
    sigma: np.ndarray
    psi: np.ndarray

    @property
    def K(self) -> int:
        return self.mu.shape[0]

    def to_sphere(self, u) -> np.ndarray:
        """s = Lambda^{-1} u for a vector or the rows of an (M, K) array."""
        u = np.asarray(u, dtype=float)
        return (u @ self.psi) * self.sigma


def build_geometry(Z) -> SphereGeometry:
    """SVD-based sphere geometry of a full-column-rank binary matrix."""
    Z = as_binary(Z)
    note_row_scan("geometry")
    _, sigma, psi_t = np.linalg.svd(Z.astype(float), full_matrices=False)
    K = Z.shape[1]
    if Z.shape[0] < K or sigma[-1] <= RANK_RTOL * sigma[0]:
        small = sigma[sigma <= RANK_RTOL * sigma[0]] if Z.shape[0] >= K else sigma
        raise RankError(
            f"Z ({Z.shape[0]}x{K}) is not of full column rank; "
            f"deficient singular values: {np.array2string(small, precision=3)}"
        )
    psi = psi_t.T
    Lam = psi / sigma
    colsum = Z.sum(axis=0)
    mu = 0.5 * Lam.T @ colsum
    return SphereGeometry(
        Lambda=Lam,
        mu=mu,
        mu_norm_sq=float(mu @ mu),
        gram=Z.T @ Z,
        colsum=colsum,
        sigma=sigma,
        psi=psi,
    )


def defect_via_sphere(geom: SphereGeometry, u) -> float:
    """Floating-point f(Zu) evaluated as ||s - mu||^2 / 2 - ||mu||^2 / 2."""
    s = geom.to_sphere(u)
    d = s - geom.mu
    return 0.5 * float(d @ d) - 0.5 * geom.mu_norm_sq
