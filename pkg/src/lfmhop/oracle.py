"""Exact equivalence classes of small binary matrices.

Two factorizations (Z, W) and (ZU, U^{-1} W) explain the same data whenever
U is regular and ZU is binary. For a full-rank Z every binary target b
determines at most one column u with Zu = b, so enumerating all 2^N targets
yields every admissible column; regular K-subsets of those columns are the
equivalent solutions up to column permutation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .binarity import defect
from .core import as_binary, note_row_scan
from .errors import DomainError, RankError, SizeError

PDC1, PDC2, PDC3 = "PDC1", "PDC2", "PDC3"
PDC_KINDS = (PDC1, PDC2, PDC3)


@dataclass
class IntegerClosureCertificate:
    """Which sufficient condition shows every member of H(Z) is an integer matrix.

    ``rows`` index a K x K submatrix of Z with |det| = 1 (taken with columns
    in ``column_order``); for condition "a" that submatrix is unit lower
    triangular.
    """

    condition: str  # "a", "b" or "none"
    rows: tuple | None = None
    column_order: tuple | None = None
    det: int | None = None

    @property
    def certified(self) -> bool:
        return self.condition != "none"


@dataclass
class EquivalenceClassReport:
    canonical_transforms: list  # K x K int arrays, columns sorted lexicographically
    candidate_columns: np.ndarray  # (M, K) admissible integer columns
    certification: IntegerClosureCertificate
    noninteger_columns: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.canonical_transforms)

    @property
    def identifiable(self) -> bool:
        # Assumes rank(W) = K; with it, a single class means identifiable.
        return self.count == 1 and self.noninteger_columns == 0

    @property
    def complete(self) -> bool:
        """True when no real (non-integer) member of H(Z) can be missing."""
        return self.noninteger_columns == 0

    def canonical_set(self) -> set:
        return {canonical_key(U) for U in self.canonical_transforms}


def canonical_form(U) -> np.ndarray:
    """Columns of U sorted lexicographically (first entry most significant)."""
    U = np.asarray(U, dtype=np.int64)
    order = sorted(range(U.shape[1]), key=lambda k: tuple(U[:, k]))
    return U[:, order]


def canonical_key(U) -> tuple:
    C = canonical_form(U)
    return tuple(tuple(int(x) for x in C[:, k]) for k in range(C.shape[1]))


def regular_subsets(columns, K: int, max_subsets: int = 50_000_000, chunk: int = 200_000) -> np.ndarray:
    """Index tuples of all K-subsets of integer ``columns`` (rows of an (M, K) array)
    that form a regular matrix.
    """
    cols = np.asarray(columns, dtype=np.int64)
    M = cols.shape[0]
    if M < K:
        return np.zeros((0, K), dtype=np.int64)
    total = math.comb(M, K)
    if total > max_subsets:
        raise SizeError(f"{total} column subsets exceed the limit {max_subsets}")
    colf = cols.astype(float)
    combos = itertools.combinations(range(M), K)
    out = []
    while True:
        block = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, chunk)), dtype=np.int64
        )
        if block.size == 0:
            break
        idx = block.reshape(-1, K)
        # mats[b] has the chosen candidates as its columns
        mats = np.transpose(colf[idx], (0, 2, 1))
        det = np.linalg.det(mats)
        out.append(idx[np.abs(det) > 0.5])
    return np.concatenate(out) if out else np.zeros((0, K), dtype=np.int64)


def assemble_transforms(columns, K: int, **kw) -> list:
    """All regular matrices (up to column order) whose columns come from ``columns``.

    ``columns`` must be sorted lexicographically and duplicate free, in which
    case each returned matrix is already in canonical form.
    """
    cols = np.asarray(columns, dtype=np.int64)
    return [cols[s].T.copy() for s in regular_subsets(cols, K, **kw)]


def _full_rank(Z) -> None:
    if np.linalg.matrix_rank(Z.astype(float)) < Z.shape[1]:
        raise RankError(f"Z ({Z.shape[0]}x{Z.shape[1]}) is not of full column rank")


def admissible_columns(Z, tol: float = 1e-8):
    """Exhaustive search over binary targets for columns u with Zu binary.

    Returns (integer columns sorted lexicographically, number of non-integer columns).
    """
    Z = as_binary(Z)
    N, K = Z.shape
    note_row_scan("oracle")
    targets = ((np.arange(1, 2**N)[None, :] >> np.arange(N)[:, None]) & 1).astype(float)
    pinv = np.linalg.pinv(Z.astype(float))
    U = pinv @ targets
    ok = np.max(np.abs(Z @ U - targets), axis=0) <= tol
    U = U[:, ok].T
    R = np.rint(U)
    integral = np.all(np.abs(U - R) <= tol, axis=1)
    cols = np.unique(R[integral].astype(np.int64), axis=0)
    return cols, int(np.count_nonzero(~integral))


def enumerate_equivalents(Z, max_N: int = 16, max_K: int = 5) -> EquivalenceClassReport:
    """Exact integer equivalence classes of a small full-rank binary Z."""
    Z = as_binary(Z)
    N, K = Z.shape
    if N > max_N or K > max_K:
        raise SizeError(f"Z is {N}x{K}; exhaustive enumeration limited to {max_N}x{max_K}")
    _full_rank(Z)
    cols, n_nonint = admissible_columns(Z)
    transforms = assemble_transforms(cols, K)
    return EquivalenceClassReport(
        canonical_transforms=transforms,
        candidate_columns=cols,
        certification=certify_integer_closure(Z),
        noninteger_columns=n_nonint,
    )


def _unit(K, i):
    e = np.zeros(K, dtype=np.int64)
    e[i] = 1
    return e


def R_matrix(i: int, j: int, K: int) -> np.ndarray:
    """I + e_j e_i^T: column i becomes e_i + e_j."""
    U = np.eye(K, dtype=np.int64)
    U[j, i] += 1
    return U


def Q_matrix(i: int, j: int, K: int) -> np.ndarray:
    """I + e_j e_i^T - 2 e_i e_i^T: column i becomes e_j - e_i (feature i inverted against j)."""
    U = np.eye(K, dtype=np.int64)
    U[j, i] += 1
    U[i, i] -= 2
    return U


def _int_inverse(U) -> np.ndarray:
    return np.rint(np.linalg.inv(U)).astype(np.int64)


def pdc_transform(kind: str, i: int, j: int, K: int) -> list:
    """The two non-permutation transforms a pairwise dependency guarantees.

    PDC1 (i, j never co-active):  [R_ij, R_ji]
    PDC2 (i active implies j):    [Q_ij, R_ji^{-1}]
    PDC3 (i inactive implies j inactive): [Q_ji, R_ij^{-1}]
    """
    if i == j:
        raise IndexError("pdc_transform needs distinct feature indices")
    if not (0 <= i < K and 0 <= j < K):
        raise IndexError(f"indices ({i}, {j}) out of range for K={K}")
    if kind == PDC1:
        return [R_matrix(i, j, K), R_matrix(j, i, K)]
    if kind == PDC2:
        return [Q_matrix(i, j, K), _int_inverse(R_matrix(j, i, K))]
    if kind == PDC3:
        return [Q_matrix(j, i, K), _int_inverse(R_matrix(i, j, K))]
    raise DomainError(f"unknown PDC kind {kind!r}")


def bias_columns(K: int, bias_index: int | None = None) -> np.ndarray:
    """e_1..e_K and e_bias - e_i for i != bias, sorted lexicographically."""
    b = K - 1 if bias_index is None else bias_index
    cols = [_unit(K, k) for k in range(K)]
    cols += [_unit(K, b) - _unit(K, i) for i in range(K) if i != b]
    return np.unique(np.array(cols), axis=0)


def bias_transform_family(K: int, bias_index: int | None = None) -> list:
    """Regular matrices built from the columns an always-on feature admits."""
    if K < 2:
        raise DomainError("bias family needs K >= 2")
    return assemble_transforms(bias_columns(K, bias_index), K)


def bias_lower_bound(K: int) -> int:
    return (K + 1) * 2 ** (K - 2)


def _first_appearance(Z) -> np.ndarray:
    return np.argmax(Z == 1, axis=0)


def certify_integer_closure(Z, exhaustive_rows: int = 16, max_random: int = 20_000, seed: int = 0):
    """Look for a sufficient condition that all of H(Z) is integral."""
    Z = as_binary(Z)
    N, K = Z.shape
    _full_rank(Z)
    first = _first_appearance(Z)
    if len(set(first.tolist())) == K:
        order = tuple(int(k) for k in np.argsort(first, kind="stable"))
        rows = tuple(int(first[k]) for k in order)
        return IntegerClosureCertificate("a", rows, order, 1)

    # Duplicate rows never help, so search over distinct rows only.
    _, uniq_idx = np.unique(Z, axis=0, return_index=True)
    uniq_idx = np.sort(uniq_idx)
    pool = np.arange(N) if N <= exhaustive_rows else uniq_idx
    order = tuple(range(K))

    def check(rows):
        sub = Z[list(rows)].astype(float)
        d = int(round(np.linalg.det(sub)))
        return d if abs(d) == 1 else None

    if math.comb(len(pool), K) <= 2_000_000:
        for rows_block in _chunks(itertools.combinations(pool.tolist(), K), 100_000):
            idx = np.array(rows_block)
            dets = np.rint(np.linalg.det(Z[idx].astype(float))).astype(np.int64)
            hit = np.flatnonzero(np.abs(dets) == 1)
            if hit.size:
                rows = tuple(int(r) for r in idx[hit[0]])
                return IntegerClosureCertificate("b", rows, order, int(dets[hit[0]]))
        return IntegerClosureCertificate("none")

    rng = np.random.default_rng(seed)
    for _ in range(max_random):
        rows = tuple(sorted(rng.choice(pool, size=K, replace=False).tolist()))
        d = check(rows)
        if d is not None:
            return IntegerClosureCertificate("b", rows, order, d)
    return IntegerClosureCertificate("none")


def _chunks(it, n):
    while True:
        block = list(itertools.islice(it, n))
        if not block:
            return
        yield block


def is_equivalent_transform(Z, U) -> bool:
    """det U != 0 and ZU binary."""
    U = np.asarray(U, dtype=np.int64)
    if abs(round(np.linalg.det(U.astype(float)))) < 1:
        return False
    return defect(np.asarray(Z, dtype=np.int64) @ U) == 0
