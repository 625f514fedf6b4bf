"""Synthetic latent feature model instances.

Features are 30x30 images that are zero except for one randomly placed 7x7
patch of standard normal values. Incidence matrices come in three flavours:
i.i.d. Bernoulli, i.i.d. plus an always-on bias feature, and i.i.d. with
planted pairwise dependencies enforced by row-wise rejection.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import LfmInstance
from .errors import ConfigError, DimensionError, GenerationError
from .oracle import PDC1, PDC2, PDC3, PDC_KINDS, Q_matrix

IID, BIAS, PDC = "iid", "bias", "pdc"
MAX_RANK_RETRIES = 100


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    K: int
    N: int
    D: int = 900
    p: float = 0.5
    n_pairs: int = 1
    kinds: tuple | None = None  # one PDC kind per planted pair; None draws them at random
    image_side: int = 30
    patch_side: int = 7
    noise_sigma: float = 0.1
    nonnegative_features: bool = False
    rng_seed: int = 0

    REQUIRED = ("kind", "K", "N")

    def __post_init__(self):
        if self.kind not in (IID, BIAS, PDC):
            raise ConfigError(f"kind must be one of iid/bias/pdc, got {self.kind!r}")
        if self.K < 1 or self.N < 1:
            raise ConfigError("K and N must be positive")
        if not 0 < self.p < 1:
            raise ConfigError("p must lie in (0, 1)")
        if self.patch_side > self.image_side:
            raise ConfigError("patch does not fit in the image")
        if self.kind == PDC:
            if self.n_pairs < 1 or 2 * self.n_pairs > self.K:
                raise ConfigError(f"cannot plant {self.n_pairs} disjoint pairs among K={self.K} features")
            if self.kinds is not None:
                if len(self.kinds) != self.n_pairs or any(k not in PDC_KINDS for k in self.kinds):
                    raise ConfigError(f"kinds must list {self.n_pairs} entries from {PDC_KINDS}")
        if self.kind == BIAS and self.K < 2:
            raise ConfigError("bias generator needs K >= 2")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        missing = [f for f in cls.REQUIRED if f not in d]
        if missing:
            raise ConfigError(f"generator spec is missing required field {missing[0]!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown generator spec field {unknown[0]!r}")
        d = dict(d)
        if d.get("kinds") is not None:
            d["kinds"] = tuple(d["kinds"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["kinds"] is not None:
            d["kinds"] = list(d["kinds"])
        return d

    def with_(self, **kw) -> "GeneratorSpec":
        return dataclasses.replace(self, **kw)


def _rng(spec, rng):
    return np.random.default_rng(spec.rng_seed) if rng is None else rng


def gen_features(spec: GeneratorSpec, rng=None) -> np.ndarray:
    """K x D feature images, each a single random patch of N(0, 1) values."""
    side, ps = spec.image_side, spec.patch_side
    if spec.D != side * side:
        raise DimensionError(f"D={spec.D} does not match a {side}x{side} image")
    rng = _rng(spec, rng)
    W = np.zeros((spec.K, side, side))
    for k in range(spec.K):
        r, c = rng.integers(0, side - ps + 1, size=2)
        W[k, r : r + ps, c : c + ps] = rng.standard_normal((ps, ps))
    if spec.nonnegative_features:
        W = np.abs(W)
    return W.reshape(spec.K, spec.D)


def satisfies(rows, i: int, j: int, kind: str) -> np.ndarray:
    """Row-wise truth of a pairwise dependency between columns i and j."""
    zi, zj = rows[..., i], rows[..., j]
    if kind == PDC1:
        return ~((zi == 1) & (zj == 1))
    if kind == PDC2:
        return ~((zi == 1) & (zj == 0))
    if kind == PDC3:
        return ~((zi == 0) & (zj == 1))
    raise ValueError(f"unknown PDC kind {kind!r}")


def gen_z_constrained(N: int, K: int, constraints, p: float, rng, max_rounds: int = 10_000) -> np.ndarray:
    """Bernoulli(p) rows, each redrawn until it meets every (i, j, kind) constraint."""
    Z = (rng.random((N, K)) < p).astype(np.int64)
    for _ in range(max_rounds):
        bad = np.zeros(N, dtype=bool)
        for i, j, kind in constraints:
            bad |= ~satisfies(Z, i, j, kind)
        n_bad = int(bad.sum())
        if n_bad == 0:
            return Z
        Z[bad] = (rng.random((n_bad, K)) < p).astype(np.int64)
    raise GenerationError("row rejection did not converge; constraints may be unsatisfiable")


def planted_pairs(spec: GeneratorSpec, rng) -> list:
    """Disjoint pairs (0,1), (2,3), ... with their PDC kinds."""
    kinds = spec.kinds
    if kinds is None:
        kinds = tuple(PDC_KINDS[int(x)] for x in rng.integers(0, 3, size=spec.n_pairs))
    return [(2 * m, 2 * m + 1, kinds[m]) for m in range(spec.n_pairs)]


def gen_z(spec: GeneratorSpec, rng=None, return_pairs: bool = False):
    """Full-column-rank incidence matrix for the spec's generator kind."""
    rng = _rng(spec, rng)
    N, K = spec.N, spec.K
    pairs = planted_pairs(spec, rng) if spec.kind == PDC else []
    for _ in range(MAX_RANK_RETRIES):
        if spec.kind == PDC:
            Z = gen_z_constrained(N, K, pairs, spec.p, rng)
        else:
            Z = (rng.random((N, K)) < spec.p).astype(np.int64)
            if spec.kind == BIAS:
                Z[:, K - 1] = 1
        if np.linalg.matrix_rank(Z.astype(float)) == K:
            return (Z, pairs) if return_pairs else Z
    raise GenerationError(f"no rank-{K} incidence matrix after {MAX_RANK_RETRIES} attempts")


def gen_instance(spec: GeneratorSpec, rng=None):
    """(X, Z*, W*, inst) with X = Z* W* + Gaussian noise of std ``noise_sigma``."""
    rng = _rng(spec, rng)
    Z = gen_z(spec, rng)
    W = gen_features(spec, rng)
    X = Z @ W
    if spec.noise_sigma > 0:
        X = X + spec.noise_sigma * rng.standard_normal(X.shape)
    inst = LfmInstance(X, sigma_x=spec.noise_sigma, sigma_w=1.0)
    return X, Z, W, inst


def make_inverted_solution(Z, W, bias_index: int, i: int):
    """Equivalent pair in which feature i is complemented and absorbed by the bias.

    Column i of Z becomes 1 - z_i, row i of W becomes -w_i and the bias row
    becomes w_bias + w_i.
    """
    Z = np.asarray(Z, dtype=np.int64)
    W = np.asarray(W, dtype=float)
    if not np.all(Z[:, bias_index] == 1):
        raise ValueError(f"column {bias_index} is not an all-ones bias feature")
    if i == bias_index:
        raise ValueError("cannot invert the bias feature against itself")
    U = Q_matrix(i, bias_index, Z.shape[1])
    Z2 = Z @ U
    W2 = np.linalg.solve(U.astype(float), W)
    assert np.all((Z2 == 0) | (Z2 == 1))
    assert np.allclose(Z2 @ W2, Z @ W, rtol=0, atol=1e-9 * max(1.0, np.abs(W).max()))
    assert np.array_equal(Z2[:, i], 1 - Z[:, i])
    return Z2, W2
