"""Random search for integer columns u that keep Zu (nearly) binary.

A point s is drawn uniformly on the sphere of center mu and radius
sqrt(||mu||^2 + 2 f*), mapped back with u = round(Lambda s) and kept if the
exact defect f(Zu) is within the drawn budget f*. Strict sampling is the
f* = 0 case.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .binarity import SphereGeometry, build_geometry, defect_columns

STRICT = math.inf


@dataclass(frozen=True)
class SamplerConfig:
    n_samples: int = 1000
    lam: float = STRICT  # rate of the discrete exponential tolerance law; inf = strict
    rng_seed: int = 0
    max_entry_abs: int = 8
    include_units: bool = True
    chunk: int = 100_000

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not self.lam > 0:
            raise ValueError("lam must be > 0 (use inf for strict sampling)")
        if self.max_entry_abs < 1:
            raise ValueError("max_entry_abs must be >= 1")

    @property
    def strict(self) -> bool:
        return math.isinf(self.lam)


@dataclass
class CandidateSet:
    """Deduplicated integer columns with their exact defects f(Zu)."""

    columns: np.ndarray  # (M, K) int64, one candidate per row
    defects: np.ndarray  # (M,) int64
    geometry: SphereGeometry = field(repr=False)
    config: SamplerConfig | None = None

    def __len__(self):
        return self.columns.shape[0]

    def as_set(self) -> set:
        return {tuple(int(x) for x in c) for c in self.columns}

    def to_json(self) -> str:
        return json.dumps(
            {
                "K": int(self.columns.shape[1]),
                "columns": self.columns.tolist(),
                "defects": self.defects.tolist(),
                "config": None if self.config is None else _config_json(self.config),
            }
        )

    @classmethod
    def from_columns(cls, geometry: SphereGeometry, columns, config=None) -> "CandidateSet":
        cols = np.unique(np.asarray(columns, dtype=np.int64).reshape(-1, geometry.K), axis=0)
        cols = cols[np.any(cols != 0, axis=1)]
        return cls(cols, defect_columns(geometry.gram, geometry.colsum, cols), geometry, config)


def _config_json(cfg: SamplerConfig) -> dict:
    d = asdict(cfg)
    d["lam"] = None if cfg.strict else cfg.lam
    return d


def sample_f_star(lam: float, rng: np.random.Generator, size=None):
    """Tolerance budget with P(f* = m) proportional to exp(-lam m); 0 when strict."""
    if math.isinf(lam):
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    p = -math.expm1(-lam)
    return rng.geometric(p, size=size) - 1


def sample_sphere_point(geom: SphereGeometry, f_star, rng: np.random.Generator, size=None):
    """Uniform draw(s) on the sphere of center mu and radius sqrt(||mu||^2 + 2 f*)."""
    K = geom.K
    n = 1 if size is None else size
    g = rng.standard_normal((n, K))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = np.sqrt(geom.mu_norm_sq + 2.0 * np.asarray(f_star, dtype=float))
    s = geom.mu + g * np.reshape(radius, (-1, 1))
    return s[0] if size is None else s


def sample_candidates(Z=None, cfg: SamplerConfig = SamplerConfig(), geometry=None, rng=None) -> CandidateSet:
    """Draw ``cfg.n_samples`` rounded sphere points and keep the admissible ones.

    Either ``Z`` or a prebuilt ``geometry`` must be given; reusing a geometry
    avoids touching the N rows of Z again.
    """
    geom = geometry if geometry is not None else build_geometry(Z)
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    K = geom.K
    found = []
    remaining = cfg.n_samples
    while remaining > 0:
        n = min(cfg.chunk, remaining)
        remaining -= n
        # Directions are drawn before budgets so strict and tolerant runs on the
        # same seed see identical sphere directions.
        g = rng.standard_normal((n, K))
        f_star = sample_f_star(cfg.lam, rng, size=n)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        radius = np.sqrt(geom.mu_norm_sq + 2.0 * f_star)
        s = geom.mu + g * radius[:, None]
        u = np.rint(s @ geom.Lambda.T)
        keep = np.all(np.abs(u) <= cfg.max_entry_abs, axis=1) & np.any(u != 0, axis=1)
        u = u[keep].astype(np.int64)
        f_star = f_star[keep]
        if u.size == 0:
            continue
        d = defect_columns(geom.gram, geom.colsum, u)
        found.append(u[d <= f_star])
    if cfg.include_units:
        found.append(np.eye(K, dtype=np.int64))
    cols = np.concatenate(found) if found else np.zeros((0, K), dtype=np.int64)
    return CandidateSet.from_columns(geom, cols, cfg)
