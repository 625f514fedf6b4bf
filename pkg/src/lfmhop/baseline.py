"""A small MAP estimator for the linear-Gaussian latent feature model.

Block coordinate descent on ||X - ZW||^2 + tau ||W||^2: W is updated in
closed form, then every row of Z is re-optimized given W, either exactly over
all 2^K patterns or by single-bit flip sweeps. Both half-steps are exact or
descent moves, so the recorded objective never increases.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import LfmInstance, map_objective, solve_w_given_z
from .errors import ConfigError

log = logging.getLogger(__name__)

EXHAUSTIVE, COORDINATE = "exhaustive_row", "coordinate_flip"
MAX_EXHAUSTIVE_K = 16


@dataclass(frozen=True)
class BaselineConfig:
    max_outer_iters: int = 100
    z_update: str = EXHAUSTIVE
    restarts: int = 5
    rng_seed: int = 0
    tol: float = 1e-9
    init_p: float = 0.5
    row_chunk: int = 4096

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.restarts < 1:
            raise ConfigError("max_outer_iters and restarts must be positive")
        if self.z_update not in (EXHAUSTIVE, COORDINATE):
            raise ConfigError(f"z_update must be {EXHAUSTIVE!r} or {COORDINATE!r}")
        if self.tol < 0:
            raise ConfigError("tol must be nonnegative")


@dataclass
class FitResult:
    Z: np.ndarray
    W: np.ndarray
    trace: list  # objective after the initial W solve and after every half-step
    objective: float
    restart: int
    restart_objectives: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.Z, self.W, self.trace))


def all_patterns(K: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=K)), dtype=np.int64)


def update_rows_exhaustive(X, W, Z, chunk: int = 4096) -> np.ndarray:
    """Each row of Z replaced by its exact minimizer of ||x_n - z W||^2.

    The current row wins ties, so the objective cannot go up.
    """
    K = W.shape[0]
    if K > MAX_EXHAUSTIVE_K:
        raise ConfigError(f"exhaustive row update limited to K <= {MAX_EXHAUSTIVE_K}")
    P = all_patterns(K)
    PW = P @ W
    pw_sq = np.einsum("ij,ij->i", PW, PW)
    out = Z.copy()
    weights = 1 << np.arange(K - 1, -1, -1)
    for s in range(0, X.shape[0], chunk):
        Xb = X[s : s + chunk]
        cost = pw_sq[None, :] - 2.0 * (Xb @ PW.T)
        best = np.argmin(cost, axis=1)
        cur = Z[s : s + chunk] @ weights
        rows = np.arange(len(best))
        keep = cost[rows, cur] <= cost[rows, best]
        best = np.where(keep, cur, best)
        out[s : s + chunk] = P[best]
    return out


def update_rows_coordinate(X, W, Z, max_sweeps: int = 100) -> np.ndarray:
    """Single-bit flips, accepted when they strictly lower the row residual."""
    Z = Z.copy()
    R = X - Z @ W
    w_sq = np.einsum("ij,ij->i", W, W)
    for _ in range(max_sweeps):
        changed = False
        for k in range(W.shape[0]):
            rw = R @ W[k]
            # flipping 0 -> 1 subtracts w_k from the residual, 1 -> 0 adds it
            sign = np.where(Z[:, k] == 0, -1.0, 1.0)
            gain = 2.0 * sign * rw + w_sq[k]
            flip = gain < -1e-12
            if flip.any():
                changed = True
                R[flip] += sign[flip, None] * W[k]
                Z[flip, k] = 1 - Z[flip, k]
        if not changed:
            break
    return Z


def _fit_once(inst: LfmInstance, K: int, cfg: BaselineConfig, rng) -> FitResult:
    X = inst.X
    N = X.shape[0]
    Z = (rng.random((N, K)) < cfg.init_p).astype(np.int64)
    W = solve_w_given_z(inst, Z)
    obj = map_objective(inst, Z, W)
    trace = [obj]
    for _ in range(cfg.max_outer_iters):
        start = obj
        if cfg.z_update == EXHAUSTIVE:
            Z = update_rows_exhaustive(X, W, Z, cfg.row_chunk)
        else:
            Z = update_rows_coordinate(X, W, Z)
        trace.append(map_objective(inst, Z, W))
        W = solve_w_given_z(inst, Z)
        obj = map_objective(inst, Z, W)
        trace.append(obj)
        if start - obj < cfg.tol:
            break
    return FitResult(Z, W, trace, obj, 0)


def fit(inst: LfmInstance, K: int, cfg: BaselineConfig = BaselineConfig()) -> FitResult:
    """Best of ``cfg.restarts`` alternating-minimization runs."""
    if K < 1:
        raise ConfigError("K must be >= 1")
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.restarts)
    best = None
    objectives = []
    for r, ss in enumerate(seeds):
        res = _fit_once(inst, K, cfg, np.random.default_rng(ss))
        res.restart = r
        objectives.append(res.objective)
        log.debug("restart %d: objective %.6g after %d half-steps", r, res.objective, len(res.trace) - 1)
        if best is None or res.objective < best.objective:
            best = res
    best.restart_objectives = objectives
    return best
