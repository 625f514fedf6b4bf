"""Multi-try MCMC over transform matrices U (the Equivalence Hopper).

Starting from an estimate (Z, W), the chain moves through equivalent
solutions (ZU, U^{-1} W) by replacing one column of U at a time with a
candidate column, drawn with probability proportional to exp(-beta g) where

    g(U) = tau ||U^{-1} W||_F^2 + gamma f(ZU) [+ Bernoulli prior on ZU].

A sampling iteration costs O(N_s K + K^2): the chain keeps U^{-1}, the K x K
matrix Omega = U^{-1} W W^T U^{-T} and Y = U^{-1} C^T for the candidate
matrix C, all updated by rank-1 formulas. For candidate column u with
y = U^{-1} u, replacing column k of U has determinant ratio y_k and changes
||U^{-1} W||^2 by Omega_kk ||v||^2 - 2 Omega_k . v with v = (y - e_k) / y_k.
Greedy iterations (beta = inf) score all K columns, O(N_s K^2).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .binarity import defect_columns
from .core import LfmInstance, as_binary, as_features, note_row_scan, solve_w_given_z
from .errors import DimensionError, NumericalDriftError
from .sampler import CandidateSet, sample_candidates

log = logging.getLogger(__name__)

GREEDY = math.inf


@dataclass(frozen=True)
class HopperConfig:
    beta: float = GREEDY
    gamma: float = 1.0
    iterations: int = 1000
    resample_every: int = 50  # 0 keeps the initial candidate set
    rng_seed: int = 0
    det_tolerance: float = 1e-9
    refresh_every: int = 100
    drift_tolerance: float = 1e-6
    tau: float | None = None  # overrides inst.tau when set

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive (inf for greedy)")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.refresh_every < 1 or self.resample_every < 0:
            raise ValueError("refresh_every must be >= 1 and resample_every >= 0")

    @property
    def greedy(self) -> bool:
        return math.isinf(self.beta)


@dataclass
class HopperState:
    U: np.ndarray  # K x K int64
    U_inv: np.ndarray
    log_abs_det: float
    Omega: np.ndarray
    tau: float
    col_defects: np.ndarray  # f(Z u_k) per column, exact
    col_prior_z: np.ndarray  # Bernoulli negative log-prior per column (zeros when pi = 1/2)
    updates: int = 0

    @property
    def prior_w(self) -> float:
        return self.tau * float(np.trace(self.Omega))

    @property
    def defect_total(self) -> int:
        return int(self.col_defects.sum())

    def cost(self, gamma: float) -> float:
        return self.prior_w + gamma * self.defect_total + float(self.col_prior_z.sum())

    @classmethod
    def identity(cls, W, tau: float, col_prior_z=None) -> "HopperState":
        W = np.asarray(W, dtype=float)
        K = W.shape[0]
        return cls(
            U=np.eye(K, dtype=np.int64),
            U_inv=np.eye(K),
            log_abs_det=0.0,
            Omega=W @ W.T,
            tau=float(tau),
            col_defects=np.zeros(K, dtype=np.int64),
            col_prior_z=np.zeros(K) if col_prior_z is None else np.asarray(col_prior_z, float).copy(),
        )

    def check_invariants(self, W=None, gram=None, colsum=None, tol: float = 1e-6) -> None:
        K = self.U.shape[0]
        err = np.linalg.norm(self.U @ self.U_inv - np.eye(K))
        assert err <= 1e-7 * max(1.0, np.linalg.norm(self.U_inv)), f"U U_inv drift {err}"
        if W is not None:
            A = self.U_inv @ W
            ref = float(np.sum(A * A))
            tr = float(np.trace(self.Omega))
            assert abs(ref - tr) <= tol * (1 + tr), f"trace(Omega) drift {abs(ref - tr)}"
        if gram is not None:
            exact = defect_columns(gram, colsum, self.U.T)
            assert np.array_equal(exact, self.col_defects), "column defects out of sync"
        assert abs(np.linalg.det(self.U.astype(float))) >= 0.5, "U is singular"


def rank1_det_update(state: HopperState, k: int, u_new) -> float:
    """det(U') / det(U) when column k is replaced by ``u_new``."""
    du = np.asarray(u_new, dtype=float) - state.U[:, k]
    return 1.0 + float(state.U_inv[k] @ du)


def rank1_cost_update(state: HopperState, k: int, u_new):
    """(change of ||U^{-1} W||_F^2, v) for replacing column k by ``u_new``.

    The replacement must be nonsingular (see ``rank1_det_update``).
    """
    du = np.asarray(u_new, dtype=float) - state.U[:, k]
    w = state.U_inv @ du
    v = w / (1.0 + w[k])
    Om = state.Omega
    delta = float(Om[k, k] * (v @ v) - 2.0 * (Om[k] @ v))
    return delta, v


def apply_column_update(state: HopperState, k: int, u_new, v, factor: float,
                        defect_new: int = 0, prior_z_new: float = 0.0) -> HopperState:
    """Replace column k in place using U'^{-1} = V U^{-1}, Omega' = V Omega V^T, V = I - v e_k^T."""
    Om = state.Omega
    ok = Om[k].copy()
    okk = Om[k, k]
    state.Omega = Om - np.outer(v, ok) - np.outer(ok, v) + okk * np.outer(v, v)
    state.U_inv = state.U_inv - np.outer(v, state.U_inv[k])
    state.U[:, k] = np.asarray(u_new, dtype=np.int64)
    state.log_abs_det += math.log(abs(factor))
    state.col_defects[k] = defect_new
    state.col_prior_z[k] = prior_z_new
    state.updates += 1
    return state


def refresh_state(state: HopperState, W, tolerance: float = 1e-6) -> float:
    """Recompute U^{-1} and Omega from scratch; raise if the caches drifted.

    Returns the observed relative drift.
    """
    U_inv = np.linalg.inv(state.U.astype(float))
    A = U_inv @ W
    Omega = A @ A.T
    drift = max(
        np.linalg.norm(state.U_inv - U_inv) / (1.0 + np.linalg.norm(U_inv)),
        np.linalg.norm(state.Omega - Omega) / (1.0 + np.linalg.norm(Omega)),
    )
    if drift > tolerance:
        raise NumericalDriftError(f"cached inverse/Omega drifted by {drift:.3g} (> {tolerance:g})")
    state.U_inv = U_inv
    state.Omega = Omega
    sign, logdet = np.linalg.slogdet(state.U.astype(float))
    state.log_abs_det = float(logdet)
    return float(drift)


def bernoulli_neg_log_prior(active, N: int, pi_k: float):
    """-[a log pi + (N - a) log(1 - pi)] for active-row counts a."""
    a = np.asarray(active, dtype=float)
    return -(a * math.log(pi_k) + (N - a) * math.log1p(-pi_k))


def hopper_cost(U, Z_hat, W_hat, tau: float, gamma: float = 0.0, pi=None) -> float:
    """g(U) computed from scratch; the Bernoulli term is dropped when pi is all 1/2."""
    U = np.asarray(U, dtype=np.int64)
    Zu = np.asarray(Z_hat, dtype=np.int64) @ U
    A = np.linalg.solve(U.astype(float), np.asarray(W_hat, dtype=float))
    cost = tau * float(np.sum(A * A)) + gamma * int(np.sum(Zu * (Zu - 1)) // 2)
    if pi is not None and not np.allclose(pi, 0.5):
        N = Zu.shape[0]
        active = np.clip(Zu, 0, 1).sum(axis=0)
        cost += float(sum(bernoulli_neg_log_prior(active[k], N, pi[k]) for k in range(U.shape[0])))
    return cost


@dataclass
class HopResult:
    U: np.ndarray
    Z: np.ndarray
    W: np.ndarray
    cost: float
    initial_cost: float
    trace: list = field(repr=False)
    clamped_entries: int = 0


class EquivalenceHopper:
    """Stateful chain; ``run`` executes the configured number of iterations."""

    def __init__(self, Z_hat, W_hat, inst: LfmInstance, cands: CandidateSet, cfg: HopperConfig = HopperConfig()):
        self.Z = as_binary(Z_hat, "Z_hat")
        self.W = as_features(W_hat, "W_hat")
        N, K = self.Z.shape
        if self.W.shape[0] != K:
            raise DimensionError(f"W_hat has {self.W.shape[0]} rows, Z_hat has {K} columns")
        if cands.columns.shape[1] != K:
            raise DimensionError("candidate columns have the wrong length")
        if np.linalg.matrix_rank(self.W) < K:
            log.warning("rank(W_hat) < K: equivalent solutions need not be distinct")
        self.cfg = cfg
        self.inst = inst
        self.N, self.K = N, K
        tau = inst.tau if cfg.tau is None else cfg.tau
        if tau == 0:
            log.warning("tau = 0 makes the prior term vanish; ranking solutions by ||W||^2 (tau = 1)")
            tau = 1.0
        self.tau = tau
        self.gamma = cfg.gamma
        self.pi = inst.feature_probs(K)
        self.use_prior_z = not np.allclose(self.pi, 0.5)
        self.rng = np.random.default_rng(cfg.rng_seed)
        self.geometry = cands.geometry

        self.state = HopperState.identity(self.W, tau)
        if self.use_prior_z:
            self.state.col_prior_z = np.array(
                [bernoulli_neg_log_prior(self.geometry.colsum[k], N, self.pi[k]) for k in range(K)]
            )
        self._load_candidates(cands)
        self.iteration = 0
        self.cost = self.state.cost(self.gamma)
        self.initial_cost = self.cost
        self.best_cost = self.cost
        self.best_U = self.state.U.copy()
        self.trace = []

    # -- candidate bookkeeping -------------------------------------------------

    def _active_counts(self, cols, defects):
        """Active-row counts of clamp(Z u); exact from Gram data when Zu is binary."""
        act = cols @ self.geometry.colsum
        nonbinary = np.flatnonzero(defects > 0)
        if nonbinary.size:
            note_row_scan("prior_z")
            Zu = self.Z @ cols[nonbinary].T
            act = act.copy()
            act[nonbinary] = np.clip(Zu, 0, 1).sum(axis=0)
        return act

    def _load_candidates(self, cands: CandidateSet):
        self.cands = cands
        self.C = cands.columns
        self.f = cands.defects.astype(float)
        self.index = {tuple(c): i for i, c in enumerate(self.C.tolist())}
        self.Y = self.state.U_inv @ self.C.T
        if self.use_prior_z:
            act = self._active_counts(self.C, cands.defects)
            self.h = np.stack([bernoulli_neg_log_prior(act, self.N, self.pi[k]) for k in range(self.K)])
        else:
            self.h = None

    def resample(self):
        base = self.cands.config
        seed = int(self.rng.integers(2**63))
        new = sample_candidates(geometry=self.geometry, cfg=replace(base, rng_seed=seed))
        self._load_candidates(new)

    # -- one iteration -----------------------------------------------------------

    def proposal_deltas(self, k: int):
        """Cost change and determinant ratio for every candidate in column k."""
        st = self.state
        Y = self.Y
        yk = Y[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            ysq = np.einsum("ij,ij->j", Y, Y)
            oy = st.Omega[k] @ Y
            okk = st.Omega[k, k]
            vsq = (ysq - 2.0 * yk + 1.0) / (yk * yk)
            ov = (oy - okk) / yk
            delta = self.tau * (okk * vsq - 2.0 * ov)
        delta = delta + self.gamma * (self.f - st.col_defects[k])
        if self.h is not None:
            delta = delta + (self.h[k] - st.col_prior_z[k])
        valid = np.abs(yk) >= self.cfg.det_tolerance
        return delta, yk, valid

    def step(self):
        """One chain iteration.

        Sampling mode redraws a single uniformly chosen column from the
        Boltzmann law over its nonsingular replacements. Greedy mode takes the
        best improving replacement over all columns and keeps U otherwise.
        """
        cfg = self.cfg
        st = self.state
        if cfg.greedy:
            k, choice, d = self._greedy_move()
        else:
            k, choice, d = self._sampled_move()
        moved = choice >= 0
        if moved:
            self._apply(k, choice, d)
        self.iteration += 1
        if cfg.resample_every and self.cands.config is not None and self.iteration % cfg.resample_every == 0:
            self.resample()
        if self.cost < self.best_cost:
            self.best_cost = self.cost
            self.best_U = st.U.copy()
        self.trace.append((self.iteration, self.cost, st.defect_total, st.prior_w, k, moved))
        return moved

    def _greedy_move(self):
        best = (0.0, -1, -1)
        for k in range(self.K):
            delta, _, valid = self.proposal_deltas(k)
            idx = np.flatnonzero(valid)
            if idx.size == 0:
                continue
            j = int(idx[np.argmin(delta[idx])])
            if delta[j] < best[0]:
                best = (float(delta[j]), k, j)
        # ties and numerically flat moves keep the incumbent
        if best[1] < 0 or best[0] >= -1e-12 * (1.0 + abs(self.cost)):
            return -1, -1, 0.0
        return best[1], best[2], best[0]

    def _sampled_move(self):
        st = self.state
        k = int(self.rng.integers(self.K))
        delta, _, valid = self.proposal_deltas(k)
        cur = self.index.get(tuple(st.U[:, k].tolist()), -1)
        idx = np.flatnonzero(valid)
        if idx.size == 0:
            log.debug("iteration %d: no nonsingular replacement for column %d", self.iteration, k)
            return k, -1, 0.0
        d = delta[idx]
        if cur < 0:
            # the incumbent column is not a candidate: it stays in the pool with zero delta
            d = np.append(d, 0.0)
        w = np.exp(-self.cfg.beta * (d - d.min()))
        c = np.cumsum(w)
        pick = min(int(np.searchsorted(c, self.rng.random() * c[-1], side="right")), len(d) - 1)
        if pick == len(idx):
            return k, -1, 0.0
        j = int(idx[pick])
        if j == cur:
            return k, -1, 0.0
        return k, j, float(delta[j])

    def _apply(self, k: int, j: int, delta: float):
        st = self.state
        y = self.Y[:, j].copy()
        factor = y[k]
        v = y.copy()
        v[k] -= 1.0
        v /= factor
        hz = 0.0 if self.h is None else float(self.h[k, j])
        apply_column_update(st, k, self.C[j], v, factor, int(self.cands.defects[j]), hz)
        self.Y -= np.outer(v, self.Y[k])
        self.cost += delta
        if st.updates % self.cfg.refresh_every == 0:
            self.refresh()

    def refresh(self) -> float:
        drift = refresh_state(self.state, self.W, self.cfg.drift_tolerance)
        Y = self.state.U_inv @ self.C.T
        ydrift = np.linalg.norm(Y - self.Y) / (1.0 + np.linalg.norm(Y))
        if ydrift > self.cfg.drift_tolerance:
            raise NumericalDriftError(f"cached candidate products drifted by {ydrift:.3g}")
        self.Y = Y
        scratch = self.state.cost(self.gamma)
        cdrift = abs(scratch - self.cost) / (1.0 + abs(scratch))
        if cdrift > self.cfg.drift_tolerance:
            raise NumericalDriftError(f"cached cost drifted by {cdrift:.3g}")
        self.cost = scratch
        return max(drift, float(ydrift), cdrift)

    def run(self, iterations: int | None = None):
        frozen = not self.cfg.resample_every or self.cands.config is None
        for _ in range(self.cfg.iterations if iterations is None else iterations):
            moved = self.step()
            if self.cfg.greedy and frozen and not moved:
                break  # local minimum over a fixed candidate set
        return self

    def result(self) -> HopResult:
        U = self.best_U
        note_row_scan("finalize")
        ZU = self.Z @ U
        Z_out = np.clip(ZU, 0, 1)
        clamped = int(np.count_nonzero(Z_out != ZU))
        if clamped:
            W_out = solve_w_given_z(self.inst, Z_out)
        else:
            W_out = np.linalg.solve(U.astype(float), self.W)
        return HopResult(U.copy(), Z_out, W_out, self.best_cost, self.initial_cost, list(self.trace), clamped)


def hop(Z_hat, W_hat, inst: LfmInstance, cands: CandidateSet, cfg: HopperConfig = HopperConfig()) -> HopResult:
    """Run the hopper and return the best solution visited."""
    return EquivalenceHopper(Z_hat, W_hat, inst, cands, cfg).run().result()


TRACE_COLUMNS = ("iteration", "cost", "defect", "prior_w", "k", "moved")


def write_trace(path, trace, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for it, cost, dfc, pw, k, moved in trace:
            w.writerow([it, format(cost, ".17g"), dfc, format(pw, ".17g"), k, int(moved)])
