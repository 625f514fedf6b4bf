"""Acceptance gate: one recorded PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed in the
"acceptance criteria" section of the terminal summary.
"""

import itertools
import time

import numpy as np
import pytest

from helpers import all_rows, certified_instances, unique_rows
from lfmhop.baseline import BaselineConfig, fit
from lfmhop.binarity import build_geometry
from lfmhop.core import (
    LfmInstance,
    hamming_error,
    regularizer_metric,
    residual,
    solve_w_given_z,
    total_row_scans,
)
from lfmhop.counting import count_experiment
from lfmhop.hopper import EquivalenceHopper, HopperConfig, hop, hopper_cost
from lfmhop.oracle import (
    PDC1,
    PDC2,
    PDC3,
    PDC_KINDS,
    assemble_transforms,
    bias_lower_bound,
    bias_transform_family,
    canonical_key,
    enumerate_equivalents,
    pdc_transform,
)
from lfmhop.pdc import detect_pdc, survey, write_multilabel
from lfmhop.sampler import CandidateSet, SamplerConfig, sample_candidates
from lfmhop.synthgen import GeneratorSpec, gen_features, gen_instance, gen_z, gen_z_constrained, make_inverted_solution

STRICT_1E4 = SamplerConfig(n_samples=10_000)


# -- 1. equivalent-solution counts ------------------------------------------------------


@pytest.mark.parametrize(
    "label, spec, check",
    [
        ("iid(0.5)", GeneratorSpec("iid", K=6, N=200), lambda c: np.median(c) == 1),
        ("bias", GeneratorSpec("bias", K=6, N=200), lambda c: np.median(c) == 112),
        ("pdc(1)", GeneratorSpec("pdc", K=6, N=200, n_pairs=1), lambda c: np.median(c) == 3),
        ("pdc(3)", GeneratorSpec("pdc", K=6, N=200, n_pairs=3), lambda c: min(c) >= 27 and max(c) <= 2000),
    ],
)
def test_1_solution_counts(accept, label, spec, check):
    t0 = time.perf_counter()
    rows = count_experiment(spec, [200], 20, STRICT_1E4, seed=2024, jobs=2)
    counts = [r["count"] for r in rows]
    dt = time.perf_counter() - t0
    detail = f"{label}: median={np.median(counts):g} range=[{min(counts)}, {max(counts)}] over 20 trials ({dt:.1f}s)"
    accept(f"1 counts {label}", check(counts) and dt < 600, detail)


# -- 2. sampler against the exact oracle -------------------------------------------------


def test_2_oracle_equivalence(accept):
    t0 = time.perf_counter()
    mismatches = []
    instances = certified_instances(220, seed=7)
    for n, Z in enumerate(instances):
        rep = enumerate_equivalents(Z)
        cands = sample_candidates(Z, SamplerConfig(n_samples=10_000, rng_seed=n))
        sampled = {canonical_key(U) for U in assemble_transforms(cands.columns, Z.shape[1])}
        if sampled != rep.canonical_set() or not rep.complete:
            mismatches.append(n)
    dt = time.perf_counter() - t0
    ok = not mismatches and dt < 300
    accept("2 oracle equivalence", ok,
           f"{len(instances)} certified instances, {len(mismatches)} set mismatches, {dt:.1f}s")


# -- 3. structural invariants ---------------------------------------------------------------


def _class_of(Z):
    return enumerate_equivalents(unique_rows(Z))


def test_3_all_rows_identifiable(accept):
    rng = np.random.default_rng(31)
    failures = 0
    for t in range(120):
        K = int(rng.integers(2, 5))
        extra = (rng.random((int(rng.integers(0, 40)), K)) < 0.5).astype(np.int64)
        Z = np.vstack([all_rows(K), extra])[rng.permutation(2**K + len(extra))]
        cands = sample_candidates(Z, SamplerConfig(n_samples=2000, rng_seed=t))
        sampled = len(assemble_transforms(cands.columns, K))
        if _class_of(Z).count != 1 or sampled != 1:
            failures += 1
    accept("3 all rows => count 1", failures == 0, f"120 instances, {failures} failures")


def test_3_planted_pdc_nonidentifiable(accept):
    rng = np.random.default_rng(32)
    failures = 0
    for t in range(120):
        K = int(rng.integers(2, 5))
        kind = PDC_KINDS[t % 3]
        spec = GeneratorSpec("pdc", K=K, N=int(rng.integers(20, 200)), kinds=(kind,), rng_seed=t)
        Z = gen_z(spec)
        rep = _class_of(Z)
        members = {canonical_key(U) for U in pdc_transform(kind, 0, 1, K)}
        if rep.count < 3 or not members <= rep.canonical_set():
            failures += 1
    accept("3 planted PDC => count >= 3 with R/Q members", failures == 0, f"120 instances, {failures} failures")


def test_3_bias_lower_bound(accept):
    rng = np.random.default_rng(33)
    failures = 0
    for t in range(120):
        K = int(rng.integers(2, 6))
        large = t % 2 == 0
        N = 60 * 2**K if large else int(rng.integers(K + 1, 3 * K))
        try:
            Z = gen_z(GeneratorSpec("bias", K=K, N=N, rng_seed=t))
        except Exception:
            continue
        rep = _class_of(Z)
        family = {canonical_key(U) for U in bias_transform_family(K)}
        bound = bias_lower_bound(K)
        ok = rep.count >= bound and family <= rep.canonical_set()
        if large and len(unique_rows(Z)) == 2 ** (K - 1):
            ok = ok and rep.count == bound
        failures += not ok
    accept("3 bias => count >= (K+1)2^(K-2), equality at large N", failures == 0,
           f"120 instances, {failures} failures")


def test_3_pdc2_pdc3_contraposition(accept):
    rng = np.random.default_rng(34)
    failures = 0
    for t in range(150):
        K = int(rng.integers(2, 8))
        N = int(rng.integers(1, 30))
        Z = (rng.random((N, K)) < rng.uniform(0.1, 0.9)).astype(np.int64)
        rep = detect_pdc(Z)
        for i, j in itertools.permutations(range(K), 2):
            if rep.holds(i, j, PDC2) != rep.holds(j, i, PDC3):
                failures += 1
    accept("3 PDC2(i,j) <=> PDC3(j,i)", failures == 0, f"150 instances, {failures} failures")


# -- 4. hopper correctness --------------------------------------------------------------------


def test_4a_likelihood_preserved(accept):
    worst = 0.0
    for s in range(10):
        X, Z, W, inst = gen_instance(GeneratorSpec("pdc", K=6, N=500, n_pairs=3, rng_seed=s))
        W_hat = solve_w_given_z(inst, Z)
        cands = sample_candidates(Z, SamplerConfig(n_samples=10_000, rng_seed=s))
        for cfg in (HopperConfig(resample_every=0, iterations=300, rng_seed=s),
                    HopperConfig(beta=50.0, iterations=300, resample_every=100, rng_seed=s)):
            res = hop(Z, W_hat, inst, cands, cfg)
            r0, r1 = residual(X, Z, W_hat), residual(X, res.Z, res.W)
            worst = max(worst, abs(r1 / r0 - 1.0))
    accept("4a residual preserved", worst <= 1e-3, f"max |residual ratio - 1| = {worst:.2e} over 20 hops")


def test_4b_rank1_fidelity(accept):
    worst = 0.0
    moves = 0
    for s in range(8):
        # a loose tolerance and a flat energy keep the chain moving through many columns
        Z = gen_z(GeneratorSpec("pdc", K=6, N=200, n_pairs=2, rng_seed=100 + s))
        W = 0.5 * np.random.default_rng(s).standard_normal((6, 8))
        inst = LfmInstance.from_tau(Z @ W, 0.1)
        cands = sample_candidates(Z, SamplerConfig(n_samples=5000, lam=0.02, max_entry_abs=3, rng_seed=s))
        cfg = HopperConfig(beta=1.0, gamma=0.01, iterations=1000, resample_every=0,
                           refresh_every=10**6, rng_seed=s)
        h = EquivalenceHopper(Z, W, inst, cands, cfg)
        h.run()
        st = h.state
        U_inv = np.linalg.inv(st.U.astype(float))
        A = U_inv @ W
        Omega = A @ A.T
        scratch = hopper_cost(st.U, Z, W, 0.1, 0.01)
        drift = max(
            np.linalg.norm(st.U_inv - U_inv) / (1 + np.linalg.norm(U_inv)),
            np.linalg.norm(st.Omega - Omega) / (1 + np.linalg.norm(Omega)),
            np.linalg.norm(h.Y - U_inv @ h.C.T) / (1 + np.linalg.norm(h.Y)),
            abs(h.cost - scratch) / (1 + abs(scratch)),
        )
        worst = max(worst, drift)
        moves += st.updates
    accept("4b rank-1 fidelity", worst <= 1e-6 and moves > 0,
           f"max relative drift {worst:.2e} over 8 chains of 1000 steps ({moves} column updates)")


def test_4c_detailed_balance(accept):
    Z = np.array([[1, 0], [0, 1], [1, 0], [0, 1], [0, 0]])
    W = np.array([[1.0, 0.5, -0.3], [0.2, -1.0, 0.4]])
    tau, gamma, beta = 0.5, 1.0, 1.0
    inst = LfmInstance.from_tau(Z @ W, tau)
    cands = sample_candidates(Z, SamplerConfig(n_samples=20_000, lam=1.0, max_entry_abs=2))
    C = cands.columns
    states = {}
    for a, b in itertools.permutations(range(len(C)), 2):
        U = np.stack([C[a], C[b]], axis=1)
        if abs(np.linalg.det(U)) > 0.5:
            states[(a, b)] = hopper_cost(U, Z, W, tau, gamma)
    keys = list(states)
    g = np.array([states[k] for k in keys])
    target = np.exp(-beta * (g - g.min()))
    target /= target.sum()

    h = EquivalenceHopper(Z, W, inst, cands, HopperConfig(beta=beta, gamma=gamma, iterations=1,
                                                          resample_every=0, rng_seed=3))
    index = {tuple(c): i for i, c in enumerate(C.tolist())}
    pos = {k: n for n, k in enumerate(keys)}
    counts = np.zeros(len(keys))
    steps = 200_000
    for _ in range(steps):
        h.step()
        U = h.state.U
        counts[pos[(index[tuple(U[:, 0])], index[tuple(U[:, 1])])]] += 1
    tv = 0.5 * np.abs(counts / steps - target).sum()
    accept("4c detailed balance", tv <= 0.02, f"TV = {tv:.4f} over {len(keys)} states, {steps} steps")


def test_4d_greedy_reaches_class_minimum(accept):
    misses = []
    instances = certified_instances(200, seed=41)
    for n, Z in enumerate(instances):
        K = Z.shape[1]
        rng = np.random.default_rng(n)
        W = rng.standard_normal((K, 6))
        inst = LfmInstance.from_tau(Z @ W, 1.0)
        rep = enumerate_equivalents(Z)
        best = min(hopper_cost(U, Z, W, 1.0) for U in rep.canonical_transforms)
        cands = sample_candidates(Z, SamplerConfig(n_samples=10_000, rng_seed=n))
        res = hop(Z, W, inst, cands, HopperConfig(resample_every=0, iterations=1000, rng_seed=n))
        if res.cost > best + 1e-9 * (1 + abs(best)):
            misses.append(n)
    accept("4d greedy reaches the class minimum", not misses,
           f"{len(misses)} of {len(instances)} certified instances end above the oracle minimum")


# -- 5. end-to-end improvement --------------------------------------------------------------


def test_5_pdc_pipeline_improves(accept):
    before, after, reg_up = [], [], 0
    for s in range(400):
        X, Z, W, inst = gen_instance(GeneratorSpec("pdc", K=6, N=500, n_pairs=3, noise_sigma=0.0, rng_seed=s))
        fitted = fit(inst, 6, BaselineConfig(restarts=4, rng_seed=s))
        e0 = hamming_error(fitted.Z, Z)
        if residual(X, fitted.Z, fitted.W) > 1e-6 or e0 == 0:
            continue
        cands = sample_candidates(fitted.Z, SamplerConfig(n_samples=10_000, rng_seed=s))
        res = hop(fitted.Z, fitted.W, inst, cands, HopperConfig(resample_every=0, iterations=300, rng_seed=s))
        before.append(e0)
        after.append(hamming_error(res.Z, Z))
        reg_up += regularizer_metric(res.W) > regularizer_metric(fitted.W) * (1 + 1e-12)
        if len(before) == 20:
            break
    ok = len(before) == 20 and np.mean(after) < np.mean(before) and reg_up == 0
    accept("5 PDC pipeline", ok,
           f"{len(before)} instances: mean E_Hamm {np.mean(before):.4f} -> {np.mean(after):.4f}, "
           f"E_Reg increased on {reg_up}")


def test_5_inverted_bias_restored(accept):
    checked = restored = 0
    for s in range(60):
        K, bias = 5, 4
        spec = GeneratorSpec("bias", K=K, N=300, noise_sigma=0.0, rng_seed=s)
        X, Z, W, inst = gen_instance(spec)
        i = s % (K - 1)
        Z2, W2 = make_inverted_solution(Z, W, bias, i)
        rep = enumerate_equivalents(unique_rows(Z))
        costs = [float(np.sum(np.linalg.solve(U.astype(float), W) ** 2)) for U in rep.canonical_transforms]
        truth = float(np.sum(W * W))
        if truth > min(costs) + 1e-9 * truth:
            continue
        checked += 1
        cands = sample_candidates(Z2, SamplerConfig(n_samples=10_000, rng_seed=s))
        res = hop(Z2, W2, LfmInstance.from_tau(X, 1.0), cands,
                  HopperConfig(resample_every=0, iterations=300, rng_seed=s))
        restored += hamming_error(res.Z, Z) == 0
    ok = checked >= 20 and restored == checked
    accept("5 inverted bias restored", ok, f"E_Hamm = 0 restored on {restored}/{checked} oracle-verified instances")


# -- 6. metric ------------------------------------------------------------------------------


def test_6_hamming_matches_brute_force(accept):
    rng = np.random.default_rng(6)
    disagreements = 0
    for _ in range(100):
        K = int(rng.integers(1, 7))
        N = int(rng.integers(1, 40))
        A = (rng.random((N, K)) < 0.5).astype(np.int64)
        B = (rng.random((N, K)) < 0.5).astype(np.int64)
        brute = min(int(np.sum(A[:, list(p)] != B)) for p in itertools.permutations(range(K))) / (N * K)
        disagreements += hamming_error(A, B) != brute
    accept("6 hamming_error exact", disagreements == 0, f"100 random pairs, {disagreements} disagreements")


# -- 7. performance contract ----------------------------------------------------------------


def _random_candidates(geom, n, rng):
    cols = set()
    while len(cols) < n:
        c = tuple(int(x) for x in rng.integers(-2, 3, size=geom.K))
        if any(c):
            cols.add(c)
    return CandidateSet.from_columns(geom, sorted(cols))


def test_7_per_iteration_cost_linear_in_candidates(accept):
    K = 10
    Z = gen_z(GeneratorSpec("iid", K=K, N=5000, rng_seed=1))
    W = gen_features(GeneratorSpec("iid", K=K, N=5000, rng_seed=1))
    inst = LfmInstance.from_tau(Z @ W, 0.01)
    geom = build_geometry(Z)
    rng = np.random.default_rng(0)
    sizes = [100, 1000, 10_000]
    per_iter = []
    scans = 0
    for n in sizes:
        cands = _random_candidates(geom, n, rng)
        h = EquivalenceHopper(Z, W, inst, cands, HopperConfig(beta=1.0, iterations=1, resample_every=0))
        h.run(20)
        best = np.inf
        for _ in range(3):
            mark = total_row_scans()
            t0 = time.perf_counter()
            h.run(200)
            best = min(best, (time.perf_counter() - t0) / 200)
            scans += total_row_scans() - mark
        per_iter.append(best)
    slope, icpt = np.polyfit(sizes, per_iter, 1)
    pred = slope * np.array(sizes) + icpt
    r2 = 1 - np.sum((np.array(per_iter) - pred) ** 2) / np.sum((per_iter - np.mean(per_iter)) ** 2)

    # resampling and the Bernoulli prior must not touch the N rows either
    tol = sample_candidates(Z, SamplerConfig(n_samples=2000, lam=1.0, rng_seed=1))
    strict = sample_candidates(Z, SamplerConfig(n_samples=2000, rng_seed=1))
    inst_pi = LfmInstance.from_tau(Z @ W, 0.01, pi=np.full(K, 0.3))
    chains = [EquivalenceHopper(Z, W, inst, tol, HopperConfig(beta=1.0, resample_every=10)),
              EquivalenceHopper(Z, W, inst_pi, strict, HopperConfig(beta=1.0, resample_every=10))]
    for h in chains:
        mark = total_row_scans()
        h.run(50)
        scans += total_row_scans() - mark
    timing = ", ".join(f"N_s={n}: {t * 1e6:.0f}us" for n, t in zip(sizes, per_iter))
    accept("7 O(N_s K + K^2) per iteration", r2 >= 0.95 and scans == 0,
           f"R^2 = {r2:.4f} ({timing}); row scans after init = {scans}")


# -- 8. PDC survey ------------------------------------------------------------------------------


PLANTED = [
    (0, 1, PDC2),
    (1, 2, PDC2),
    (3, 4, PDC1),
    (5, 3, PDC2),
    (6, 7, PDC3),
    (8, 9, PDC1),
    (10, 11, PDC2),
    (12, 13, PDC1),
]


def _entailed_pairs(K, constraints):
    """Unordered pairs with some relation holding on every row the constraints allow."""
    rows = all_rows(K)
    ok = np.ones(len(rows), dtype=bool)
    for i, j, kind in constraints:
        zi, zj = rows[:, i], rows[:, j]
        ok &= ~{PDC1: (zi == 1) & (zj == 1), PDC2: (zi == 1) & (zj == 0), PDC3: (zi == 0) & (zj == 1)}[kind]
    rows = rows[ok]
    out = set()
    for i, j in itertools.combinations(range(K), 2):
        zi, zj = rows[:, i], rows[:, j]
        if not np.any(zi & zj) or not np.any(zi & ~zj & 1) or not np.any(~zi & 1 & zj):
            out.add((i, j))
    return out


def test_8_planted_survey(accept, tmp_path):
    K = 14
    planted_pairs = {tuple(sorted(p[:2])) for p in PLANTED}
    expect = _entailed_pairs(K, PLANTED)
    disjoint = [(2 * m, 2 * m + 1, PDC_KINDS[m % 3]) for m in range(7)]
    paths, names, want = [], [], []
    for name, cons in (("chained", PLANTED), ("disjoint", disjoint)):
        Z = gen_z_constrained(4000, K, cons, 0.5, np.random.default_rng(len(name)))
        p = tmp_path / f"{name}.txt"
        write_multilabel(p, Z)
        paths.append(p)
        names.append(name)
        pl = {tuple(sorted(c[:2])) for c in cons}
        ent = _entailed_pairs(K, cons)
        want.append((len(ent), len(ent - pl)))
    broken = tmp_path / "broken.txt"
    broken.write_text("0,1\nx,2\n")
    rows = survey(paths + [broken], names + ["broken"])
    got = [(r["pdc_pair_count"], r["implied_pair_count"]) for r in rows[:2]]
    ok = got == want and rows[2]["error"] is not None and planted_pairs <= expect
    ok = ok and all(r["pdc_ratio"] == r["pdc_pair_count"] / (K * (K - 1) / 2) for r in rows[:2])
    accept("8 planted survey", ok,
           f"(pairs, implied) got {got}, oracle {want}; broken file reported: {rows[2]['error'] is not None}")
