"""Counting equivalent solutions of synthetic incidence matrices.

Each (N, trial) cell draws a fresh Z from the generator, collects strict
candidate columns with the sphere sampler and counts the regular matrices
they assemble into. When Z is small enough the exact oracle count is
recorded alongside.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .errors import GenerationError
from .oracle import assemble_transforms, enumerate_equivalents
from .sampler import SamplerConfig, sample_candidates
from .synthgen import BIAS, IID, GeneratorSpec, gen_z

log = logging.getLogger(__name__)

COUNT_COLUMNS = ("generator", "K", "N", "trial", "count", "oracle_count")
SUMMARY_COLUMNS = ("generator", "K", "N", "trials", "min", "q1", "median", "q3", "max")


def generator_label(spec: GeneratorSpec) -> str:
    if spec.kind == IID:
        return f"iid({spec.p:g})"
    if spec.kind == BIAS:
        return "bias"
    return f"pdc({spec.n_pairs})"


def cell_seeds(seed: int, N: int, trial: int, attempt: int = 0):
    gen_ss, samp_ss = np.random.SeedSequence([seed, N, trial, attempt]).spawn(2)
    return int(gen_ss.generate_state(1)[0]), int(samp_ss.generate_state(1)[0])


def count_cell(spec: GeneratorSpec, N: int, trial: int, sampler_cfg: SamplerConfig, seed: int,
               oracle_max_N: int = 16, oracle_max_K: int = 5, max_attempts: int = 20) -> dict:
    for attempt in range(max_attempts):
        gen_seed, samp_seed = cell_seeds(seed, N, trial, attempt)
        try:
            Z = gen_z(spec.with_(N=N, rng_seed=gen_seed))
            break
        except GenerationError:
            log.info("generation failed for N=%d trial=%d (attempt %d); resampling", N, trial, attempt)
    else:
        raise GenerationError(f"N={N} trial={trial}: no valid Z after {max_attempts} attempts")
    if attempt:
        log.info("N=%d trial=%d needed %d generation retries", N, trial, attempt)
    cands = sample_candidates(Z, replace(sampler_cfg, rng_seed=samp_seed))
    count = len(assemble_transforms(cands.columns, spec.K))
    oracle = None
    if N <= oracle_max_N and spec.K <= oracle_max_K:
        oracle = enumerate_equivalents(Z, oracle_max_N, oracle_max_K).count
    return {
        "generator": generator_label(spec),
        "K": spec.K,
        "N": N,
        "trial": trial,
        "count": count,
        "oracle_count": oracle,
    }


def _cell_star(args):
    return count_cell(*args)


def count_experiment(spec: GeneratorSpec, N_grid, trials: int, sampler_cfg: SamplerConfig,
                     seed: int = 0, jobs: int = 1) -> list:
    """One row per (N, trial); results do not depend on ``jobs``."""
    tasks = [(spec, int(N), t, sampler_cfg, seed) for N in N_grid for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_cell_star, tasks))
    return [_cell_star(t) for t in tasks]


def summarize(rows) -> list:
    """Box-plot statistics (extrema, quartiles, median) per (generator, K, N)."""
    groups = {}
    for r in rows:
        groups.setdefault((r["generator"], r["K"], r["N"]), []).append(r["count"])
    out = []
    for (gen, K, N), counts in groups.items():
        q = np.percentile(counts, [0, 25, 50, 75, 100])
        out.append(dict(zip(SUMMARY_COLUMNS, (gen, K, N, len(counts), *[float(x) for x in q]))))
    return out


def write_rows(path, rows, columns, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
