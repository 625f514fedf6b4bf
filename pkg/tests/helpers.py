"""Instance generators shared by the test modules."""

import itertools

import numpy as np

from lfmhop.oracle import PDC_KINDS, certify_integer_closure
from lfmhop.synthgen import satisfies


def random_small_z(rng, max_N=14, max_K=4):
    """A full-rank binary matrix mixing iid, bias and planted-dependency styles."""
    while True:
        K = int(rng.integers(2, max_K + 1))
        N = int(rng.integers(K, max_N + 1))
        Z = (rng.random((N, K)) < rng.uniform(0.25, 0.75)).astype(np.int64)
        style = rng.random()
        if style < 0.25:
            Z[:, K - 1] = 1
        elif style < 0.5:
            i, j = rng.choice(K, size=2, replace=False)
            kind = PDC_KINDS[int(rng.integers(3))]
            Z = Z[satisfies(Z, i, j, kind)]
            if Z.shape[0] < K:
                continue
        if np.linalg.matrix_rank(Z.astype(float)) == K:
            return Z


def certified_instances(count, seed, max_N=14, max_K=4):
    """``count`` random matrices that carry an integer-closure certificate."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        Z = random_small_z(rng, max_N, max_K)
        if certify_integer_closure(Z).certified:
            out.append(Z)
    return out


def all_rows(K):
    return np.array(list(itertools.product((0, 1), repeat=K)), dtype=np.int64)


def unique_rows(Z):
    return np.unique(Z, axis=0)
