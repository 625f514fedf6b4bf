"""Pairwise dependency conditions between feature columns.

Three implications, each required to hold on every row:

    PDC1(i, j): z_i = 1 implies z_j = 0   (disjoint features)
    PDC2(i, j): z_i = 1 implies z_j = 1   (i is subsumed by j)
    PDC3(i, j): z_i = 0 implies z_j = 0   (j is subsumed by i)

PDC2(i, j) and PDC3(j, i) are the same statement. Any one of them makes the
factorization non-identifiable, which is what the dataset survey measures.
"""

from __future__ import annotations

import csv
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import as_binary
from .errors import ParseError
from .oracle import PDC1, PDC2, PDC3, PDC_KINDS

log = logging.getLogger(__name__)

ALL_ZERO, ALL_ONE = "all_zero", "all_one"
SURVEY_COLUMNS = ("name", "N", "K", "pdc_pair_count", "pdc_ratio", "implied_pair_count", "error")


@dataclass
class PdcReport:
    """Every ordered (i, j, kind) that holds, plus the survey statistics.

    PDC1 is symmetric and listed once with i < j; PDC2 and PDC3 are listed
    for every ordered pair where they hold. ``pair_count`` and ``ratio``
    follow the conventions given by the two flags.
    """

    N: int
    K: int
    pairs: list
    degenerate: dict  # column index -> ALL_ZERO / ALL_ONE
    kind_counts: dict
    pair_count: int
    denominator: int
    exclude_degenerate: bool = True
    count_directions: bool = False
    unordered: list = field(default_factory=list)  # (i, j) pairs behind pair_count

    @property
    def n_pairs_total(self) -> int:
        return self.K * (self.K - 1) // 2

    @property
    def pdc_ratio(self) -> float | None:
        if self.denominator == 0:
            return None
        return self.pair_count / self.denominator

    def holds(self, i: int, j: int, kind: str) -> bool:
        if kind == PDC1 and i > j:
            i, j = j, i
        return (i, j, kind) in set(self.pairs)

    def nondegenerate_pairs(self) -> list:
        return [p for p in self.pairs if p[0] not in self.degenerate and p[1] not in self.degenerate]


def relation_matrices(Z):
    """Boolean K x K matrices (pdc1, pdc2, pdc3) from co-occurrence counts.

    With C = Z^T Z and column sums s: PDC1 iff C_ij = 0, PDC2 iff C_ij = s_i,
    PDC3 iff C_ij = s_j. The diagonal is cleared.
    """
    Z = as_binary(Z)
    Zf = Z.astype(np.float64)
    C = np.rint(Zf.T @ Zf).astype(np.int64)
    s = np.diag(C).copy()
    off = ~np.eye(Z.shape[1], dtype=bool)
    pdc1 = (C == 0) & off
    pdc2 = (C == s[:, None]) & off
    pdc3 = (C == s[None, :]) & off
    return pdc1, pdc2, pdc3


def column_bitsets(Z) -> np.ndarray:
    """K x ceil(N/8) packed columns."""
    return np.packbits(as_binary(Z).astype(bool).T, axis=1)


def recheck(bits, N: int, i: int, j: int, kind: str) -> bool:
    """Definition re-check of one relation on packed columns."""
    a, b = bits[i], bits[j]
    if kind == PDC1:
        bad = a & b
    elif kind == PDC2:
        bad = a & ~b
    elif kind == PDC3:
        bad = ~a & b
    else:
        raise ValueError(f"unknown PDC kind {kind!r}")
    pad = (-N) % 8
    if pad:
        bad = bad.copy()
        bad[-1] &= 0xFF << pad & 0xFF
    return not bad.any()


def degenerate_columns(Z) -> dict:
    Z = as_binary(Z)
    s = Z.sum(axis=0)
    out = {}
    for k in np.flatnonzero(s == 0):
        out[int(k)] = ALL_ZERO
    for k in np.flatnonzero(s == Z.shape[0]):
        out[int(k)] = ALL_ONE
    return out


def detect_pdc(Z, exclude_degenerate: bool = True, count_directions: bool = False) -> PdcReport:
    """All pairwise dependency conditions of Z.

    By default an unordered pair counts once if any kind holds in either
    direction, pairs touching a constant column are left out of both count
    and denominator, and the denominator is K(K-1)/2 otherwise. With
    ``count_directions`` the unit is the ordered pair (i, j), counted when
    PDC1(i, j) or PDC2(i, j) holds, over K(K-1) ordered pairs.
    """
    Z = as_binary(Z)
    N, K = Z.shape
    pdc1, pdc2, pdc3 = relation_matrices(Z)
    bits = column_bitsets(Z)
    pairs = []
    for kind, rel in zip(PDC_KINDS, (pdc1, pdc2, pdc3)):
        for i, j in zip(*np.nonzero(rel)):
            i, j = int(i), int(j)
            if kind == PDC1 and i > j:
                continue
            if not recheck(bits, N, i, j, kind):
                raise AssertionError(f"{kind}({i}, {j}) failed the definition re-check")
            pairs.append((i, j, kind))
    pairs.sort()
    degenerate = degenerate_columns(Z)
    kind_counts = {kind: sum(1 for p in pairs if p[2] == kind) for kind in PDC_KINDS}

    live = np.ones(K, dtype=bool)
    if exclude_degenerate:
        live[list(degenerate)] = False
    n_live = int(live.sum())
    if count_directions:
        hit = (pdc1 | pdc2) & live[:, None] & live[None, :]
        units = [(int(i), int(j)) for i, j in zip(*np.nonzero(hit))]
        denominator = n_live * (n_live - 1)
    else:
        any_rel = pdc1 | pdc2 | pdc3
        any_rel = any_rel | any_rel.T
        hit = np.triu(any_rel, 1) & live[:, None] & live[None, :]
        units = [(int(i), int(j)) for i, j in zip(*np.nonzero(hit))]
        denominator = n_live * (n_live - 1) // 2
    return PdcReport(
        N=N,
        K=K,
        pairs=pairs,
        degenerate=degenerate,
        kind_counts=kind_counts,
        pair_count=len(units),
        denominator=denominator,
        exclude_degenerate=exclude_degenerate,
        count_directions=count_directions,
        unordered=units,
    )


# -- implied relations -----------------------------------------------------------
#
# Each relation is a two-literal clause over column variables; literal 2k is
# "z_k = 1" and 2k + 1 is "z_k = 0".


def _clause(i: int, j: int, kind: str):
    pos = lambda k: 2 * k  # noqa: E731
    neg = lambda k: 2 * k + 1  # noqa: E731
    if kind == PDC1:
        return neg(i), neg(j)
    if kind == PDC2:
        return neg(i), pos(j)
    return pos(i), neg(j)


def _reach(K: int, clauses) -> np.ndarray:
    """Transitive closure of the implication graph of a 2-CNF formula."""
    n = 2 * K
    R = np.eye(n, dtype=bool)
    for a, b in clauses:
        R[a ^ 1, b] = True
        R[b ^ 1, a] = True
    for m in range(n):
        R |= R[:, m : m + 1] & R[m : m + 1, :]
    return R


def entailed(K: int, relations, i: int, j: int, kind: str) -> bool:
    """Whether ``relations`` (a list of (i, j, kind)) force (i, j, kind) on every row."""
    a, b = _clause(i, j, kind)
    R = _reach(K, [_clause(*r) for r in relations])
    return bool(R[a ^ 1, b] or R[a ^ 1, a] or R[b ^ 1, b])


def implied_pairs(report: PdcReport) -> list:
    """Non-degenerate unordered pairs whose every relation follows from the other pairs."""
    rels = report.nondegenerate_pairs()
    by_pair = {}
    for r in rels:
        by_pair.setdefault(tuple(sorted(r[:2])), []).append(r)
    out = []
    for key, own in sorted(by_pair.items()):
        others = [r for r in rels if tuple(sorted(r[:2])) != key]
        R = _reach(report.K, [_clause(*r) for r in others])
        ok = True
        for r in own:
            a, b = _clause(*r)
            if not (R[a ^ 1, b] or R[a ^ 1, a] or R[b ^ 1, b]):
                ok = False
                break
        if ok:
            out.append(key)
    return out


# -- multi-label files -------------------------------------------------------------

_HEADER = re.compile(r"#\s*K\s*=\s*(\d+)\s*$")


def read_multilabel(path, n_labels: int | None = None, delimiter: str | None = None) -> np.ndarray:
    """N x K incidence matrix from a sparse label-list file.

    One instance per line. The first token without a ``:`` is the
    comma-separated label list; ``index:value`` feature tokens are ignored.
    Tokens are split on ``delimiter`` (whitespace by default). A line with no
    label token is an all-zero row. K comes from ``n_labels``, else a
    ``# K=<n>`` header, else the largest label plus one.
    """
    path = Path(path)
    text = path.read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    declared = n_labels
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m and declared is None:
                declared = int(m.group(1))
            continue
        labels = []
        for tok in line.split(delimiter):
            tok = tok.strip()
            if not tok or ":" in tok:
                continue
            for lab in tok.split(","):
                lab = lab.strip()
                if not lab:
                    continue
                if not lab.isdigit():
                    raise ParseError(f"label {lab!r} is not a non-negative integer", lineno, path)
                labels.append(int(lab))
            break
        rows.append((lineno, labels))
    top = max((max(l) for _, l in rows if l), default=-1)
    K = declared if declared is not None else top + 1
    if K < 1:
        raise ParseError("no labels found and no K declared", 0, path)
    Z = np.zeros((len(rows), K), dtype=np.int64)
    for n, (lineno, labels) in enumerate(rows):
        for lab in labels:
            if lab >= K:
                raise ParseError(f"label {lab} out of range for K={K}", lineno, path)
            Z[n, lab] = 1
    if Z.shape[0] == 0:
        raise ParseError("file has no instances", 0, path)
    return Z


def write_multilabel(path, Z, header: bool = True) -> None:
    Z = as_binary(Z)
    lines = [f"# K={Z.shape[1]}"] if header else []
    lines += [",".join(str(k) for k in np.flatnonzero(row)) for row in Z]
    Path(path).write_text("\n".join(lines) + "\n")


# -- survey ------------------------------------------------------------------------


def survey_one(path, name=None, exclude_degenerate: bool = True, count_directions: bool = False,
               delimiter: str | None = None) -> dict:
    name = name if name is not None else Path(path).stem
    try:
        Z = read_multilabel(path, delimiter=delimiter)
        rep = detect_pdc(Z, exclude_degenerate, count_directions)
    except (OSError, ValueError) as exc:
        log.error("survey: %s failed: %s", name, exc)
        return {"name": name, "N": None, "K": None, "pdc_pair_count": None, "pdc_ratio": None,
                "implied_pair_count": None, "error": str(exc)}
    return {
        "name": name,
        "N": rep.N,
        "K": rep.K,
        "pdc_pair_count": rep.pair_count,
        "pdc_ratio": rep.pdc_ratio,
        "implied_pair_count": len(implied_pairs(rep)),
        "error": None,
    }


def _survey_star(args):
    return survey_one(*args)


def survey(paths, names=None, exclude_degenerate: bool = True, count_directions: bool = False,
           jobs: int = 1, delimiter: str | None = None) -> list:
    """One row per dataset; a dataset that fails to load gets an ``error`` entry."""
    paths = list(paths)
    names = list(names) if names is not None else [None] * len(paths)
    if len(names) != len(paths):
        raise ValueError("names and paths differ in length")
    tasks = [(p, n, exclude_degenerate, count_directions, delimiter) for p, n in zip(paths, names)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_survey_star, tasks))
    return [_survey_star(t) for t in tasks]


def write_survey(path, rows, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.DictWriter(fh, fieldnames=list(SURVEY_COLUMNS), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k)) for k in SURVEY_COLUMNS})


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".6f")
    return v
