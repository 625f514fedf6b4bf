"""Dense CSV matrix files.

One matrix row per line, comma separated. Lines starting with ``#`` are
comments (used for provenance headers) and are skipped on read. Reals are
written with 17 significant digits so a write/read cycle is bit-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError

BINARY = "binary01"
REAL = "real"


def write_matrix(path, M, kind: str = REAL, header: str | None = None) -> None:
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    if kind == BINARY:
        if not np.all((M == 0) | (M == 1)):
            raise ValueError("binary01 matrix has entries outside {0,1}")
        for row in M.astype(np.int64):
            lines.append(",".join("1" if v else "0" for v in row))
    elif kind == REAL:
        for row in M.astype(float):
            lines.append(",".join(format(float(v), ".17g") for v in row))
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path, kind: str = REAL) -> np.ndarray:
    if kind not in (BINARY, REAL):
        raise ValueError(f"unknown matrix kind {kind!r}")
    path = Path(path)
    rows = []
    width = None
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = [t.strip() for t in line.split(",")]
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise ParseError(
                    f"ragged row: {len(tokens)} fields, expected {width}", lineno, path
                )
            if kind == BINARY:
                bad = [t for t in tokens if t not in ("0", "1")]
                if bad:
                    raise ParseError(f"token {bad[0]!r} is not 0 or 1", lineno, path)
                rows.append([int(t) for t in tokens])
            else:
                try:
                    rows.append([float(t) for t in tokens])
                except ValueError:
                    bad = next(t for t in tokens if not _is_float(t))
                    raise ParseError(f"token {bad!r} is not a real number", lineno, path) from None
    if not rows:
        raise ParseError("empty matrix file", 0, path)
    dtype = np.int64 if kind == BINARY else float
    return np.array(rows, dtype=dtype)


def _is_float(t: str) -> bool:
    try:
        float(t)
    except ValueError:
        return False
    return True
