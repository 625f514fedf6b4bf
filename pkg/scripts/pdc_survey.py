"""Pairwise dependency survey of multi-label datasets.

Pass label-list files to survey them, or --demo to build a small planted
corpus first. Results go to survey.csv in --out.
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from lfmhop.oracle import PDC1, PDC2, PDC3
from lfmhop.pdc import survey, write_multilabel, write_survey
from lfmhop.synthgen import gen_z_constrained

DEMO = {
    "chained": [(0, 1, PDC2), (1, 2, PDC2), (3, 4, PDC1), (5, 3, PDC2),
                (6, 7, PDC3), (8, 9, PDC1), (10, 11, PDC2), (12, 13, PDC1)],
    "disjoint": [(2 * m, 2 * m + 1, PDC1) for m in range(7)],
    "none": [],
}


def build_demo(root: Path):
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for n, (name, cons) in enumerate(DEMO.items()):
        Z = gen_z_constrained(3000, 14, cons, 0.5, np.random.default_rng(n))
        p = root / f"{name}.txt"
        write_multilabel(p, Z)
        paths.append(p)
    return paths


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("paths", nargs="*", type=Path)
    ap.add_argument("--demo", action="store_true")
    ap.add_argument("--keep-degenerate", action="store_true", help="count pairs touching constant columns")
    ap.add_argument("--directions", action="store_true", help="count ordered pairs instead of unordered ones")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/survey"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(message)s")

    paths = list(args.paths)
    if args.demo:
        paths += build_demo(args.out / "demo")
    if not paths:
        ap.error("give dataset paths or --demo")
    rows = survey(paths, exclude_degenerate=not args.keep_degenerate,
                  count_directions=args.directions, jobs=args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    write_survey(args.out / "survey.csv", rows)
    for r in rows:
        if r["error"]:
            print(f"{r['name']}: error: {r['error']}")
        else:
            ratio = "n/a" if r["pdc_ratio"] is None else f"{100 * r['pdc_ratio']:.1f}%"
            print(f"{r['name']}: N={r['N']} K={r['K']} pairs={r['pdc_pair_count']} "
                  f"(implied {r['implied_pair_count']}) ratio={ratio}")


if __name__ == "__main__":
    main()
