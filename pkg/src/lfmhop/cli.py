"""Command-line experiment harness.

Stages communicate through files so any estimator's (Z, W) can be fed to
``hop``. Every artifact records the seed, a hash of the effective config and
the package version. Exit codes: 0 ok, 1 usage or config, 2 data, 3 drift.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import BaselineConfig, fit
from .core import LfmInstance, hamming_error, regularizer_metric, residual
from .counting import COUNT_COLUMNS, SUMMARY_COLUMNS, count_experiment, summarize, write_rows
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    GenerationError,
    NumericalDriftError,
    ParseError,
)
from .hopper import HopperConfig, hop, write_trace
from .matio import BINARY, REAL, read_matrix, write_matrix
from .oracle import enumerate_equivalents
from .pdc import SURVEY_COLUMNS, survey, write_survey
from .sampler import SamplerConfig, sample_candidates
from .synthgen import GeneratorSpec, gen_instance

log = logging.getLogger("lfmhop")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DRIFT = 0, 1, 2, 3
DEFAULT_TAU = 0.01  # noise std 0.1 against unit feature scale


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- config plumbing ---------------------------------------------------------------


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def _inf_fields(cls):
    return {f.name for f in dataclasses.fields(cls) if isinstance(f.default, float) and math.isinf(f.default)}


def build_dataclass(cls, d: dict | None, section: str, **overrides):
    """Instantiate a config dataclass, rejecting unknown keys.

    Fields whose default is infinite accept null or "inf" in JSON.
    """
    d = dict(d or {})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown field {unknown[0]!r} in {section} config")
    for name in _inf_fields(cls):
        if name in d and (d[name] is None or d[name] == "inf"):
            d[name] = math.inf
    d.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section} config: {exc}") from None


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        obj = dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def config_hash(cfg) -> str:
    blob = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Run:
    """Output directory plus the provenance stamped on every artifact."""

    def __init__(self, out, seed, cfg, fmt: str = "csv"):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.cfg = _jsonable(cfg)
        self.fmt = fmt
        self.provenance = {"seed": seed, "config_hash": config_hash(cfg), "version": __version__}

    @property
    def header(self) -> str:
        p = self.provenance
        return f"seed={p['seed']} config_hash={p['config_hash']} version={p['version']}"

    def path(self, name) -> Path:
        return self.out / name

    def matrix(self, name, M, kind=REAL):
        write_matrix(self.path(name), M, kind, header=self.header)

    def json(self, name, payload):
        body = {"provenance": self.provenance, "config": self.cfg, **_jsonable(payload)}
        self.path(name).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")

    def table(self, stem, rows, columns, writer=None):
        if self.fmt == "json":
            self.json(stem + ".json", {"rows": rows})
        elif writer is not None:
            writer(self.path(stem + ".csv"), rows, comment=self.header)
        else:
            write_rows(self.path(stem + ".csv"), rows, columns, comment=self.header)


def _read(path, kind, what):
    if path is None:
        raise UsageError(f"missing required input --{what}")
    if not Path(path).exists():
        raise FileNotFoundError(f"{what} file {path} not found")
    return read_matrix(path, kind)


def _instance(X, cfg: dict) -> LfmInstance:
    tau = cfg.get("tau")
    if tau is None:
        sigma_x = cfg.get("sigma_x")
        tau = DEFAULT_TAU if sigma_x is None else float(sigma_x) ** 2 / float(cfg.get("sigma_w", 1.0)) ** 2
    pi = cfg.get("pi")
    return LfmInstance.from_tau(X, float(tau), None if pi is None else np.asarray(pi, dtype=float))


def solution_metrics(X, Z, W, Z_star=None) -> dict:
    m = {"residual": residual(X, Z, W), "E_Reg": regularizer_metric(W)}
    if Z_star is not None:
        m["E_Hamm"] = hamming_error(Z, Z_star)
    return m


def _check_keys(cfg: dict, allowed, section):
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown field {unknown[0]!r} in {section} config")


# -- subcommands ---------------------------------------------------------------------


def cmd_synth(args) -> int:
    raw = load_config(args.config)
    if not raw:
        raise ConfigError("synth needs a generator spec via --config")
    spec = GeneratorSpec.from_dict(raw)
    if args.seed is not None:
        spec = spec.with_(rng_seed=args.seed)
    run = Run(args.out, spec.rng_seed, spec.to_dict(), args.format)
    X, Z, W, inst = gen_instance(spec)
    run.matrix("X.csv", X)
    run.matrix("Zstar.csv", Z, BINARY)
    run.matrix("Wstar.csv", W)
    run.json("meta.json", {"spec": spec.to_dict(), "tau": inst.tau, "shape": {"N": spec.N, "K": spec.K, "D": spec.D}})
    return EXIT_OK


def cmd_fit(args) -> int:
    raw = load_config(args.config)
    _check_keys(raw, ("K", "tau", "sigma_x", "sigma_w", "pi", "baseline"), "fit")
    K = args.K if args.K is not None else raw.get("K")
    if K is None:
        raise ConfigError("fit needs K (--K or config field 'K')")
    bcfg = build_dataclass(BaselineConfig, raw.get("baseline"), "baseline", rng_seed=args.seed)
    X = _read(args.X, REAL, "X")
    inst = _instance(X, raw)
    eff = {"K": int(K), "tau": inst.tau, "baseline": bcfg}
    run = Run(args.out, bcfg.rng_seed, eff, args.format)
    res = fit(inst, int(K), bcfg)
    run.matrix("Zhat.csv", res.Z, BINARY)
    run.matrix("What.csv", res.W)
    rows = [{"half_step": i, "objective": v} for i, v in enumerate(res.trace)]
    run.table("fit_trace", rows, ("half_step", "objective"))
    Z_star = _read(args.Zstar, BINARY, "Zstar") if args.Zstar else None
    metrics = solution_metrics(X, res.Z, res.W, Z_star)
    metrics["objective"] = res.objective
    run.json("metrics.json", {"metrics": metrics, "restart": res.restart})
    return EXIT_OK


def cmd_hop(args) -> int:
    raw = load_config(args.config)
    _check_keys(raw, ("tau", "sigma_x", "sigma_w", "pi", "sampler", "hopper"), "hop")
    scfg = build_dataclass(SamplerConfig, raw.get("sampler"), "sampler", rng_seed=args.seed)
    hcfg = build_dataclass(HopperConfig, raw.get("hopper"), "hopper", rng_seed=args.seed)
    X = _read(args.X, REAL, "X")
    Z = _read(args.Z, BINARY, "Z")
    W = _read(args.W, REAL, "W")
    if Z.shape[0] != X.shape[0] or Z.shape[1] != W.shape[0] or W.shape[1] != X.shape[1]:
        raise DimensionError(f"shape mismatch: X {X.shape}, Z {Z.shape}, W {W.shape}")
    inst = _instance(X, raw)
    eff = {"tau": inst.tau, "sampler": scfg, "hopper": hcfg}
    run = Run(args.out, hcfg.rng_seed, eff, args.format)
    cands = sample_candidates(Z, scfg)
    res = hop(Z, W, inst, cands, hcfg)
    run.matrix("Zhop.csv", res.Z, BINARY)
    run.matrix("Whop.csv", res.W)
    run.matrix("U.csv", res.U)
    if args.format == "json":
        run.json("hop_trace.json", {"rows": [list(t) for t in res.trace]})
    else:
        write_trace(run.path("hop_trace.csv"), res.trace, comment=run.header)
    Z_star = _read(args.Zstar, BINARY, "Zstar") if args.Zstar else None
    before = solution_metrics(X, Z, W, Z_star)
    after = solution_metrics(X, res.Z, res.W, Z_star)
    metrics = {f"{k}_before": v for k, v in before.items()}
    metrics.update({f"{k}_after": v for k, v in after.items()})
    metrics.update(cost_before=res.initial_cost, cost_after=res.cost, n_candidates=len(cands),
                   clamped_entries=res.clamped_entries)
    run.json("metrics.json", {"metrics": metrics})
    return EXIT_OK


def cmd_enumerate(args) -> int:
    raw = load_config(args.config)
    _check_keys(raw, ("max_N", "max_K"), "enumerate")
    Z = _read(args.Z, BINARY, "Z")
    run = Run(args.out, args.seed, raw, args.format)
    rep = enumerate_equivalents(Z, raw.get("max_N", 16), raw.get("max_K", 5))
    sols = []
    for U in rep.canonical_transforms:
        ZU = Z @ U
        sols.append({"U": U.tolist(), "hamming_to_input": hamming_error(ZU, Z)})
    cert = rep.certification
    run.json(
        "equivalents.json",
        {
            "count": rep.count,
            "identifiable": rep.identifiable,
            "complete": rep.complete,
            "noninteger_columns": rep.noninteger_columns,
            "certificate": dataclasses.asdict(cert),
            "candidate_columns": rep.candidate_columns.tolist(),
            "solutions": sols,
        },
    )
    run.json("metrics.json", {"metrics": {"count": rep.count, "max_hamming": max(s["hamming_to_input"] for s in sols)}})
    return EXIT_OK


def cmd_pdc_scan(args) -> int:
    raw = load_config(args.config)
    _check_keys(raw, ("exclude_degenerate", "count_directions", "delimiter", "names"), "pdc-scan")
    if not args.paths:
        raise UsageError("pdc-scan needs at least one dataset path")
    run = Run(args.out, args.seed, raw, args.format)
    rows = survey(
        args.paths,
        raw.get("names"),
        exclude_degenerate=raw.get("exclude_degenerate", True),
        count_directions=raw.get("count_directions", False),
        jobs=args.jobs,
        delimiter=raw.get("delimiter"),
    )
    run.table("survey", rows, SURVEY_COLUMNS, writer=write_survey)
    failed = [r["name"] for r in rows if r["error"]]
    run.json("metrics.json", {"metrics": {"datasets": len(rows), "failed": failed}})
    return EXIT_DATA if len(failed) == len(rows) else EXIT_OK


def cmd_metrics(args) -> int:
    X = _read(args.X, REAL, "X")
    Z = _read(args.Z, BINARY, "Z")
    W = _read(args.W, REAL, "W")
    Z_star = _read(args.Zstar, BINARY, "Zstar") if args.Zstar else None
    run = Run(args.out, args.seed, {}, args.format)
    metrics = {f"{k}_after": v for k, v in solution_metrics(X, Z, W, Z_star).items()}
    if args.Zref or args.Wref:
        Zr = _read(args.Zref, BINARY, "Zref")
        Wr = _read(args.Wref, REAL, "Wref")
        metrics.update({f"{k}_before": v for k, v in solution_metrics(X, Zr, Wr, Z_star).items()})
    run.json("metrics.json", {"metrics": metrics})
    return EXIT_OK


def cmd_count_experiment(args) -> int:
    raw = load_config(args.config)
    _check_keys(raw, ("generator", "N_grid", "trials", "sampler"), "count-experiment")
    if "generator" not in raw or "N_grid" not in raw:
        raise ConfigError("count-experiment config needs 'generator' and 'N_grid'")
    gen = dict(raw["generator"])
    gen.setdefault("N", int(raw["N_grid"][0]))
    spec = GeneratorSpec.from_dict(gen)
    scfg = build_dataclass(SamplerConfig, raw.get("sampler"), "sampler")
    seed = 0 if args.seed is None else args.seed
    trials = int(raw.get("trials", 20))
    eff = {"generator": spec.to_dict(), "N_grid": list(raw["N_grid"]), "trials": trials, "sampler": scfg}
    run = Run(args.out, seed, eff, args.format)
    rows = count_experiment(spec, raw["N_grid"], trials, scfg, seed=seed, jobs=args.jobs)
    run.table("counts", rows, COUNT_COLUMNS)
    summary = summarize(rows)
    run.table("count_summary", summary, SUMMARY_COLUMNS)
    run.json("metrics.json", {"metrics": {"summary": summary}})
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="global RNG seed (overrides the config)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for trial-level parallelism")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="format of tabular outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="lfmhop", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("synth", parents=[common], help="generate a synthetic instance").set_defaults(func=cmd_synth)

    f = sub.add_parser("fit", parents=[common], help="baseline MAP fit")
    f.add_argument("--X", required=True)
    f.add_argument("--K", type=int)
    f.add_argument("--Zstar")
    f.set_defaults(func=cmd_fit)

    h = sub.add_parser("hop", parents=[common], help="hop between equivalent solutions")
    for name in ("X", "Z", "W"):
        h.add_argument(f"--{name}", required=True)
    h.add_argument("--Zstar")
    h.set_defaults(func=cmd_hop)

    e = sub.add_parser("enumerate", parents=[common], help="exact equivalence class of a small Z")
    e.add_argument("--Z", required=True)
    e.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("pdc-scan", parents=[common], help="pairwise dependency survey of label files")
    s.add_argument("paths", nargs="*")
    s.set_defaults(func=cmd_pdc_scan)

    m = sub.add_parser("metrics", parents=[common], help="residual, E_Reg and E_Hamm of a solution")
    for name in ("X", "Z", "W"):
        m.add_argument(f"--{name}", required=True)
    m.add_argument("--Zstar")
    m.add_argument("--Zref")
    m.add_argument("--Wref")
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("count-experiment", parents=[common], help="count equivalent solutions over an N grid")
    c.set_defaults(func=cmd_count_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"lfmhop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalDriftError as exc:
        print(f"lfmhop: numerical drift: {exc}", file=sys.stderr)
        return EXIT_DRIFT
    except (ParseError, DimensionError, DomainError, GenerationError, OSError) as exc:
        print(f"lfmhop: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
