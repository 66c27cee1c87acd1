"""ozcheck command-line driver.

Exit codes: 0 when every residual is within tolerance, 1 when some relation
fails (named on stderr), 2 for usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .blocks import alt1_witness, w_witness, z_witness
from .errors import OzCheckError
from .matfield import GridSpec
from .suites import SCHEMA, SUITE_ORDER, SuiteConfig, curve_rows, report_entry, run_suite
from .traces import TraceMeasure, collapse_check, pullback_trace, simplicity_witness
from .tower import connector_symbolic


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=int, default=2, help="base of the level sequence q(k) = p^(3^k)")
    p.add_argument("--n", type=int, default=2, help="matrix size of the building block")
    p.add_argument("--grid", type=int, default=257, help="number of sample points on [0, 1]")
    p.add_argument("--tol", type=float, default=None, help="override relation tolerances")
    p.add_argument("--steps", type=_positive_int, default=2, help="connecting steps")
    p.add_argument("--eps", type=float, default=0.05, help="support width for simplicity")
    p.add_argument("--seed", type=int, default=0, help="seed for random inputs")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ozcheck",
        description="Verify order zero presentations of dimension drop algebras and their towers.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run relation suites")
    v.add_argument("--suite", default="all", choices=SUITE_ORDER + ("all",))
    _add_common(v)

    t = sub.add_parser("traces", help="trace pullback and collapse")
    t.add_argument("mode", choices=("collapse", "pullback"))
    t.add_argument("--t", type=float, default=0.0, help="Dirac point for pullback")
    _add_common(t)

    s = sub.add_parser("simplicity", help="simplicity witness h^(n)")
    _add_common(s)

    e = sub.add_parser("export", help="dump witness matrix functions")
    e.add_argument("--witness", choices=("z", "w", "alt1"), default="z")
    _add_common(e)
    return parser


def _config(args) -> SuiteConfig:
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    if args.n < 2 or args.p < 2:
        raise UsageError("--n and --p must be at least 2")
    if not 0 < args.eps < 1:
        raise UsageError("--eps must lie in (0, 1)")
    return SuiteConfig(n=args.n, p=args.p, grid=args.grid, tol=args.tol, steps=args.steps,
                       eps=args.eps, seed=args.seed)


def _emit(bundle: dict, args, name: str, rows=None) -> None:
    text = json.dumps(bundle, indent=2)
    if args.out is None:
        print(text)
        return
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / f"{name}.json").write_text(text + "\n")
    if args.format == "csv" and rows is not None:
        with open(args.out / f"{name}_curves.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["suite", "report", "relation", "t", "residual"])
            w.writerows(rows)


def _fail_exit(bundle: dict) -> int:
    if bundle.get("passed", True):
        return 0
    for suite, entries in bundle.get("suites", {}).items():
        for entry in entries:
            for name, rel in entry["relations"].items():
                if not rel["pass"]:
                    print(f"FAIL {suite}: {entry['title']}: {name} "
                          f"(residual {rel['residual']:.3e}, tol {rel['tolerance']:.1e})",
                          file=sys.stderr)
    return 1


def cmd_verify(args) -> int:
    cfg = _config(args)
    names = SUITE_ORDER if args.suite == "all" else (args.suite,)
    bundle, grouped = run_suite(names, cfg)
    bundle["command"] = "verify"
    _emit(bundle, args, "verify", curve_rows(grouped))
    return _fail_exit(bundle)


def cmd_traces(args) -> int:
    cfg = _config(args)
    grid = GridSpec(cfg.grid)
    bundle = {"schema": SCHEMA, "command": f"traces {args.mode}",
              "config": {"p": cfg.p, "steps": cfg.steps, "grid": cfg.grid}}
    if args.mode == "collapse":
        b = z_witness(cfg.p, grid).phi.one
        reps = [collapse_check(cfg.p, s, b) for s in range(1, cfg.steps + 1)]
        bundle["reports"] = [report_entry(r) for r in reps]
        bundle["passed"] = all(r.passed for r in reps)
        _emit(bundle, args, "collapse")
        if not bundle["passed"]:
            print("FAIL trace collapse bound", file=sys.stderr)
            return 1
        return 0
    if not 0 <= args.t <= 1:
        raise UsageError("--t must lie in [0, 1]")
    nu = TraceMeasure.dirac(args.t, grid)
    conn = connector_symbolic(cfg.p, cfg.steps)
    mu = pullback_trace(nu, conn)
    bundle["config"]["t"] = args.t
    bundle["atoms"] = [[t, w] for t, w in sorted(mu.atoms(1e-15).items())]
    bundle["mass"] = float(mu.weights.sum())
    bundle["passed"] = True
    _emit(bundle, args, "pullback")
    return 0


def cmd_simplicity(args) -> int:
    cfg = _config(args)
    rep = simplicity_witness(cfg.p, cfg.eps, cfg.steps)
    bundle = {"schema": SCHEMA, "command": "simplicity",
              "config": {"p": cfg.p, "steps": cfg.steps, "eps": cfg.eps},
              "passed": rep.passed, "reports": [report_entry(rep)]}
    _emit(bundle, args, "simplicity")
    return 0 if rep.passed else 1


def cmd_export(args) -> int:
    cfg = _config(args)
    if args.out is None:
        raise UsageError("export needs --out")
    grid = GridSpec(cfg.grid)
    if args.witness == "z":
        wit = z_witness(cfg.n, grid)
        extra = {"v": wit.v}
    elif args.witness == "w":
        wit = w_witness(cfg.n, grid)
        extra = {"v": wit.v}
    else:
        wit = alt1_witness(cfg.n, grid)
        extra = {"h": wit.h}
    items = {f"phi_e{i + 1}{j + 1}": wit.phi.image(i, j)
             for i in range(cfg.n) for j in range(cfg.n)}
    items.update({f"psi_e{i + 1}{j + 1}": wit.psi.image(i, j) for i in range(2) for j in range(2)})
    items.update(extra)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, x in items.items():
        if args.format == "json":
            (args.out / f"{name}.json").write_text(x.to_json())
        else:
            (args.out / f"{name}.csv").write_text(x.to_csv())
    manifest = {"schema": SCHEMA, "command": "export", "witness": args.witness, "n": cfg.n,
                "grid": cfg.grid, "format": args.format, "files": sorted(items)}
    (args.out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


COMMANDS = {"verify": cmd_verify, "traces": cmd_traces, "simplicity": cmd_simplicity,
            "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, OzCheckError, ValueError) as exc:
        print(f"ozcheck: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
