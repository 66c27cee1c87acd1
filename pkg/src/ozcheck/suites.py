"""Verification suites run by the command-line driver, in a fixed order."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import plfun
from .blocks import (
    alt1_witness, fibre_span_check, w_center_check, w_identities, w_witness,
    witness_generators, z_witness,
)
from .matfield import GridSpec, membership_residual
from .ordzero import validate_alt1, validate_cone, validate_R, validate_Rhat
from .report import RelationReport
from .tower import NumericStage, fingerprint_suite, hat_maps_w, hat_maps_z, trace_shadow
from .traces import collapse_check, simplicity_witness, w_boundedness_check

SCHEMA = 1
SUITE_ORDER = ("pl", "cone", "z", "w", "alt1", "tower-z", "tower-w", "fingerprint", "traces")


@dataclass(frozen=True)
class SuiteConfig:
    n: int = 2
    p: int = 2
    grid: int = 257
    tol: float | None = None
    steps: int = 2
    eps: float = 0.05
    seed: int = 0

    def tolerance(self, default: float) -> float:
        return default if self.tol is None else self.tol

    @property
    def grid_spec(self) -> GridSpec:
        return GridSpec(self.grid)


def _membership(rep: RelationReport, name: str, wit, tol: float) -> None:
    worst = 0.0
    for i in range(wit.phi.n):
        for j in range(wit.phi.n):
            worst = max(worst, membership_residual(wit.phi.image(i, j)))
    for i in range(2):
        for j in range(2):
            worst = max(worst, membership_residual(wit.psi.image(i, j)))
    rep.add(name, worst, tol)


def suite_pl(cfg: SuiteConfig) -> list[RelationReport]:
    rep = plfun.verify_pl_identities()
    comp = RelationReport("PL composition")
    hh = plfun.compose(plfun.h, plfun.h)
    target = plfun.PLFunc([(0, 0), (Fraction(10, 16), 0), (Fraction(11, 16), 1), (1, 1)])
    comp.add("h o h = clamp(16t - 10)", float(hh.max_abs_diff(target)), 0.0)
    seq = plfun.lambda_sequence(cfg.p)
    frac = seq.nonconstant_fraction
    comp.add("lambda fraction = 1/(q^2 - q + 1)",
             float(abs(frac - plfun.nonconstant_factor(cfg.p))), 0.0, detail=str(frac))
    return [rep, comp]


def suite_cone(cfg: SuiteConfig) -> list[RelationReport]:
    wit = w_witness(cfg.n, cfg.grid_spec)
    rep = validate_cone(wit.phi.cone_generators(), cfg.tolerance(1e-10))
    rep.title = f"cone relations, W({cfg.n},{cfg.n + 1}) generators"
    return [rep]


def suite_z(cfg: SuiteConfig) -> list[RelationReport]:
    tol = cfg.tolerance(1e-10)
    wit = z_witness(cfg.n, cfg.grid_spec)
    rep = validate_R(wit.phi, wit.psi, tol)
    rep.title = f"unital drop relations, Z({cfg.n},{cfg.n + 1})"
    _membership(rep, "membership", wit, max(tol, 1e-11))
    return [rep]


def suite_w(cfg: SuiteConfig) -> list[RelationReport]:
    tol = cfg.tolerance(1e-10)
    wit = w_witness(cfg.n, cfg.grid_spec)
    rep = validate_Rhat(wit.phi, wit.psi, tol)
    rep.title = f"nonunital drop relations, W({cfg.n},{cfg.n + 1})"
    _membership(rep, "membership", wit, max(tol, 1e-11))
    out = [rep, w_identities(wit, max(tol, 1e-12)),
           w_center_check(cfg.n, cfg.grid_spec, tol)]
    gens = witness_generators(wit.phi, wit.psi)
    rep.info["fibre_dimension"] = (cfg.n * (cfg.n + 1)) ** 2
    rep.info["span_words_le_4"] = {f"{t:g}": fibre_span_check(gens, t)
                                   for t in _interior(cfg.grid_spec)}
    rep.info["generated_algebra_dimension"] = fibre_span_check(gens, 0.5, max_len=None)
    return out


def _interior(grid: GridSpec, count: int = 5) -> list[float]:
    M = grid.sample_count
    idx = np.linspace(0, M - 1, count + 2)[1:-1].round().astype(int)
    return [float(grid.points[k]) for k in idx]


def suite_alt1(cfg: SuiteConfig) -> list[RelationReport]:
    tol = cfg.tolerance(1e-9)
    wit = alt1_witness(cfg.n, cfg.grid_spec, tol)
    rep = validate_alt1(wit.phi, wit.psi, wit.h, tol)
    rep.title = f"alt1 relations, Z({cfg.n},{cfg.n + 1})"
    return [rep]


def suite_tower(cfg: SuiteConfig, kind: str) -> list[RelationReport]:
    tol = cfg.tolerance(1e-8)
    stage = NumericStage(cfg.n, cfg.grid_spec, kind)
    *_, rep = stage.hat_maps(tol=tol)
    return [rep]


def suite_fingerprint(cfg: SuiteConfig) -> list[RelationReport]:
    tol = cfg.tolerance(1e-9)
    stage = NumericStage(cfg.n, cfg.grid_spec)
    return [fingerprint_suite(stage, seed=cfg.seed, tol=tol), trace_shadow(stage, tol)]


def suite_traces(cfg: SuiteConfig) -> list[RelationReport]:
    b = z_witness(cfg.p, cfg.grid_spec).phi.one
    out = [collapse_check(cfg.p, s, b) for s in range(1, cfg.steps + 1)]
    out.append(w_boundedness_check(cfg.p, max(cfg.steps, 1) + 1))
    out.append(simplicity_witness(cfg.p, cfg.eps, cfg.steps))
    return out


SUITES: dict[str, Callable[[SuiteConfig], list[RelationReport]]] = {
    "pl": suite_pl,
    "cone": suite_cone,
    "z": suite_z,
    "w": suite_w,
    "alt1": suite_alt1,
    "tower-z": lambda cfg: suite_tower(cfg, "Z"),
    "tower-w": lambda cfg: suite_tower(cfg, "W"),
    "fingerprint": suite_fingerprint,
    "traces": suite_traces,
}


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("OZCHECK_THREADS", "1")))
    except ValueError:
        return 1


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


def report_entry(rep: RelationReport) -> dict:
    out = {"title": rep.title, "passed": rep.passed, "relations": rep.to_dict()}
    if rep.info:
        out["info"] = _json_safe(rep.info)
    return out


def run_suite(names, cfg: SuiteConfig) -> tuple[dict, dict[str, list[RelationReport]]]:
    """Run the named suites (in canonical order) and assemble the JSON bundle."""
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    ordered = [s for s in SUITE_ORDER if s in names]
    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        futures = [pool.submit(SUITES[s], cfg) for s in ordered]
        results = [f.result() for f in futures]
    grouped = dict(zip(ordered, results))
    bundle = {
        "schema": SCHEMA,
        "config": {**asdict(cfg), "suites": ordered},
        "passed": all(r.passed for group in results for r in group),
        "suites": {s: [report_entry(r) for r in group] for s, group in grouped.items()},
    }
    return bundle, grouped


def curve_rows(grouped: dict[str, list[RelationReport]]) -> list[tuple]:
    """(suite, report, relation, t, residual) rows for every recorded curve."""
    rows = []
    for suite, reps in grouped.items():
        for rep in reps:
            for r in rep:
                if r.curve is None:
                    continue
                pts = np.linspace(0.0, 1.0, len(r.curve))
                rows.extend((suite, rep.title, r.name, float(t), float(v))
                            for t, v in zip(pts, r.curve))
    return rows


# --- grid refinement ------------------------------------------------------------

def _witness_reports(n: int, grid: GridSpec) -> dict[str, RelationReport]:
    zw = z_witness(n, grid)
    ww = w_witness(n, grid)
    return {f"R on Z({n})": validate_R(zw.phi, zw.psi),
            f"Rhat on W({n})": validate_Rhat(ww.phi, ww.psi)}


def _interpolated_reports(n: int, coarse: GridSpec) -> dict[str, RelationReport]:
    fine = coarse.refine()
    zw = z_witness(n, coarse)
    ww = w_witness(n, coarse)
    return {f"R on Z({n})": validate_R(zw.phi.resample(fine), zw.psi.resample(fine)),
            f"Rhat on W({n})": validate_Rhat(ww.phi.resample(fine), ww.psi.resample(fine))}


def roundoff_floor(dim: int) -> float:
    """Size of accumulated roundoff in a short product of dim x dim matrices."""
    return 8 * dim * float(np.finfo(float).eps)


def refinement_report(levels=(2, 3, 8), grids=(129, 257), tower_n: int | None = 2,
                      floor: float | None = None, interp_grids=(65, 129)) -> RelationReport:
    """On-grid residuals must not grow from the coarse to the fine grid.

    On-grid residuals sit at roundoff, so growth below ``floor`` (by default
    :func:`roundoff_floor` of the fibre dimension) is ignored.
    Interpolation sensitivity: witnesses sampled on M points and linearly
    interpolated to 2M - 1 points; the resulting residuals must shrink with M.
    """
    coarse, fine = (GridSpec(m) for m in grids)
    rep = RelationReport(f"grid refinement {grids[0]} -> {grids[1]}")
    pairs: dict[str, tuple[RelationReport, RelationReport]] = {}
    dims: dict[str, int] = {}
    for n in levels:
        a, b = _witness_reports(n, coarse), _witness_reports(n, fine)
        for key in a:
            pairs[key] = (a[key], b[key])
            dims[key] = n * (n + 1)
    if tower_n is not None:
        for kind, fn in (("Z", hat_maps_z), ("W", hat_maps_w)):
            runs = []
            for g in (coarse, fine):
                stage = NumericStage(tower_n, g, kind)
                *_, r = fn(stage.witness.phi, stage.witness.psi, check_inputs=False)
                runs.append(r)
            pairs[f"connecting step ({kind})"] = tuple(runs)
            dims[f"connecting step ({kind})"] = stage.witness.phi.dim
    for key, (a, b) in pairs.items():
        fl = roundoff_floor(dims[key]) if floor is None else floor
        for res in a:
            r_fine = b[res.name].value
            growth = max(r_fine - max(res.value, fl), 0.0)
            rep.add(f"{key}: {res.name}", growth, 0.0,
                    detail=f"{res.value:.3e} -> {r_fine:.3e}")
    sens = {m: _interpolated_reports(levels[0], GridSpec(m)) for m in interp_grids}
    m0, m1 = interp_grids
    fl = roundoff_floor(levels[0] * (levels[0] + 1)) if floor is None else floor
    table = {}
    for key in sens[m0]:
        for res in sens[m0][key]:
            v0, v1 = res.value, sens[m1][key][res.name].value
            table[f"{key}: {res.name}"] = [v0, v1]
            rep.add(f"interpolation {key}: {res.name}", max(v1 - max(v0, fl), 0.0), 0.0,
                    detail=f"M={m0}: {v0:.3e}, M={m1}: {v1:.3e}")
    rep.info["interpolation_sensitivity"] = table
    rep.info["grids"] = list(grids)
    rep.info["roundoff_floor"] = {k: roundoff_floor(d) if floor is None else floor
                                  for k, d in dims.items()}
    return rep
