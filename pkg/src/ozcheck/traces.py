"""Tracial states on the building blocks and the quantitative estimates of the tower.

A :class:`TraceMeasure` is a probability vector on the grid; the trace of x is
the weighted sum of normalized fibre traces.  Pulling back along the connecting
data pushes each atom through every parameter map of the decomposition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import plfun
from .errors import DomainError, StructuralError
from .matfield import GridSpec, MatFun
from .plfun import ConnectorSymbolic, iterate
from .report import RelationReport
from .tower import connector_symbolic, expected_fraction


@dataclass(frozen=True)
class TraceMeasure:
    grid: GridSpec
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.grid.sample_count,):
            raise StructuralError("one weight per grid point")
        if w.min() < -1e-15:
            raise DomainError("trace measures are positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"total mass {w.sum()!r} != 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, t: float, grid: GridSpec = GridSpec()) -> "TraceMeasure":
        return cls(grid, _split_atoms(np.array([t]), np.array([1.0]), grid))

    @classmethod
    def uniform(cls, grid: GridSpec = GridSpec()) -> "TraceMeasure":
        M = grid.sample_count
        return cls(grid, np.full(M, 1.0 / M))

    def atoms(self, cutoff: float = 0.0) -> dict[float, float]:
        idx = np.nonzero(self.weights > cutoff)[0]
        return {float(self.grid.points[k]): float(self.weights[k]) for k in idx}


def _split_atoms(positions: np.ndarray, masses: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Masses at arbitrary positions, split linearly between neighbouring grid points."""
    M = grid.sample_count
    pos = np.clip(np.asarray(positions, dtype=float), 0.0, 1.0) * (M - 1)
    lo = np.clip(np.floor(pos).astype(int), 0, M - 2)
    frac = pos - lo
    out = np.zeros(M)
    np.add.at(out, lo, masses * (1 - frac))
    np.add.at(out, lo + 1, masses * frac)
    return out


def trace_of(mu: TraceMeasure, x: MatFun, tol: float = 1e-12) -> float:
    """sum_j w_j ntr(x(t_j)); the imaginary part must vanish for self-adjoint x."""
    if x.grid != mu.grid:
        raise StructuralError("measure and element live on different grids")
    val = complex(mu.weights @ x.normalized_trace())
    if x.hermitian_defect().max() <= tol and abs(val.imag) > tol:
        raise DomainError(f"trace of a self-adjoint element has imaginary part {val.imag:.2e}")
    return val.real


def pullback_trace(nu: TraceMeasure, connector: ConnectorSymbolic) -> TraceMeasure:
    """(1/|L|) sum_F F_* nu: every atom is pushed through every parameter map."""
    vals, w = connector.evaluate(nu.grid.points)
    masses = w[:, None] * nu.weights[None, :]
    return TraceMeasure(nu.grid, _split_atoms(vals.ravel(), masses.ravel(), nu.grid))


def trace_profile(b: MatFun, connector: ConnectorSymbolic) -> np.ndarray:
    """t -> tau_t(b) for the pulled-back Dirac traces, on the grid of b."""
    vals, w = connector.evaluate(b.points)
    ntr = b.normalized_trace().real
    per_entry = np.stack([np.interp(v, b.points, ntr) for v in vals])
    return w @ per_entry


def collapse_check(q: int, steps: int, b: MatFun, tol: float = 1e-12) -> RelationReport:
    """sup over pairs of Dirac traces of |tau_1 - tau_2| after ``steps`` pullbacks.

    Bounded by 2 |b| prod_j 1/(q_j^2 - q_j + 1).
    """
    conn = connector_symbolic(q, steps)
    prof = trace_profile(b, conn)
    measured = float(prof.max() - prof.min())
    factor = conn.nonconstant_fraction
    if factor != expected_fraction(q, steps):
        raise StructuralError("connector fraction disagrees with the closed form")
    norm = b.sup_norm()
    bound = 2 * norm * float(factor)
    rep = RelationReport(f"trace collapse q={q} steps={steps}")
    ratio = measured / bound if bound > 0 else 0.0
    rep.add("sup |tau_1 - tau_2| <= 2|b| prod", max(measured - bound, 0.0), tol,
            worst_t=float(b.points[int(np.argmax(prof))]),
            detail=f"measured {measured:.12g}, bound {bound:.12g}, ratio {ratio:.6g}")
    rep.info.update({
        "measured": measured, "bound": bound, "ratio_to_bound": ratio, "norm_b": norm,
        "factor": str(factor), "effective_factor": str(conn.effective_nonconstant_fraction),
        "entries": str(conn.entry_count),
    })
    return rep


def w_boundedness_check(q: int, steps: int, symbolic_steps: int = 2) -> RelationReport:
    """Partial products of 1/(q_j^2 - q_j + 1) and their summability.

    The first ``symbolic_steps`` products are also read off the composite connector.
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    rep = RelationReport(f"W boundedness q={q}")
    partial = [expected_fraction(q, k) for k in range(1, steps + 1)]
    for k in range(1, min(steps, symbolic_steps) + 1):
        got = connector_symbolic(q, k).nonconstant_fraction
        rep.add(f"connector fraction [{k}]", abs(float(got - partial[k - 1])), 0.0,
                detail=f"{got} vs {partial[k - 1]}")
    worst = max((float(partial[k + 1] / partial[k]) for k in range(len(partial) - 1)),
                default=0.0)
    # strictly decreasing with ratio <= 1/3 means a convergent geometric majorant
    rep.add("partial products decrease geometrically", max(worst - Fraction(1, 3), 0.0), 0.0,
            detail=f"largest ratio {worst:.6g}")
    tail = sum(partial, Fraction(0))
    rep.info.update({"partial_products": [str(x) for x in partial],
                     "partial_sum": str(tail)})
    return rep


# --- simplicity ------------------------------------------------------------------

ENUMERATION_LIMIT = 1 << 20


def _value_progressions(fn: plfun.PLFunc, q: int):
    """Values fn(i/q), 1 <= i <= q-1, as (first, last, step) progressions per segment."""
    out = []
    for (x0, y0), (x1, y1) in fn.segments():
        i0 = max(1, math.ceil(x0 * q))
        i1 = min(q - 1, math.floor(x1 * q))
        if i0 > i1:
            continue
        slope = (y1 - y0) / (x1 - x0)
        first = y0 + slope * (Fraction(i0, q) - x0)
        last = y0 + slope * (Fraction(i1, q) - x0)
        out.append((first, last, slope / q))
    return out


def covering_radius(values) -> Fraction:
    """Largest gap between consecutive points of a finite set in [0, 1]."""
    pts = sorted(set(values))
    return max((b - a for a, b in zip(pts, pts[1:])), default=Fraction(0))


def grid_image_gaps(fn: plfun.PLFunc, q: int) -> Fraction:
    """covering_radius of {fn(i/q) : 1 <= i <= q-1}.

    Enumerated exactly for moderate q; for huge q, fn must be monotone and the
    gaps are read off the per-segment arithmetic progressions.
    """
    if q <= ENUMERATION_LIMIT:
        return covering_radius(fn(Fraction(i, q)) for i in range(1, q))
    slopes = fn.slopes()
    if not (all(s >= 0 for s in slopes) or all(s <= 0 for s in slopes)):
        raise DomainError("analytic gap computation needs a monotone function")
    spans = sorted((min(a, b), max(a, b), abs(inc)) for a, b, inc in _value_progressions(fn, q))
    gap = max((inc for lo, hi, inc in spans if hi > lo), default=Fraction(0))
    for (_, hi, _), (lo, _, _) in zip(spans, spans[1:]):
        gap = max(gap, lo - hi)
    return gap


def simplicity_witness(q0: int, eps: float, steps: int) -> RelationReport:
    """Steepness of h^(steps) against the evaluation grid at level q_steps = q0^(3^steps)."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if steps < 1:
        raise DomainError("steps must be >= 1")
    q = q0 ** (3 ** steps)
    hn = iterate(plfun.h, steps)
    rep = RelationReport(f"simplicity q0={q0} steps={steps}")
    slope = max(hn.slopes())
    ramp_lo = hn.xs[1]
    rep.add("ramp slope = 4^n", abs(slope - 4 ** steps), 0.0, detail=f"slope {slope}")
    rep.add("offset l_n", abs(ramp_lo * 4 ** steps - plfun.ramp_offset(steps)), 0.0,
            detail=f"l_{steps} = {ramp_lo * 4 ** steps}")
    bad = 0
    for k in range(1, steps):
        lk, lk1 = plfun.ramp_offset(k), plfun.ramp_offset(k + 1)
        bad = max(bad, abs(lk1 - (4 * lk + 2)))
        if iterate(plfun.h, k).xs[1] * 4 ** k != lk:
            bad = max(bad, 1)
    rep.add("l_(k+1) = 4 l_k + 2", bad, 0.0)
    criterion = Fraction(4 ** steps, q)
    radius = grid_image_gaps(hn, q)
    limit = max(Fraction(eps).limit_denominator(10 ** 12), criterion)
    rep.add("covering radius <= max(eps, 4^n/q)", max(float(radius - limit), 0.0), 0.0,
            detail=f"radius {radius}")
    rep.info.update({
        "q": str(q), "criterion": str(criterion), "criterion_float": float(criterion),
        "criterion_met": bool(criterion < Fraction(eps).limit_denominator(10 ** 12)),
        "covering_radius": str(radius), "slope": str(slope),
        "ramp": [str(hn.xs[1]), str(hn.xs[2])],
    })
    return rep
