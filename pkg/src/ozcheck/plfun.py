"""Exact piecewise-linear functions on [0, 1].

Breakpoints are stored as :class:`fractions.Fraction` pairs, so composition,
sums and the unit/support identities between the ramp functions ``d, f, g, h``
are decided exactly.  Evaluation is exact for rational arguments and falls back
to floating point (``numpy.interp``) for floats and arrays.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, ResourceError
from .report import RelationReport

ZERO = Fraction(0)
ONE = Fraction(1)


def _q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return Fraction(int(x[0]), int(x[1]))
    return Fraction(x)


def _check_unit(t) -> None:
    if not 0 <= t <= 1:
        raise DomainError(f"argument {t} outside [0, 1]")


class PLFunc:
    """Continuous piecewise-linear function on [0, 1].

    Interior breakpoints lying on the line through their neighbours are
    dropped, so two functions are equal iff their breakpoint tuples are.
    """

    __slots__ = ("_pts", "_xf", "_yf")

    def __init__(self, breakpoints: Iterable[Sequence]):
        pts = [(_q(x), _q(y)) for x, y in breakpoints]
        if len(pts) < 2:
            raise DomainError("need at least two breakpoints")
        if pts[0][0] != 0 or pts[-1][0] != 1:
            raise DomainError("abscissas must start at 0 and end at 1")
        for (x0, _), (x1, _) in zip(pts, pts[1:]):
            if not x0 < x1:
                raise DomainError("abscissas must be strictly increasing")
        self._pts = tuple(_simplify(pts))
        self._xf = np.array([float(x) for x, _ in self._pts])
        self._yf = np.array([float(y) for _, y in self._pts])

    # constructors -----------------------------------------------------------

    @classmethod
    def constant(cls, c) -> "PLFunc":
        c = _q(c)
        return cls([(0, c), (1, c)])

    @classmethod
    def identity(cls) -> "PLFunc":
        return cls([(0, 0), (1, 1)])

    @classmethod
    def ramp(cls, a, b, up: bool = True) -> "PLFunc":
        """0 on [0, a], linear on [a, b], 1 on [b, 1] (reversed if ``up`` is False)."""
        lo, hi = (0, 1) if up else (1, 0)
        pts = [(0, lo)]
        if _q(a) > 0:
            pts.append((a, lo))
        pts.append((b, hi))
        if _q(b) < 1:
            pts.append((1, hi))
        return cls(pts)

    # data -------------------------------------------------------------------

    @property
    def breakpoints(self) -> tuple[tuple[Fraction, Fraction], ...]:
        return self._pts

    @property
    def xs(self) -> tuple[Fraction, ...]:
        return tuple(x for x, _ in self._pts)

    @property
    def ys(self) -> tuple[Fraction, ...]:
        return tuple(y for _, y in self._pts)

    @property
    def is_constant(self) -> bool:
        return len(self._pts) == 2 and self._pts[0][1] == self._pts[1][1]

    def segments(self):
        return zip(self._pts, self._pts[1:])

    def slopes(self) -> list[Fraction]:
        return [(y1 - y0) / (x1 - x0) for (x0, y0), (x1, y1) in self.segments()]

    @property
    def value_range(self) -> tuple[Fraction, Fraction]:
        ys = self.ys
        return min(ys), max(ys)

    # evaluation -------------------------------------------------------------

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            if t.size and (t.min() < 0 or t.max() > 1):
                raise DomainError("argument outside [0, 1]")
            return np.interp(t, self._xf, self._yf)
        if isinstance(t, float):
            _check_unit(t)
            return float(np.interp(t, self._xf, self._yf))
        t = _q(t)
        _check_unit(t)
        return self._eval_exact(t)

    def _eval_exact(self, t: Fraction) -> Fraction:
        for (x0, y0), (x1, y1) in self.segments():
            if t <= x1:
                if t == x1:
                    return y1
                return y0 + (y1 - y0) * (t - x0) / (x1 - x0)
        return self._pts[-1][1]

    # arithmetic -------------------------------------------------------------

    def _combine(self, other, op) -> "PLFunc":
        if not isinstance(other, PLFunc):
            other = PLFunc.constant(other)
        xs = sorted(set(self.xs) | set(other.xs))
        return PLFunc([(x, op(self._eval_exact(x), other._eval_exact(x))) for x in xs])

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __neg__(self):
        return PLFunc([(x, -y) for x, y in self._pts])

    def __mul__(self, c):
        if isinstance(c, PLFunc):
            raise TypeError("product of PL functions is not PL")
        c = _q(c)
        return PLFunc([(x, c * y) for x, y in self._pts])

    __rmul__ = __mul__

    def reflect(self) -> "PLFunc":
        """t -> f(1 - t)."""
        return PLFunc([(1 - x, y) for x, y in reversed(self._pts)])

    def __eq__(self, other):
        return isinstance(other, PLFunc) and self._pts == other._pts

    def __hash__(self):
        return hash(self._pts)

    def __repr__(self):
        inner = ", ".join(f"({x}, {y})" for x, y in self._pts)
        return f"PLFunc([{inner}])"

    def max_abs_diff(self, other) -> Fraction:
        """sup_t |self(t) - other(t)|, exact."""
        diff = self - other
        return max(abs(y) for y in diff.ys)

    # sets -------------------------------------------------------------------

    def support_closure(self) -> "IntervalSet":
        """Closure of {t : f(t) != 0}: the union of segments where f is not identically 0."""
        return IntervalSet([(x0, x1) for (x0, y0), (x1, y1) in self.segments()
                            if not (y0 == 0 and y1 == 0)])

    def fractional_support_closure(self) -> "IntervalSet":
        """Closure of {t : 0 < f(t) < 1}, i.e. of supp(f - f^2), for f with values in [0, 1]."""
        lo, hi = self.value_range
        if lo < 0 or hi > 1:
            raise DomainError("values outside [0, 1]")
        keep = []
        for (x0, y0), (x1, y1) in self.segments():
            if y0 == y1 and y0 in (0, 1):
                continue
            keep.append((x0, x1))
        return IntervalSet(keep)

    def max_deviation_on(self, c, lo, hi) -> Fraction:
        """max over t in [lo, hi] of |f(t) - c|, exact."""
        c, lo, hi = _q(c), _q(lo), _q(hi)
        pts = [lo, hi] + [x for x in self.xs if lo < x < hi]
        return max(abs(self._eval_exact(t) - c) for t in pts)

    def argmax_deviation_on(self, c, lo, hi) -> Fraction:
        c, lo, hi = _q(c), _q(lo), _q(hi)
        pts = [lo, hi] + [x for x in self.xs if lo < x < hi]
        return max(pts, key=lambda t: abs(self._eval_exact(t) - c))

    # serialization ----------------------------------------------------------

    def to_json_obj(self) -> list:
        return [[[x.numerator, x.denominator], [y.numerator, y.denominator]]
                for x, y in self._pts]

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj) -> "PLFunc":
        return cls([(_q(x), _q(y)) for x, y in obj])

    @classmethod
    def from_json(cls, text: str) -> "PLFunc":
        return cls.from_json_obj(json.loads(text))


def _simplify(pts):
    out = [pts[0]]
    for k in range(1, len(pts) - 1):
        (x0, y0), (x1, y1), (x2, y2) = out[-1], pts[k], pts[k + 1]
        if (y1 - y0) * (x2 - x1) == (y2 - y1) * (x1 - x0):
            continue
        out.append(pts[k])
    out.append(pts[-1])
    return out


def eval(f: PLFunc, t):  # noqa: A001 - mirrors the operation name
    """Evaluate ``f`` at ``t``; exact for rational ``t``."""
    return f(t)


def compose(outer: PLFunc, inner: PLFunc) -> PLFunc:
    """Exact breakpoints of ``outer o inner``.

    Raises DomainError if ``inner`` takes values outside [0, 1].
    """
    lo, hi = inner.value_range
    if lo < 0 or hi > 1:
        raise DomainError(f"inner function has range [{lo}, {hi}] not inside [0, 1]")
    xs = set(inner.xs)
    cuts = outer.xs[1:-1]
    for (x0, y0), (x1, y1) in inner.segments():
        if y0 == y1:
            continue
        a, b = min(y0, y1), max(y0, y1)
        for c in cuts:
            if a < c < b:
                xs.add(x0 + (c - y0) * (x1 - x0) / (y1 - y0))
    return PLFunc([(x, outer._eval_exact(inner._eval_exact(x))) for x in sorted(xs)])


def iterate(f: PLFunc, n: int) -> PLFunc:
    """n-fold composite f o ... o f (n >= 1)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    out = f
    for _ in range(n - 1):
        out = compose(f, out)
    return out


class IntervalSet:
    """Finite union of closed intervals with rational endpoints."""

    def __init__(self, intervals: Iterable[tuple] = ()):
        ivs = sorted((_q(a), _q(b)) for a, b in intervals)
        merged: list[tuple[Fraction, Fraction]] = []
        for a, b in ivs:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
            else:
                merged.append((a, b))
        self.intervals = tuple(merged)

    def contains(self, other: "IntervalSet") -> bool:
        return all(any(a <= c and d <= b for a, b in self.intervals) for c, d in other.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __eq__(self, other):
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __repr__(self):
        return "IntervalSet(" + " u ".join(f"[{a}, {b}]" for a, b in self.intervals) + ")"


# --- canonical functions ----------------------------------------------------

d = PLFunc([(0, 0), (Fraction(3, 16), 1), (1, 1)])
f = PLFunc([(0, 0), (Fraction(1, 4), 0), (Fraction(1, 2), 1), (1, 1)])
g = PLFunc([(0, 0), (Fraction(1, 4), 0), (Fraction(1, 2), 1), (Fraction(3, 4), 0), (1, 0)])
h = PLFunc([(0, 0), (Fraction(1, 2), 0), (Fraction(3, 4), 1), (1, 1)])
d_bar = d.reflect()


@dataclass(frozen=True)
class QuadraticComposite:
    """The non-PL function t -> base(t(1 - t)); used for d-hat."""

    base: PLFunc

    def __call__(self, t):
        if isinstance(t, np.ndarray) or isinstance(t, float):
            return self.base(t * (1 - t))
        t = _q(t)
        return self.base(t * (1 - t))

    @staticmethod
    def _image(lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
        q = lambda s: s * (1 - s)  # noqa: E731
        vals = [q(lo), q(hi)]
        if lo <= Fraction(1, 2) <= hi:
            vals.append(Fraction(1, 4))
        return min(vals), max(vals)

    def max_deviation_on(self, c, lo, hi) -> Fraction:
        a, b = self._image(_q(lo), _q(hi))
        return self.base.max_deviation_on(c, a, b)

    def argmax_deviation_on(self, c, lo, hi) -> Fraction:
        # worst point in the image, pulled back to the smaller preimage in [lo, hi]
        lo, hi = _q(lo), _q(hi)
        a, b = self._image(lo, hi)
        s = self.base.argmax_deviation_on(c, a, b)
        disc = 1 - 4 * s
        root = _rational_sqrt(disc)
        cands = [(1 - root) / 2, (1 + root) / 2] if root is not None else [lo]
        inside = [t for t in cands if lo <= t <= hi]
        return inside[0] if inside else lo


def _rational_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    n, m = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if n * n == x.numerator and m * m == x.denominator:
        return Fraction(n, m)
    return None


d_hat = QuadraticComposite(d)


def unit_on_support(a, region: IntervalSet) -> tuple[Fraction, Fraction | None]:
    """Defect of the criterion "a*b = b iff a == 1 on closure(supp b)".

    Returns ``(max |a - 1| over region, worst point)``; the identity holds
    exactly iff the defect is 0.
    """
    worst, where = ZERO, None
    for lo, hi in region:
        dev = a.max_deviation_on(1, lo, hi)
        if dev > worst:
            worst, where = dev, a.argmax_deviation_on(1, lo, hi)
    return worst, where


def verify_pl_identities(
    d: PLFunc = d, f: PLFunc = f, g: PLFunc = g, h: PLFunc = h
) -> RelationReport:
    """Check the six dominance identities between d, f, g, h exactly.

    g = f - h is checked by breakpoint arithmetic; the product identities
    use the support/unit criterion, so nothing is sampled.
    """
    rep = RelationReport("PL identities")
    d_bar = d.reflect()
    d_hat = QuadraticComposite(d)
    gap = g.max_abs_diff(f - h)
    rep.add("g = f - h", gap, 0.0, detail=f"exact defect {gap}")
    checks = [
        ("hf = h", f, h.support_closure()),
        ("(1-f)dbar = 1-f", d_bar, (1 - f).support_closure()),
        ("g dbar = g", d_bar, g.support_closure()),
        ("(f-f^2)dhat = f-f^2", d_hat, f.fractional_support_closure()),
        ("g dhat = g", d_hat, g.support_closure()),
    ]
    for name, a, region in checks:
        defect, where = unit_on_support(a, region)
        detail = f"exact defect {defect} on {region}"
        if where is not None:
            detail += f", worst at t={where}"
        rep.add(name, defect, 0.0, worst_t=None if where is None else float(where), detail=detail)
    return rep


# --- connecting data ---------------------------------------------------------

@dataclass(frozen=True)
class ConnectorEntry:
    func: PLFunc
    multiplicity: int
    structural_constant: bool


class ConnectorSymbolic:
    """Multiset of PL parameter maps with big-integer multiplicities.

    An entry is *structurally constant* if any factor of the composite it came
    from is a constant function; the fraction of structurally non-constant
    entries is what the trace-collapse estimate controls.  Composites of
    non-constant factors that happen to be constant (e.g. h o h_1 for q=8)
    are kept non-structural and counted by :attr:`effective_nonconstant_count`.
    """

    def __init__(self, entries: Iterable[ConnectorEntry], levels: Sequence[int] = ()):
        self.entries = tuple(entries)
        self.levels = tuple(levels)

    @property
    def entry_count(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    @property
    def nonconstant_count(self) -> int:
        return sum(e.multiplicity for e in self.entries if not e.structural_constant)

    @property
    def effective_nonconstant_count(self) -> int:
        return sum(e.multiplicity for e in self.entries if not e.func.is_constant)

    @property
    def nonconstant_fraction(self) -> Fraction:
        return Fraction(self.nonconstant_count, self.entry_count)

    @property
    def effective_nonconstant_fraction(self) -> Fraction:
        return Fraction(self.effective_nonconstant_count, self.entry_count)

    def merged(self) -> "ConnectorSymbolic":
        acc: dict[tuple, int] = {}
        for e in self.entries:
            key = (e.func, e.structural_constant)
            acc[key] = acc.get(key, 0) + e.multiplicity
        return ConnectorSymbolic(
            [ConnectorEntry(fn, m, c) for (fn, c), m in acc.items()], self.levels)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def then(self, inner: "ConnectorSymbolic", budget: int = 200_000) -> "ConnectorSymbolic":
        """Composites F o G with F from self and G from ``inner`` (merged)."""
        outer = self.merged().entries
        inner_e = inner.merged().entries
        if len(outer) * len(inner_e) > budget:
            raise ResourceError(
                f"{len(outer)} x {len(inner_e)} composites exceed budget {budget}")
        acc: dict[tuple, int] = {}
        for F in outer:
            for G in inner_e:
                flag = F.structural_constant or G.structural_constant
                if F.structural_constant or F.func.is_constant:
                    comp = F.func
                elif G.func.is_constant:
                    comp = PLFunc.constant(F.func(G.func.ys[0]))
                else:
                    comp = compose(F.func, G.func)
                key = (comp, flag)
                acc[key] = acc.get(key, 0) + F.multiplicity * G.multiplicity
        return ConnectorSymbolic(
            [ConnectorEntry(fn, m, c) for (fn, c), m in acc.items()],
            self.levels + inner.levels)

    def to_json_obj(self) -> dict:
        return {
            "levels": [str(q) for q in self.levels],
            "entries": [
                {"breakpoints": e.func.to_json_obj(), "multiplicity": str(e.multiplicity),
                 "constant": e.structural_constant}
                for e in self.entries
            ],
        }

    @classmethod
    def from_json_obj(cls, obj) -> "ConnectorSymbolic":
        return cls(
            [ConnectorEntry(PLFunc.from_json_obj(e["breakpoints"]), int(e["multiplicity"]),
                            bool(e["constant"])) for e in obj["entries"]],
            [int(q) for q in obj.get("levels", [])])

    def evaluate(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values F(t) for every merged entry, with normalized weights.

        Returns ``(values, weights)`` of shapes (entries, len(t)) and (entries,).
        """
        ent = self.merged().entries
        total = self.entry_count
        vals = np.stack([e.func(np.asarray(t, dtype=float)) for e in ent])
        w = np.array([float(Fraction(e.multiplicity, total)) for e in ent])
        return vals, w


def h_i(i: int, q: int) -> PLFunc:
    """t -> 1 - i f(1 - t) / q."""
    return 1 - f.reflect() * Fraction(i, q)


def lambda_sequence(q: int, max_distinct: int = 100_000) -> ConnectorSymbolic:
    """Parameter maps of one connecting step at level q.

    Constants i/q (1 <= i < q) with multiplicity q^3 each, h with
    multiplicity q(q-1), and h_1, ..., h_q once each (h_q equals h).
    """
    if q < 2:
        raise DomainError("q must be >= 2")
    if 2 * q > max_distinct:
        raise ResourceError(f"lambda sequence for q={q} has ~{2 * q} distinct entries")
    q3 = q ** 3
    entries = [ConnectorEntry(PLFunc.constant(Fraction(i, q)), q3, True) for i in range(1, q)]
    entries.append(ConnectorEntry(h, q * (q - 1), False))
    entries.extend(ConnectorEntry(h_i(i, q), 1, False) for i in range(1, q + 1))
    return ConnectorSymbolic(entries, [q])


def nonconstant_factor(q: int) -> Fraction:
    """1 / (q^2 - q + 1)."""
    return Fraction(1, q * q - q + 1)


def ramp_offset(n: int) -> int:
    """l_n with h^(n)(t) = 4^n t - l_n on its ramp; l_1 = 2, l_{n+1} = 4 l_n + 2."""
    l = 2
    for _ in range(n - 1):
        l = 4 * l + 2
    return l
