"""Named residuals with pass/fail against a tolerance."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np


@dataclass
class Residual:
    name: str
    value: float
    tolerance: float
    worst_t: float | None = None
    curve: np.ndarray | None = field(default=None, repr=False)
    detail: str | None = None

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value)) and self.value <= self.tolerance

    def to_dict(self) -> dict:
        out = {
            "residual": float(self.value),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
            "worst_fibre_t": None if self.worst_t is None else float(self.worst_t),
        }
        if self.detail is not None:
            out["detail"] = self.detail
        return out


class RelationReport:
    """Ordered collection of residuals, plus free-form ``info`` values.

    Serializes as ``{relation_name: {residual, tolerance, pass, worst_fibre_t}}``.
    """

    def __init__(self, title: str = ""):
        self.title = title
        self._items: dict[str, Residual] = {}
        self.info: dict = {}

    def add(self, name, value, tolerance, worst_t=None, curve=None, detail=None) -> Residual:
        r = Residual(name, float(value), float(tolerance), worst_t, curve, detail)
        self._items[name] = r
        return r

    def add_curve(self, name, curve, points, tolerance) -> Residual:
        """Record a per-fibre residual curve; the residual is its maximum."""
        curve = np.asarray(curve, dtype=float)
        k = int(np.argmax(curve))
        return self.add(name, curve[k], tolerance, worst_t=float(points[k]), curve=curve)

    def merge(self, other: "RelationReport", prefix: str = "") -> "RelationReport":
        for r in other:
            self._items[prefix + r.name] = Residual(
                prefix + r.name, r.value, r.tolerance, r.worst_t, r.curve, r.detail)
        for key, value in other.info.items():
            self.info[prefix + key] = value
        return self

    def __getitem__(self, name: str) -> Residual:
        return self._items[name]

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def __iter__(self) -> Iterator[Residual]:
        return iter(self._items.values())

    def __len__(self) -> int:
        return len(self._items)

    @property
    def names(self) -> list[str]:
        return list(self._items)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self)

    def failures(self) -> list[Residual]:
        return [r for r in self if not r.passed]

    @property
    def max_residual(self) -> float:
        return max((r.value for r in self), default=0.0)

    def to_dict(self) -> dict:
        return {r.name: r.to_dict() for r in self}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def summary(self) -> str:
        lines = [self.title] if self.title else []
        for r in self:
            flag = "PASS" if r.passed else "FAIL"
            lines.append(f"  [{flag}] {r.name}: {r.value:.3e} (tol {r.tolerance:.1e})")
        return "\n".join(lines)

    def __repr__(self) -> str:
        return f"RelationReport({self.title!r}, {len(self)} residuals, passed={self.passed})"
