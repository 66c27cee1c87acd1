"""Grid-sampled matrix-valued functions on [0, 1].

A :class:`MatFun` stores one dense D x D complex matrix per grid point
``t_j = j / (M - 1)``.  Everything the relation checkers need is fibrewise:
sums, products, adjoints, the sup of the fibre operator norms, and the
continuous functional calculus of positive elements.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from numbers import Number
from typing import Callable

import numpy as np

from .errors import DomainError, PositivityError, StructuralError

CLUSTER_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    sample_count: int = 257

    def __post_init__(self):
        if self.sample_count < 2:
            raise DomainError("a grid needs at least the two endpoints")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.sample_count)

    def index_of(self, t: float, atol: float = 1e-12) -> int:
        j = int(round(t * (self.sample_count - 1)))
        if not 0 <= j < self.sample_count or abs(j / (self.sample_count - 1) - t) > atol:
            raise DomainError(f"t={t} is not a grid point of {self}")
        return j

    def refine(self) -> "GridSpec":
        """Grid with the midpoints added (M -> 2M - 1)."""
        return GridSpec(2 * self.sample_count - 1)


@dataclass(frozen=True)
class BlockSpec:
    """Boundary conditions of a building block.

    ``Z(p, q)``: f(0) in M_p (x) 1_q and f(1) in 1_p (x) M_q.
    ``W(n, m)``: f(0) = a (x) 1_m and f(1) = a (x) 1_{m-1} for the same a, where
    1_{m-1} is the projection onto the first m-1 basis vectors.
    """

    kind: str | None = None
    left: int = 0
    right: int = 0

    @classmethod
    def Z(cls, p: int, q: int) -> "BlockSpec":
        if math.gcd(p, q) != 1:
            raise DomainError(f"Z({p}, {q}): p and q must be coprime")
        return cls("Z", p, q)

    @classmethod
    def W(cls, n: int, m: int) -> "BlockSpec":
        if m <= 1:
            raise DomainError("W(n, m) needs m > 1")
        return cls("W", n, m)

    @property
    def dim(self) -> int | None:
        return self.left * self.right if self.kind else None

    def to_json_obj(self):
        return None if self.kind is None else {"kind": self.kind, "dims": [self.left, self.right]}

    @classmethod
    def from_json_obj(cls, obj) -> "BlockSpec":
        if obj is None:
            return FREE
        return getattr(cls, obj["kind"])(*obj["dims"])


FREE = BlockSpec()


def _fibre_norms(samples: np.ndarray) -> np.ndarray:
    return np.linalg.svd(samples, compute_uv=False)[:, 0]


class MatFun:
    """Immutable grid-sampled function [0, 1] -> M_D(C).

    Arithmetic follows the unital C*-algebra conventions: adding a number adds
    that multiple of the identity, ``@`` is the fibrewise product.
    """

    __array_priority__ = 100

    def __init__(self, grid: GridSpec, samples, block: BlockSpec = FREE):
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim != 3 or samples.shape[1] != samples.shape[2]:
            raise StructuralError(f"samples must have shape (M, D, D), got {samples.shape}")
        if samples.shape[0] != grid.sample_count:
            raise StructuralError(
                f"{samples.shape[0]} samples for a grid of {grid.sample_count} points")
        if block.kind is not None and block.dim != samples.shape[1]:
            raise StructuralError(f"block {block} has dimension {block.dim}, "
                                  f"samples have {samples.shape[1]}")
        if samples.flags.writeable:
            samples = samples.copy()
            samples.setflags(write=False)
        self.grid = grid
        self.samples = samples
        self.block = block

    # constructors -----------------------------------------------------------

    @classmethod
    def constant(cls, a, grid: GridSpec, block: BlockSpec = FREE) -> "MatFun":
        a = np.asarray(a, dtype=complex)
        return cls(grid, np.broadcast_to(a, (grid.sample_count,) + a.shape).copy(), block)

    @classmethod
    def identity(cls, dim: int, grid: GridSpec, block: BlockSpec = FREE) -> "MatFun":
        return cls.constant(np.eye(dim), grid, block)

    @classmethod
    def zeros(cls, dim: int, grid: GridSpec, block: BlockSpec = FREE) -> "MatFun":
        return cls(grid, np.zeros((grid.sample_count, dim, dim), dtype=complex), block)

    @classmethod
    def from_function(cls, fn: Callable[[float], np.ndarray], grid: GridSpec,
                      block: BlockSpec = FREE) -> "MatFun":
        return cls(grid, np.stack([np.asarray(fn(t), dtype=complex) for t in grid.points]), block)

    # basic data -------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    def at(self, t: float) -> np.ndarray:
        return self.samples[self.grid.index_of(t)]

    def __repr__(self):
        return f"MatFun(M={self.grid.sample_count}, D={self.dim}, block={self.block})"

    # algebra ----------------------------------------------------------------

    def _check(self, other: "MatFun") -> None:
        if other.grid != self.grid or other.dim != self.dim:
            raise StructuralError(
                f"mismatch: grid {self.grid} / {other.grid}, dim {self.dim} / {other.dim}")

    def _block_with(self, other: "MatFun") -> BlockSpec:
        return self.block if self.block == other.block else FREE

    def _coerce(self, other):
        if isinstance(other, MatFun):
            self._check(other)
            return other.samples, self._block_with(other)
        if isinstance(other, Number):
            return other * np.eye(self.dim), self.block
        return NotImplemented, None

    def __add__(self, other):
        s, blk = self._coerce(other)
        if s is NotImplemented:
            return NotImplemented
        return MatFun(self.grid, self.samples + s, blk)

    __radd__ = __add__

    def __sub__(self, other):
        s, blk = self._coerce(other)
        if s is NotImplemented:
            return NotImplemented
        return MatFun(self.grid, self.samples - s, blk)

    def __rsub__(self, other):
        s, blk = self._coerce(other)
        if s is NotImplemented:
            return NotImplemented
        return MatFun(self.grid, s - self.samples, blk)

    def __neg__(self):
        return MatFun(self.grid, -self.samples, self.block)

    def __mul__(self, c):
        """Scalar multiple; ``c`` may be a number or one scalar per grid point."""
        if isinstance(c, MatFun):
            raise TypeError("use @ for the product of matrix functions")
        if isinstance(c, Number):
            return MatFun(self.grid, c * self.samples, self.block)
        c = np.asarray(c)
        if c.shape != (self.grid.sample_count,):
            raise StructuralError("fibrewise scalar must have one value per grid point")
        return MatFun(self.grid, c[:, None, None] * self.samples, self.block)

    __rmul__ = __mul__

    def __truediv__(self, c: Number):
        return MatFun(self.grid, self.samples / c, self.block)

    def __matmul__(self, other):
        if isinstance(other, MatFun):
            self._check(other)
            return MatFun(self.grid, self.samples @ other.samples, self._block_with(other))
        other = np.asarray(other)
        if other.shape != (self.dim, self.dim):
            return NotImplemented
        return MatFun(self.grid, self.samples @ other, FREE)

    def __rmatmul__(self, other):
        other = np.asarray(other)
        if other.shape != (self.dim, self.dim):
            return NotImplemented
        return MatFun(self.grid, other @ self.samples, FREE)

    def adj(self) -> "MatFun":
        return MatFun(self.grid, np.conj(np.swapaxes(self.samples, 1, 2)), self.block)

    @property
    def H(self) -> "MatFun":
        return self.adj()

    def commutator(self, other: "MatFun") -> "MatFun":
        return self @ other - other @ self

    # norms and traces -------------------------------------------------------

    def fibre_norms(self) -> np.ndarray:
        """Operator norm (largest singular value) of every fibre."""
        return _fibre_norms(self.samples)

    def sup_norm(self) -> float:
        return float(self.fibre_norms().max())

    def normalized_trace(self) -> np.ndarray:
        return np.trace(self.samples, axis1=1, axis2=2) / self.dim

    def hermitian_defect(self) -> np.ndarray:
        return _fibre_norms(self.samples - np.conj(np.swapaxes(self.samples, 1, 2)))

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(_herm(self.samples))

    def allclose(self, other: "MatFun", atol: float = 1e-12) -> bool:
        return (self - other).sup_norm() <= atol

    # resampling -------------------------------------------------------------

    def interpolate(self, grid: GridSpec) -> "MatFun":
        """Piecewise-linear interpolation in t onto another grid."""
        return MatFun(grid, interpolate_samples(self.samples, self.grid, grid.points), self.block)

    # serialization ----------------------------------------------------------

    def to_json_obj(self) -> dict:
        flat = self.samples.reshape(self.grid.sample_count, -1)
        return {
            "schema": 1,
            "grid": {"sample_count": self.grid.sample_count},
            "block": self.block.to_json_obj(),
            "dim": self.dim,
            "samples": [[[float(z.real), float(z.imag)] for z in row] for row in flat],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj) -> "MatFun":
        grid = GridSpec(obj["grid"]["sample_count"])
        D = obj["dim"]
        arr = np.array(obj["samples"], dtype=float)
        samples = (arr[..., 0] + 1j * arr[..., 1]).reshape(grid.sample_count, D, D)
        return cls(grid, samples, BlockSpec.from_json_obj(obj.get("block")))

    @classmethod
    def from_json(cls, text: str) -> "MatFun":
        return cls.from_json_obj(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "row", "col", "re", "im"])
        for t, s in zip(self.points, self.samples):
            for (i, j), z in np.ndenumerate(s):
                w.writerow([repr(float(t)), i, j, repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, block: BlockSpec = FREE) -> "MatFun":
        rows = list(csv.DictReader(io.StringIO(text)))
        ts = sorted({float(r["t"]) for r in rows})
        D = max(int(r["row"]) for r in rows) + 1
        grid = GridSpec(len(ts))
        samples = np.zeros((len(ts), D, D), dtype=complex)
        index = {t: k for k, t in enumerate(ts)}
        for r in rows:
            samples[index[float(r["t"])], int(r["row"]), int(r["col"])] = \
                complex(float(r["re"]), float(r["im"]))
        return cls(grid, samples, block)


def _herm(s: np.ndarray) -> np.ndarray:
    return 0.5 * (s + np.conj(np.swapaxes(s, -1, -2)))


def interpolate_samples(samples: np.ndarray, grid: GridSpec, ts: np.ndarray) -> np.ndarray:
    pos = np.asarray(ts) * (grid.sample_count - 1)
    lo = np.clip(np.floor(pos).astype(int), 0, grid.sample_count - 2)
    w = (pos - lo)[:, None, None]
    return (1 - w) * samples[lo] + w * samples[lo + 1]


def sup_norm(x: MatFun) -> float:
    return x.sup_norm()


def adjoint(x: MatFun) -> MatFun:
    return x.adj()


def algebra_ops(x: MatFun, y: MatFun) -> dict[str, MatFun]:
    """Sum, product and adjoints of two matrix functions."""
    return {"add": x + y, "multiply": x @ y, "adjoint_x": x.adj(), "adjoint_y": y.adj()}


# --- block membership ---------------------------------------------------------

def _ptrace_second(a: np.ndarray, p: int, q: int) -> np.ndarray:
    return np.einsum("iaja->ij", a.reshape(p, q, p, q))


def _ptrace_first(a: np.ndarray, p: int, q: int) -> np.ndarray:
    return np.einsum("aiaj->ij", a.reshape(p, q, p, q))


def endpoint_projections(x: MatFun) -> tuple[np.ndarray, np.ndarray]:
    """Hilbert-Schmidt orthogonal projections of x(0), x(1) onto the boundary subspaces."""
    blk = x.block
    if blk.kind is None:
        raise StructuralError("membership needs a block spec")
    x0, x1 = x.samples[0], x.samples[-1]
    p, q = blk.left, blk.right
    if blk.kind == "Z":
        a = _ptrace_second(x0, p, q) / q
        b = _ptrace_first(x1, p, q) / p
        return np.kron(a, np.eye(q)), np.kron(np.eye(p), b)
    corner = np.diag([1.0] * (q - 1) + [0.0])
    cut = np.kron(np.eye(p), corner)
    a = (_ptrace_second(x0, p, q) + _ptrace_second(cut @ x1 @ cut, p, q)) / (2 * q - 1)
    return np.kron(a, np.eye(q)), np.kron(a, corner)


def endpoint_residuals(x: MatFun) -> tuple[float, float]:
    P0, P1 = endpoint_projections(x)
    return (float(np.linalg.norm(x.samples[0] - P0, 2)),
            float(np.linalg.norm(x.samples[-1] - P1, 2)))


def membership_residual(x: MatFun) -> float:
    """Operator-norm distance of the endpoint fibres from their HS projections."""
    return max(endpoint_residuals(x))


# --- functional calculus ------------------------------------------------------

def _cluster_means(w: np.ndarray, tol: float) -> np.ndarray:
    """Replace eigenvalues (ascending per row) within ``tol`` of a neighbour by the cluster mean."""
    M, D = w.shape
    breaks = np.diff(w, axis=1) > tol
    ids = np.concatenate([np.zeros((M, 1), dtype=int), np.cumsum(breaks, axis=1)], axis=1)
    gid = (ids + np.arange(M)[:, None] * D).ravel()
    sums = np.bincount(gid, weights=w.ravel(), minlength=M * D)
    counts = np.bincount(gid, minlength=M * D)
    return (sums[gid] / counts[gid]).reshape(M, D)


def spectral_apply(samples: np.ndarray, fn: Callable, lo: float = 0.0, hi: float = 1.0,
                   tol: float = 1e-9) -> np.ndarray:
    """fn applied to the hermitian fibres ``samples`` via eigendecomposition."""
    defect = _fibre_norms(samples - np.conj(np.swapaxes(samples, -1, -2)))
    scale = max(1.0, float(np.abs(samples).max(initial=0.0)))
    if defect.max(initial=0.0) > tol * scale:
        raise DomainError(f"not self-adjoint (defect {defect.max():.2e})")
    w, V = np.linalg.eigh(_herm(samples))
    if w.size and w.min() < lo - tol:
        k = int(np.unravel_index(np.argmin(w), w.shape)[0])
        raise PositivityError(f"eigenvalue {w.min():.3e} below {lo} (fibre {k})")
    if w.size and w.max() > hi + tol:
        raise DomainError(f"eigenvalue {w.max():.3e} above {hi}")
    w = np.clip(_cluster_means(w, CLUSTER_TOL), lo, hi)
    # roundoff around the ends of the spectrum would be amplified by sqrt-like fn
    w[w < lo + CLUSTER_TOL] = lo
    w[w > hi - CLUSTER_TOL] = hi
    fw = np.asarray(fn(w), dtype=float)
    return (V * fw[:, None, :]) @ np.conj(np.swapaxes(V, 1, 2))


def scalar_calc(x: MatFun, fn: Callable, tol: float = 1e-9) -> MatFun:
    """Continuous functional calculus fn(x) for x self-adjoint with spectrum in [0, 1].

    ``fn`` is a :class:`~ozcheck.plfun.PLFunc` or any vectorized callable.
    Eigenvalues closer than 1e-10 are merged to their mean before ``fn`` is applied.
    """
    return MatFun(x.grid, spectral_apply(x.samples, fn, tol=tol), x.block)


def positive_sqrt(x: MatFun, tol: float = 1e-9) -> MatFun:
    """x^(1/2) for a positive contraction x."""
    return scalar_calc(x, np.sqrt, tol=tol)


def support_projection(x: MatFun, cutoff: float = 1e-9) -> MatFun:
    return scalar_calc(x, lambda w: (w > cutoff).astype(float))


# --- the flip path ------------------------------------------------------------

def flip_matrix(q: int) -> np.ndarray:
    """F(e_i (x) e_j) = e_j (x) e_i on C^q (x) C^q."""
    F = np.zeros((q * q, q * q))
    for i in range(q):
        for j in range(q):
            F[j * q + i, i * q + j] = 1.0
    return F


def flip_path_at(q: int, t) -> np.ndarray:
    """u(t) = P_sym + exp(i pi t) P_asym, for a scalar or an array of t."""
    F = flip_matrix(q)
    I = np.eye(q * q)
    p_sym, p_asym = (I + F) / 2, (I - F) / 2
    t = np.asarray(t, dtype=float)
    phase = np.exp(1j * np.pi * t)
    return p_sym + phase[..., None, None] * p_asym


def flip_path(q: int, grid: GridSpec = GridSpec()) -> MatFun:
    """Unitary path from 1 to the tensor flip on M_q (x) M_q."""
    if q < 2:
        raise DomainError("q must be >= 2")
    return MatFun(grid, flip_path_at(q, grid.points))
