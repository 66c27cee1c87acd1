"""C.p.c. order zero maps on matrix algebras and the relation-set checkers.

An :class:`OrderZeroMap` on M_n is a linear map ``a -> MatFun``; matrix-unit
images are produced on demand, since materializing all n^2 images of a map
into 72-dimensional fibres would need gigabytes.  Where the supporting
*-homomorphism is known in closed form it is carried along; otherwise it is
recovered fibrewise from the support projection of phi(1).
"""
from __future__ import annotations

import warnings
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import (
    CalculusDomainError, ContractionError, DomainError, IllConditionedSupportWarning,
    NotSquareZeroError, StructuralError,
)
from .matfield import (
    FREE, BlockSpec, GridSpec, MatFun, _fibre_norms, _herm, interpolate_samples, scalar_calc,
    spectral_apply,
)
from .plfun import PLFunc
from .report import RelationReport

RANK_CUTOFF = 1e-9

Samples = np.ndarray
LinearMap = Callable[[np.ndarray], Samples]


def unit(n: int, i: int, j: int) -> np.ndarray:
    """Matrix unit e_ij of M_n (0-based indices)."""
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1.0
    return e


class OrderZeroMap:
    """Order zero map M_n -> C([0, 1], M_D) given by its action on matrices.

    ``apply(a)`` returns the samples of phi(a); ``support(a)``, if given, the
    samples of the supporting homomorphism pi(a).  Maps are immutable; cached
    values (phi(1), its pseudo-inverse) are computed once.
    """

    def __init__(self, n: int, grid: GridSpec, dim: int, apply: LinearMap,
                 support: LinearMap | None = None, block: BlockSpec = FREE,
                 constant: bool = False, name: str = ""):
        self.n = n
        self.grid = grid
        self.dim = dim
        self._apply = apply
        self._support = support
        self.block = block
        self.constant = constant
        self.name = name

    # construction -----------------------------------------------------------

    @classmethod
    def from_images(cls, images, support_images=None, name: str = "") -> "OrderZeroMap":
        """Map from an n x n array of MatFun images of the matrix units."""
        n = len(images)
        first = images[0][0]
        stack = np.stack([[images[i][j].samples for j in range(n)] for i in range(n)])
        sup = None
        if support_images is not None:
            sstack = np.stack([[support_images[i][j].samples for j in range(n)] for i in range(n)])
            sup = lambda a: np.einsum("ij,ijmab->mab", a, sstack)  # noqa: E731
        return cls(n, first.grid, first.dim,
                   lambda a: np.einsum("ij,ijmab->mab", a, stack),
                   sup, first.block, name=name)

    @classmethod
    def from_frame(cls, n: int, grid: GridSpec, weights, frame=None,
                   block: BlockSpec = FREE, constant: bool = False,
                   name: str = "") -> "OrderZeroMap":
        """phi(a)(t) = V(t) (a (x) diag(w(t))) V(t)^*.

        ``weights`` has shape (M, r) or (r,) with entries in [0, 1]; ``frame``
        is an isometry of shape (M, D, n r), (D, n r), or None for the identity.
        The supporting homomorphism is a -> V (a (x) diag[w > 0]) V^*.
        """
        M = grid.sample_count
        w = np.broadcast_to(np.asarray(weights, dtype=float), (M, np.shape(weights)[-1]))
        if w.min() < -RANK_CUTOFF or w.max() > 1 + RANK_CUTOFF:
            raise DomainError("frame weights must lie in [0, 1]")
        r = w.shape[1]
        dim = n * r if frame is None else np.shape(frame)[-2]
        eye = np.eye(r)

        def spread(a, wts):
            K = np.einsum("ij,ms,st->misjt", a, wts, eye).reshape(M, n * r, n * r)
            if frame is None:
                return K
            return frame @ K @ np.conj(np.swapaxes(frame, -1, -2))

        mask = (w > RANK_CUTOFF).astype(float)
        return cls(n, grid, dim, lambda a: spread(a, w), lambda a: spread(a, mask),
                   block, constant, name)

    # evaluation -------------------------------------------------------------

    def _coerce(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.n, self.n):
            raise StructuralError(f"expected a {self.n}x{self.n} matrix, got {a.shape}")
        return a

    def __call__(self, a) -> MatFun:
        return MatFun(self.grid, self._apply(self._coerce(a)), self.block)

    def image(self, i: int, j: int) -> MatFun:
        """phi(e_ij), 0-based."""
        return self(unit(self.n, i, j))

    @property
    def images(self) -> list[list[MatFun]]:
        return [[self.image(i, j) for j in range(self.n)] for i in range(self.n)]

    @cached_property
    def one(self) -> MatFun:
        """phi(1_n)."""
        return self(np.eye(self.n))

    def matrix(self, a) -> np.ndarray:
        """phi(a) as a single matrix, for maps constant in t."""
        if not self.constant:
            raise StructuralError("matrix() needs a map constant in t")
        return self._apply(self._coerce(a))[0]

    def support_matrix(self, a) -> np.ndarray:
        if not self.constant:
            raise StructuralError("support_matrix() needs a map constant in t")
        return self.support_samples(self._coerce(a))[0]

    # supporting homomorphism --------------------------------------------------

    @property
    def has_support(self) -> bool:
        return self._support is not None

    @cached_property
    def _one_pinv(self) -> np.ndarray:
        w, V = np.linalg.eigh(_herm(self.one.samples))
        ill = (w > RANK_CUTOFF) & (w < 10 * RANK_CUTOFF)
        if ill.any():
            k = int(np.argwhere(ill.any(axis=1))[0, 0])
            warnings.warn(IllConditionedSupportWarning(
                f"phi(1) has eigenvalues in ({RANK_CUTOFF}, {10 * RANK_CUTOFF}); "
                f"worst fibre t={self.grid.points[k]:.6g}"), stacklevel=3)
        inv = np.where(w > RANK_CUTOFF, 1.0 / np.where(w > RANK_CUTOFF, w, 1.0), 0.0)
        return (V * inv[:, None, :]) @ np.conj(np.swapaxes(V, 1, 2))

    def support_samples(self, a) -> np.ndarray:
        a = self._coerce(a)
        if self._support is not None:
            return self._support(a)
        return self._apply(a) @ self._one_pinv

    def support(self, a) -> MatFun:
        return MatFun(self.grid, self.support_samples(a), self.block)

    def with_support(self, support: LinearMap) -> "OrderZeroMap":
        return OrderZeroMap(self.n, self.grid, self.dim, self._apply, support, self.block,
                            self.constant, self.name)

    # derived maps -------------------------------------------------------------

    def precompose(self, inner: "OrderZeroMap") -> "OrderZeroMap":
        """phi o rho for an order zero map rho: M_k -> M_n constant in t.

        The supporting homomorphism of the composite is pi_phi o pi_rho.
        """
        if not inner.constant or inner.dim != self.n:
            raise StructuralError("inner map must be constant with values in M_n")
        return OrderZeroMap(
            inner.n, self.grid, self.dim,
            lambda a: self._apply(inner.matrix(a)),
            lambda a: self.support_samples(inner.support_matrix(a)),
            self.block, name=f"{self.name}o{inner.name}")

    def resample(self, grid: GridSpec) -> "OrderZeroMap":
        """Linear interpolation of all images onto ``grid``."""
        src = self.grid
        pts = grid.points
        sup = None
        if self._support is not None:
            sup = lambda a: interpolate_samples(self._support(a), src, pts)  # noqa: E731
        return OrderZeroMap(self.n, grid, self.dim,
                            lambda a: interpolate_samples(self._apply(a), src, pts),
                            sup, self.block, name=self.name)

    def cone_generators(self) -> list[MatFun]:
        """x_i = phi^(1/2)(e_1i), so that phi(e_ij) = x_i^* x_j."""
        root = oz_calc(np.sqrt, self, check=False)
        return [root.image(0, i) for i in range(self.n)]

    def __repr__(self):
        return (f"OrderZeroMap({self.name or '?'}: M_{self.n} -> M_{self.dim}, "
                f"M={self.grid.sample_count}, block={self.block})")


# --- supporting homomorphism and calculus ----------------------------------------

def support_hom_of(phi: OrderZeroMap) -> OrderZeroMap:
    """Supporting homomorphism recovered fibrewise: pi(a) = phi(a) phi(1)^+.

    The pseudo-inverse drops eigenvalues of phi(1) below the rank cutoff, so
    pi(1) is the support projection of phi(1).  Warns with the worst fibre if
    the spectrum has mass just above the cutoff.
    """
    pinv = phi._one_pinv
    apply = lambda a: phi._apply(a) @ pinv  # noqa: E731
    return OrderZeroMap(phi.n, phi.grid, phi.dim, apply, apply, phi.block, phi.constant,
                        f"pi[{phi.name}]")


def multiplicativity_residual(pi: OrderZeroMap) -> np.ndarray:
    """Fibrewise max of |pi(e_ij) pi(e_kl) - delta_jk pi(e_il)| over a set of units.

    All index quadruples for n <= 3; the e_1i / e_i1 chains otherwise.
    """
    n = pi.n
    cache: dict = {}

    def P(i, j):
        if (i, j) not in cache:
            cache[(i, j)] = pi.support_samples(unit(n, i, j))
        return cache[(i, j)]

    if n <= 3:
        quads = [(i, j, k, l) for i in range(n) for j in range(n)
                 for k in range(n) for l in range(n)]
    else:
        quads = [(0, i, i, 0) for i in range(n)] + [(i, 0, 0, j) for i in range(n)
                                                      for j in (0, n - 1)]
        quads += [(0, i, 0, i) for i in range(n)]
    worst = np.zeros(pi.grid.sample_count)
    for i, j, k, l in quads:
        diff = P(i, j) @ P(k, l)
        if j == k:
            diff = diff - P(i, l)
        worst = np.maximum(worst, _fibre_norms(diff))
    return worst


def _check_calculus_function(fn) -> None:
    if isinstance(fn, PLFunc):
        if fn(0) != 0:
            raise CalculusDomainError("order zero calculus needs f(0) = 0")
        lo, hi = fn.value_range
        if lo < 0 or hi > 1:
            raise CalculusDomainError("order zero calculus needs 0 <= f <= 1")
        return
    probe = np.asarray(fn(np.linspace(0.0, 1.0, 1025)), dtype=float)
    if abs(probe[0]) > 1e-15:
        raise CalculusDomainError("order zero calculus needs f(0) = 0")
    if probe.min() < -1e-15 or probe.max() > 1 + 1e-15:
        raise CalculusDomainError("order zero calculus needs 0 <= f <= 1")


def oz_calc(fn, phi: OrderZeroMap, check: bool = True, tol: float = 1e-8) -> OrderZeroMap:
    """Order zero functional calculus: f(phi)(a) = pi_phi(a) f(phi(1)).

    ``fn`` is a PLFunc or a vectorized callable with f(0) = 0 and values in
    [0, 1].  With ``check`` the identity f(phi)(p) = f(phi(p)) is verified on
    the projection p = e_11.
    """
    _check_calculus_function(fn)
    fone = spectral_apply(phi.one.samples, fn)
    out = OrderZeroMap(
        phi.n, phi.grid, phi.dim,
        lambda a: phi.support_samples(a) @ fone,
        phi.support_samples, phi.block, phi.constant,
        f"{getattr(fn, '__name__', 'f')}({phi.name})")
    if check:
        lhs = out.image(0, 0)
        rhs = scalar_calc(phi.image(0, 0), fn)
        gap = (lhs - rhs).sup_norm()
        if gap > tol:
            from .errors import ConstructionError
            raise ConstructionError(f"f(phi)(e11) != f(phi(e11)): defect {gap:.3e}")
    return out


def from_square_zero(v: MatFun, tol: float = 1e-9) -> OrderZeroMap:
    """The order zero map psi on M_2 with psi^(1/2)(e_12) = v.

    psi(e11) = v v^*, psi(e22) = v^* v and psi(e12) = v |v|; the supporting
    homomorphism sends e12 to the polar part of v.
    """
    sq = (v @ v).sup_norm()
    if sq > tol:
        raise NotSquareZeroError(f"|v^2| = {sq:.3e} exceeds {tol}")
    nv = v.sup_norm()
    if nv > 1 + tol:
        raise ContractionError(f"|v| = {nv:.6f} > 1")
    U, S, Vh = np.linalg.svd(v.samples)
    keep = (S > RANK_CUTOFF).astype(float)
    w = (U * keep[:, None, :]) @ Vh
    e12 = (U * (S ** 2)[:, None, :]) @ Vh
    vs = v.samples
    vh = np.conj(np.swapaxes(vs, 1, 2))
    wh = np.conj(np.swapaxes(w, 1, 2))
    img = np.stack([[vs @ vh, e12], [np.conj(np.swapaxes(e12, 1, 2)), vh @ vs]])
    sup = np.stack([[w @ wh, w], [wh, wh @ w]])
    return OrderZeroMap(
        2, v.grid, v.dim,
        lambda a: np.einsum("ij,ijmab->mab", a, img),
        lambda a: np.einsum("ij,ijmab->mab", a, sup),
        v.block, name="psi")


# --- relation checkers -------------------------------------------------------------

def _curve(report: RelationReport, name: str, x: MatFun, tol: float) -> None:
    report.add_curve(name, x.fibre_norms(), x.points, tol)


def validate_cone(x: Sequence[MatFun], tol: float = 1e-10) -> RelationReport:
    """Residuals of the cone relations on generators x_1..x_n.

    |x_i| <= 1, x_1 >= 0, x_i x_i^* = x_1^2 and x_j^* x_j x_i^* x_i = 0 (i != j).
    """
    rep = RelationReport("cone")
    if not x:
        return rep
    grid, dim = x[0].grid, x[0].dim
    for xi in x:
        if xi.grid != grid or xi.dim != dim:
            raise StructuralError("generators must share grid and dimension")
    pts = grid.points
    for i, xi in enumerate(x, 1):
        rep.add_curve(f"norm[{i}]", np.maximum(xi.fibre_norms() - 1.0, 0.0), pts, tol)
    x1 = x[0]
    herm = x1.hermitian_defect()
    neg = np.maximum(-np.linalg.eigvalsh(_herm(x1.samples))[:, 0], 0.0)
    rep.add_curve("positive[1]", np.maximum(herm, neg), pts, tol)
    x1sq = x1 @ x1
    for i, xi in enumerate(x[1:], 2):
        _curve(rep, f"xx*=x1^2[{i}]", xi @ xi.adj() - x1sq, tol)
    squares = [xi.adj() @ xi for xi in x]
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            _curve(rep, f"orth[{i + 1},{j + 1}]", squares[j] @ squares[i], tol)
    return rep


def validate_map(phi: OrderZeroMap, tol: float = 1e-10) -> RelationReport:
    """Cone relations on x_i = phi^(1/2)(e_1i), and phi(e_1j), phi(e_jj) recovered from them."""
    x = phi.cone_generators()
    rep = validate_cone(x, tol)
    worst = np.zeros(phi.grid.sample_count)
    for j in range(phi.n):
        worst = np.maximum(worst, _fibre_norms(phi.image(0, j).samples - (x[0] @ x[j]).samples))
        worst = np.maximum(worst, _fibre_norms(
            phi.image(j, j).samples - (x[j].adj() @ x[j]).samples))
    rep.add_curve("images", worst, phi.grid.points, tol)
    return rep


def _check_pair(phi: OrderZeroMap, psi: OrderZeroMap) -> None:
    if psi.n != 2:
        raise StructuralError("psi must be a map on M_2")
    if phi.grid != psi.grid or phi.dim != psi.dim:
        raise StructuralError("phi and psi must share grid and fibre dimension")


def _relation_iii(rep, phi, psi, tol):
    p22 = psi.image(1, 1)
    _curve(rep, "(iii) psi(e22)phi(e11) = psi(e22)", p22 @ phi.image(0, 0) - p22, tol)


def validate_R(phi: OrderZeroMap, psi: OrderZeroMap, tol: float = 1e-10) -> RelationReport:
    """Relations of the unital dimension drop presentation.

    (i) phi on M_n and psi on M_2 order zero (cone residuals),
    (ii) psi(e11) = 1 - phi(1), (iii) psi(e22) phi(e11) = psi(e22).
    """
    _check_pair(phi, psi)
    rep = RelationReport("R")
    rep.merge(validate_map(phi, tol), "phi.")
    rep.merge(validate_map(psi, tol), "psi.")
    _curve(rep, "(ii) psi(e11) = 1 - phi(1)", psi.image(0, 0) - (1 - phi.one), tol)
    _relation_iii(rep, phi, psi, tol)
    return rep


def validate_Rhat(phi: OrderZeroMap, psi: OrderZeroMap, tol: float = 1e-10) -> RelationReport:
    """As :func:`validate_R` with (ii) replaced by psi(e11) = phi(1)(1 - phi(1))."""
    _check_pair(phi, psi)
    rep = RelationReport("Rhat")
    rep.merge(validate_map(phi, tol), "phi.")
    rep.merge(validate_map(psi, tol), "psi.")
    one = phi.one
    _curve(rep, "(ii) psi(e11) = phi(1)(1 - phi(1))", psi.image(0, 0) - one @ (1 - one), tol)
    _relation_iii(rep, phi, psi, tol)
    return rep


def validate_alt1(phi: OrderZeroMap, psi: OrderZeroMap, h: MatFun,
                  tol: float = 1e-9) -> RelationReport:
    """Relations of the presentation with an extra positive contraction h."""
    _check_pair(phi, psi)
    if h.grid != phi.grid or h.dim != phi.dim:
        raise StructuralError("h must share grid and dimension with phi")
    rep = RelationReport("alt1")
    rep.merge(validate_map(phi, tol), "phi.")
    rep.merge(validate_map(psi, tol), "psi.")
    ev = np.linalg.eigvalsh(_herm(h.samples))
    bad = np.maximum.reduce([h.hermitian_defect(), np.maximum(-ev[:, 0], 0.0),
                             np.maximum(ev[:, -1] - 1.0, 0.0)])
    rep.add_curve("h positive contraction", bad, h.points, tol)
    p11 = psi.image(0, 0)
    c_psi = np.zeros(h.grid.sample_count)
    c_h = np.zeros(h.grid.sample_count)
    for i in range(phi.n):
        for j in range(phi.n):
            e = phi.image(i, j)
            c_psi = np.maximum(c_psi, p11.commutator(e).fibre_norms())
            c_h = np.maximum(c_h, h.commutator(e).fibre_norms())
    rep.add_curve("[psi(e11), phi(M_n)] = 0", c_psi, h.points, tol)
    rep.add_curve("[h, phi(M_n)] = 0", c_h, h.points, tol)
    _curve(rep, "psi(e11)h = h", p11 @ h - h, tol)
    defect = 1 - phi.one
    _curve(rep, "h(1 - phi(1)) = 1 - phi(1)", h @ defect - defect, tol)
    _relation_iii(rep, phi, psi, tol)
    return rep
