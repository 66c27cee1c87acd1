"""Generator witnesses inside the building blocks Z(n, n+1) and W(n, n+1).

Fibres are M_n (x) M_{n+1} with basis index ``i * (n + 1) + j``.  The copy of
M_n (x) M_n sits in the first n basis vectors of the second factor; the last
basis vector e_{n+1} carries the "drop" corner.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConstructionError, DomainError
from .matfield import BlockSpec, GridSpec, MatFun, flip_path_at
from .ordzero import OrderZeroMap, from_square_zero, validate_alt1
from .report import RelationReport


class Witness(NamedTuple):
    phi: OrderZeroMap
    psi: OrderZeroMap
    v: MatFun


class Alt1Witness(NamedTuple):
    phi: OrderZeroMap
    psi: OrderZeroMap
    h: MatFun


def _check_n(n: int) -> None:
    if n < 2:
        raise DomainError("n must be >= 2")


def corner_embedding(n: int) -> np.ndarray:
    """Isometry J: C^n (x) C^n -> C^n (x) C^(n+1), e_i (x) e_j -> e_i (x) e_j."""
    J = np.zeros((n * (n + 1), n * n))
    for i in range(n):
        for j in range(n):
            J[i * (n + 1) + j, i * n + j] = 1.0
    return J


def drop_corner(n: int) -> np.ndarray:
    """1_n (x) e_{n+1,n+1}."""
    e = np.zeros((n + 1, n + 1))
    e[n, n] = 1.0
    return np.kron(np.eye(n), e)


def z_frame(n: int, ts) -> np.ndarray:
    """Unitaries J u(t) J^* + 1 (x) e_{n+1,n+1}, one per entry of ``ts``."""
    J = corner_embedding(n)
    u = flip_path_at(n, np.asarray(ts, dtype=float))
    return J @ u @ J.T + drop_corner(n)


def _drop_weights(n: int, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return np.concatenate([np.ones(c.shape + (n,)), c[..., None]], axis=-1)


def phigen_fibre(n: int, a, s) -> np.ndarray:
    """phi(a)(s) of the Z witness at arbitrary parameters s (scalar or array).

    u(s)(a (x) 1_n)u(s)^* (+) (1 - s)(a (x) e_{n+1,n+1}) in closed form.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    V = z_frame(n, s)
    w = _drop_weights(n, 1 - s)
    K = np.einsum("ij,ms,st->misjt", np.asarray(a, dtype=complex), w,
                  np.eye(n + 1)).reshape(len(s), n * (n + 1), n * (n + 1))
    return V @ K @ np.conj(np.swapaxes(V, 1, 2))


def _transfer(n: int, frame: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """sqrt(scale) * sum_j |f_j (x) e_{n+1}><frame (e_1 (x) f_j)|."""
    M = frame.shape[0]
    D = n * (n + 1)
    J = corner_embedding(n)
    v = np.zeros((M, D, D), dtype=complex)
    for j in range(n):
        src = frame @ (J[:, j])  # frame applied to e_1 (x) f_j
        dst = j * (n + 1) + n
        v[:, dst, :] = np.conj(src)
    return np.sqrt(np.clip(scale, 0.0, None))[:, None, None] * v


def z_witness(n: int, grid: GridSpec = GridSpec()) -> Witness:
    """Generators (phi, psi) of Z(n, n+1) satisfying the unital drop relations.

    phi(a)(t) = u(t)(a (x) 1_n)u(t)^* (+) (1 - t) a (x) e_{n+1,n+1} with u the
    flip path; psi is the order zero map with psi^(1/2)(e12) = v, where
    v(t) = t^(1/2) sum_j |f_j (x) e_{n+1}><u(t)(e_1 (x) f_j)|.
    """
    _check_n(n)
    ts = grid.points
    block = BlockSpec.Z(n, n + 1)
    frame = z_frame(n, ts)
    phi = OrderZeroMap.from_frame(n, grid, _drop_weights(n, 1 - ts), frame, block=block,
                                  name="phi")
    v = MatFun(grid, _transfer(n, frame, ts), block)
    return Witness(phi, from_square_zero(v), v)


def w_witness(n: int, grid: GridSpec = GridSpec()) -> Witness:
    """Generators (phi, psi) of W(n, n+1) satisfying the nonunital drop relations.

    phi(a)(t) = (a (x) 1_n) (+) (1 - t)(a (x) e_{n+1,n+1}) and
    v(t) = (t(1 - t))^(1/2) sum_j e_{j1} (x) e_{n+1,j}.
    """
    _check_n(n)
    ts = grid.points
    block = BlockSpec.W(n, n + 1)
    phi = OrderZeroMap.from_frame(n, grid, _drop_weights(n, 1 - ts), block=block, name="phi")
    v = _transfer(n, np.broadcast_to(np.eye(n * (n + 1)), (len(ts),) + (n * (n + 1),) * 2),
                  ts * (1 - ts))
    v = MatFun(grid, v, block)
    return Witness(phi, from_square_zero(v), v)


def w_identities(wit: Witness, tol: float = 1e-12) -> RelationReport:
    """vx_1 = v and vv^* = phi(1)(1 - phi(1)) for a W witness."""
    rep = RelationReport("W witness identities")
    x1 = wit.phi.cone_generators()[0]
    one = wit.phi.one
    pts = one.points
    rep.add_curve("v x1 = v", (wit.v @ x1 - wit.v).fibre_norms(), pts, tol)
    rep.add_curve("vv* = phi(1)(1 - phi(1))",
                  (wit.v @ wit.v.adj() - one @ (1 - one)).fibre_norms(), pts, tol)
    rep.add_curve("v^2 = 0", (wit.v @ wit.v).fibre_norms(), pts, tol)
    return rep


def w_center_check(n: int, grid: GridSpec = GridSpec(), tol: float = 1e-10) -> RelationReport:
    """z = psi(e11) + sum_i psi_i(e22) equals t(1 - t) 1, where psi_i^(1/2)(e12) = v x_i."""
    wit = w_witness(n, grid)
    xs = wit.phi.cone_generators()
    vv = wit.v.adj() @ wit.v
    z = wit.psi.image(0, 0)
    for x in xs:
        z = z + x.adj() @ vv @ x
    ts = grid.points
    target = MatFun(grid, (ts * (1 - ts))[:, None, None] * np.eye(z.dim))
    rep = RelationReport(f"W({n},{n + 1}) central element")
    rep.add_curve("z = t(1-t)1", (z - target).fibre_norms(), ts, tol)
    # z must commute with the generators
    comm = np.zeros(len(ts))
    for x in xs + [wit.v]:
        comm = np.maximum(comm, z.commutator(x).fibre_norms())
    rep.add_curve("z central", comm, ts, tol)
    return rep


def alt1_profiles(ts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(c, eta, nu) of the alt1 witness.

    c: 1 on [0, 3/4], down to 0 at 1; eta: 0 on [0, 1/2], up to 1 at 3/4;
    nu = min(1, 2t).
    """
    ts = np.asarray(ts, dtype=float)
    c = np.interp(ts, [0, 0.75, 1], [1, 1, 0])
    eta = np.interp(ts, [0, 0.5, 0.75, 1], [0, 0, 1, 1])
    nu = np.minimum(1.0, 2 * ts)
    return c, eta, nu


def alt1_witness(n: int, grid: GridSpec = GridSpec(), tol: float = 1e-9) -> Alt1Witness:
    """A triple (phi, psi, h) in Z(n, n+1) for the presentation with an extra contraction h.

    The defect 1 - phi(1) = (1 - c) 1 (x) e lives on (3/4, 1], where both h and
    psi(e11) are the full corner 1 (x) e.
    """
    _check_n(n)
    ts = grid.points
    block = BlockSpec.Z(n, n + 1)
    c, eta, nu = alt1_profiles(ts)
    frame = z_frame(n, ts)
    phi = OrderZeroMap.from_frame(n, grid, _drop_weights(n, c), frame, block=block, name="phi")
    w = MatFun(grid, _transfer(n, frame, nu), block)
    psi = from_square_zero(w)
    h = MatFun(grid, eta[:, None, None] * drop_corner(n), block)
    rep = validate_alt1(phi, psi, h, tol)
    if not rep.passed:
        raise ConstructionError("alt1 witness violates: " +
                                ", ".join(r.name for r in rep.failures()))
    return Alt1Witness(phi, psi, h)


def witness_generators(phi: OrderZeroMap, psi: OrderZeroMap,
                       extra: Sequence[MatFun] = ()) -> list[MatFun]:
    """x_i = phi^(1/2)(e_1i), psi^(1/2)(e12) and any extra elements."""
    root = psi.cone_generators()
    return phi.cone_generators() + [root[1]] + list(extra)


def fibre_span_check(generators: Sequence[MatFun], t: float, max_len: int | None = 4,
                     rtol: float = 1e-9) -> int:
    """Dimension of the span of words of length 1..max_len in the fibres at t and adjoints.

    ``max_len=None`` keeps multiplying until the span is stable, which gives the
    dimension of the generated algebra.
    """
    if not generators:
        return 0
    letters = []
    for g in generators:
        a = g.at(t)
        letters.extend([a, np.conj(a.T)])
    scale = max(1.0, max(np.abs(a).max() for a in letters))
    tol = rtol * scale

    def extend(basis: np.ndarray, cands: np.ndarray) -> np.ndarray:
        stacked = cands if basis.size == 0 else np.vstack([basis, cands])
        _, s, vh = np.linalg.svd(stacked, full_matrices=False)
        return vh[s > tol]

    D = letters[0].shape[0]
    basis = extend(np.zeros((0, D * D)), np.array([a.ravel() for a in letters]))
    frontier = basis
    length = 1
    while max_len is None or length < max_len:
        length += 1
        mats = frontier.reshape(-1, D, D)
        words = np.array([(L @ m).ravel() for L in letters for m in mats])
        new = extend(basis, words)
        if new.shape[0] == basis.shape[0]:
            break
        basis = frontier = new
    return int(basis.shape[0])
