"""Connecting data of the inductive systems for Z and W.

One numeric stage n -> n^3 is materialized: rho: M_n -> M_{n^3}, the partial
isometry v in M_{n^3}, and the hatted maps built from a witness at level n^3.
Basis vectors of C^n (x) C^n (x) C^n are indexed ``a * n^2 + b * n + c``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import plfun
from .blocks import phigen_fibre, w_witness, z_witness
from .errors import DecompositionError, DomainError, PreconditionError, ResourceError
from .matfield import GridSpec, MatFun, positive_sqrt, spectral_apply
from .ordzero import (
    OrderZeroMap, from_square_zero, oz_calc, validate_R, validate_Rhat,
)
from .plfun import ConnectorSymbolic, lambda_sequence
from .report import RelationReport

MAX_NUMERIC_LEVEL = 3


@dataclass(frozen=True)
class TowerConfig:
    """Levels q(k) = p^(3^k); ``numeric_step`` is the level n of the materialized stage."""

    p: int = 2
    numeric_step: int = 2

    def __post_init__(self):
        if self.p < 2:
            raise DomainError("p must be >= 2")

    def q(self, k: int) -> int:
        return self.p ** (3 ** k)

    def levels(self, count: int) -> list[int]:
        return [self.q(k) for k in range(count)]


def _check_level(n: int) -> None:
    if n < 2:
        raise DomainError("n must be >= 2")


def rho_weights(n: int) -> np.ndarray:
    """Diagonal of H in rho(a) = a (x) H, over the last two tensor factors."""
    H = np.ones((n, n))
    H[n - 1, :] = np.arange(1, n + 1) / n
    return H.ravel()


def rho(n: int) -> OrderZeroMap:
    """rho(a) = a (x) 1_{n-1} (x) 1_n (+) sum_i (i/n) a (x) e_nn (x) e_ii, constant in t."""
    _check_level(n)
    return OrderZeroMap.from_frame(n, GridSpec(2), rho_weights(n), constant=True, name="rho")


def v_matrix(n: int) -> np.ndarray:
    """Partial isometry in M_{n^3} pairing initial and final supports lexicographically.

    final:   vv* = 1_n (x) e_nn (x) 1_{n-1}
    initial: v*v = e_11 (x) 1_{n-1} (x) 1_n + e_11 (x) e_nn (x) e_nn - e_11 (x) e_11 (x) e_11
    """
    _check_level(n)
    last = n - 1
    final = [(a, last, c) for a in range(n) for c in range(n - 1)]
    initial = sorted(({(0, b, c) for b in range(n - 1) for c in range(n)} | {(0, last, last)})
                     - {(0, 0, 0)})
    idx = lambda a, b, c: a * n * n + b * n + c  # noqa: E731
    v = np.zeros((n ** 3, n ** 3))
    for dst, src in zip(sorted(final), initial):
        v[idx(*dst), idx(*src)] = 1.0
    return v


def v_properties(n: int, tol: float = 0.0) -> RelationReport:
    """Exact checks of the partial isometry v against rho."""
    v = v_matrix(n)
    r = rho(n)
    N = n ** 3
    one = np.eye(N)
    R = one - r.matrix(np.eye(n))
    e11 = np.zeros((N, N))
    e11[0, 0] = 1.0
    vvs, vsv = v @ v.T, v.T @ v
    rep = RelationReport(f"v ({n})")
    fin = np.kron(np.eye(n), np.kron(np.diag([0.0] * (n - 1) + [1.0]),
                                     np.diag([1.0] * (n - 1) + [0.0])))
    rep.add("vv* = 1 (x) e_nn (x) 1_{n-1}", np.abs(vvs - fin).max(), tol)
    rep.add("rank vv* = n^2 - n", abs(round(np.trace(vvs)) - (n * n - n)), tol)
    rep.add("rank v*v = n^2 - n", abs(round(np.trace(vsv)) - (n * n - n)), tol)
    rep.add("v^2 = 0", np.abs(v @ v).max(), tol)
    rep.add("(i) v*v e_11 = 0", np.abs(vsv @ e11).max(), tol)
    rep.add("(ii) rho(e11)v*v = v*v", np.abs(r.matrix(e11[:n, :n]) @ vsv - vsv).max(), tol)
    rep.add("(iii) (1-rho(1))vv* = 1-rho(1)", np.abs(R @ vvs - R).max(), tol)
    return rep


# --- hatted maps ----------------------------------------------------------------

class _Calculus:
    """f, g, h, d calculus of (phi, psi) at level n^3, evaluated once."""

    def __init__(self, phi: OrderZeroMap, psi: OrderZeroMap, n: int):
        self.n = n
        self.rho = rho(n)
        self.v = v_matrix(n)
        N = n ** 3
        self.R = np.eye(N) - self.rho.matrix(np.eye(n))
        self.fphi = oz_calc(plfun.f, phi)
        self.gphi = oz_calc(plfun.g, phi, check=False)
        self.hphi = oz_calc(plfun.h, phi, check=False)
        self.dpsi = oz_calc(plfun.d, psi)

    @cached_property
    def lam(self) -> MatFun:
        X = 1 - self.fphi.one + self.gphi(self.R)
        return positive_sqrt(X)

    @cached_property
    def mu(self) -> MatFun:
        return positive_sqrt(self.hphi(self.R))

    @cached_property
    def fv(self) -> MatFun:
        return self.fphi(self.v)

    @cached_property
    def d12(self) -> MatFun:
        return self.dpsi.image(0, 1)

    @cached_property
    def phi_hat(self) -> OrderZeroMap:
        return self.fphi.precompose(self.rho)


def _level_of(phi: OrderZeroMap) -> int:
    n = round(phi.n ** (1 / 3))
    for cand in (n - 1, n, n + 1):
        if cand >= 2 and cand ** 3 == phi.n:
            return cand
    raise DomainError(f"phi acts on M_{phi.n}, which is not M_(n^3)")


def _require(rep: RelationReport, what: str) -> None:
    if not rep.passed:
        names = ", ".join(r.name for r in rep.failures())
        raise PreconditionError(f"inputs fail {what}: {names}")


def _curve(rep, name, x: MatFun, tol):
    rep.add_curve(name, x.fibre_norms(), x.points, tol)


def hat_maps_z(phi_next: OrderZeroMap, psi_next: OrderZeroMap, tol: float = 1e-8,
               strict_tol: float = 1e-10, check_inputs: bool = True):
    """Connecting-step maps (phi_hat, psi_hat) on M_n from a solution at level n^3.

    phi_hat = f(phi) o rho and psi_hat^(1/2)(e12) = gamma + delta.
    Returns ``(phi_hat, psi_hat, gamma, delta, report)``.
    """
    n = _level_of(phi_next)
    if check_inputs:
        _require(validate_R(phi_next, psi_next, strict_tol), "the unital drop relations")
    C = _Calculus(phi_next, psi_next, n)
    gamma = C.lam @ C.d12
    delta = C.mu @ C.fv
    return _finish(C, gamma, delta, tol, strict_tol, unital=True)


def hat_maps_w(phi_next: OrderZeroMap, psi_next: OrderZeroMap, tol: float = 1e-8,
               strict_tol: float = 1e-10, check_inputs: bool = True):
    """The nonunital analogue: both summands carry the prefactor f(phi)(rho(1))^(1/2)."""
    n = _level_of(phi_next)
    if check_inputs:
        _require(validate_Rhat(phi_next, psi_next, strict_tol), "the nonunital drop relations")
    C = _Calculus(phi_next, psi_next, n)
    P = C.fphi(C.rho.matrix(np.eye(n)))
    Ph = positive_sqrt(P)
    gamma = Ph @ C.lam @ C.d12
    delta = Ph @ C.mu @ C.fv
    phi_hat, psi_hat, gamma, delta, rep = _finish(C, gamma, delta, tol, strict_tol,
                                                  unital=False)
    d11 = C.dpsi.image(0, 0)
    lhs = P @ (1 - C.fphi.one)
    _curve(rep, "P(1 - f(phi)(1)) d(psi)(e11) = P(1 - f(phi)(1))", lhs @ d11 - lhs, tol)
    dhat_one = MatFun(P.grid, spectral_apply(phi_next.one.samples, plfun.d_hat))
    _curve(rep, "d(psi)(e11) = dhat(phi(1))", d11 - dhat_one, strict_tol)
    _curve(rep, "[lambda, P^(1/2)] = 0", C.lam.commutator(Ph), strict_tol)
    _curve(rep, "[mu, P^(1/2)] = 0", C.mu.commutator(Ph), strict_tol)
    return phi_hat, psi_hat, gamma, delta, rep


def _finish(C: _Calculus, gamma: MatFun, delta: MatFun, tol, strict_tol, unital: bool):
    s = gamma + delta
    rep = RelationReport("connecting step (Z)" if unital else "connecting step (W)")
    _curve(rep, "(gamma+delta)^2 = 0", s @ s, strict_tol)
    _curve(rep, "gamma delta* = 0", gamma @ delta.adj(), strict_tol)
    _curve(rep, "delta gamma* = 0", delta @ gamma.adj(), strict_tol)
    phi_hat = C.phi_hat
    psi_hat = from_square_zero(s, tol=max(tol, 1e-9))
    one_hat = phi_hat.one
    ss = s @ s.adj()
    if unital:
        _curve(rep, "hat (ii) psi_hat(e11) = 1 - phi_hat(1)", ss - (1 - one_hat), tol)
        _curve(rep, "delta delta* = h(phi)(1 - rho(1))", delta @ delta.adj() - C.hphi(C.R),
               tol)
        X = C.lam @ C.lam
        _curve(rep, "gamma gamma* = 1 - f(phi)(1) + g(phi)(1 - rho(1))",
               gamma @ gamma.adj() - X, tol)
    else:
        _curve(rep, "hat (ii) psi_hat(e11) = phi_hat(1)(1 - phi_hat(1))",
               ss - one_hat @ (1 - one_hat), tol)
    p22 = psi_hat.image(1, 1)
    _curve(rep, "hat (iii) psi_hat(e22)phi_hat(e11) = psi_hat(e22)",
           p22 @ phi_hat.image(0, 0) - p22, tol)
    rep.add_curve("contraction", np.maximum(s.fibre_norms() - 1, 0.0), s.points, strict_tol)
    check = validate_R if unital else validate_Rhat
    rep.merge(check(phi_hat, psi_hat, tol), "output.")
    return phi_hat, psi_hat, gamma, delta, rep


# --- the numeric stage and its fingerprint ----------------------------------------

class NumericStage:
    """Witness at level n^3 together with rho and the calculus f(phi_next).

    ``alpha(a)`` is the image f(phi_next)(rho(a)) of the level-n generator phi(a).
    """

    def __init__(self, n: int = 2, grid: GridSpec = GridSpec(), kind: str = "Z"):
        _check_level(n)
        if n > MAX_NUMERIC_LEVEL:
            raise ResourceError(
                f"numeric stage n={n} needs fibres of dimension {n ** 3 * (n ** 3 + 1)}")
        if kind not in ("Z", "W"):
            raise DomainError("kind must be 'Z' or 'W'")
        self.n = n
        self.grid = grid
        self.kind = kind

    @cached_property
    def witness(self):
        build = z_witness if self.kind == "Z" else w_witness
        return build(self.n ** 3, self.grid)

    @cached_property
    def rho(self) -> OrderZeroMap:
        return rho(self.n)

    @cached_property
    def fphi(self) -> OrderZeroMap:
        return oz_calc(plfun.f, self.witness.phi)

    def alpha(self, a) -> MatFun:
        return self.fphi(self.rho.matrix(a))

    def hat_maps(self, **kwargs):
        fn = hat_maps_z if self.kind == "Z" else hat_maps_w
        return fn(self.witness.phi, self.witness.psi, **kwargs)


def lambda_parameters(n: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation points s and multiplicities of the level-n fibre decomposition at t."""
    seq = lambda_sequence(n)
    s = np.array([float(e.func(t)) for e in seq])
    m = np.array([e.multiplicity for e in seq])
    return s, m


def predicted_spectrum(a, n: int, t: float) -> np.ndarray:
    """Union of the spectra of phi(a)(s) over the decomposition at t, sorted."""
    s, m = lambda_parameters(n, t)
    fibres = phigen_fibre(n, a, s)
    ev = np.linalg.eigvalsh(0.5 * (fibres + np.conj(np.swapaxes(fibres, 1, 2))))
    return np.sort(np.repeat(ev, m, axis=0).ravel())


def fingerprint_check(a, t: float, stage: NumericStage | None = None,
                      tol: float = 1e-9, raise_on_mismatch: bool = True) -> RelationReport:
    """Eigenvalues of alpha^t(phi(a)) against those predicted by the decomposition."""
    stage = stage or NumericStage()
    a = np.asarray(a, dtype=complex)
    if np.abs(a - a.conj().T).max() > 1e-12:
        raise DomainError("fingerprint check needs a self-adjoint a")
    fibre = stage.alpha(a).at(t)
    computed = np.linalg.eigvalsh(0.5 * (fibre + fibre.conj().T))
    predicted = predicted_spectrum(a, stage.n, t)
    if computed.shape != predicted.shape:
        raise DecompositionError(
            f"dimension mismatch: {computed.size} computed vs {predicted.size} predicted")
    gaps = np.abs(computed - predicted)
    k = int(np.argmax(gaps))
    rep = RelationReport(f"fingerprint at t={t:g}")
    rep.add("spectrum match", gaps[k], tol, worst_t=t,
            detail=f"computed {computed[k]:.12g}, predicted {predicted[k]:.12g}")
    if raise_on_mismatch and gaps[k] > tol:
        raise DecompositionError(
            f"eigenvalue {computed[k]:.12g} at t={t:g} vs predicted {predicted[k]:.12g}")
    return rep


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random self-adjoint matrix of operator norm 1."""
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = z + z.conj().T
    return a / np.linalg.norm(a, 2)


def fingerprint_suite(stage: NumericStage, count: int = 20, ts=None, seed: int = 0,
                      tol: float = 1e-9) -> RelationReport:
    """Fingerprint checks for ``count`` random hermitian a at several t."""
    rng = np.random.default_rng(seed)
    ts = np.linspace(0, 1, 9) if ts is None else np.asarray(ts)
    rep = RelationReport("fingerprint")
    worst = np.zeros(len(ts))
    for _ in range(count):
        a = random_hermitian(stage.n, rng)
        alpha = stage.alpha(a)
        for j, t in enumerate(ts):
            fibre = alpha.at(t)
            computed = np.linalg.eigvalsh(0.5 * (fibre + fibre.conj().T))
            worst[j] = max(worst[j], np.abs(computed - predicted_spectrum(a, stage.n, t)).max())
    rep.add_curve("spectrum match", worst, ts, tol)
    rep.info["seed"] = seed
    rep.info["samples"] = count
    rep.info["checks"] = count * len(ts)
    return rep


def trace_shadow(stage: NumericStage, tol: float = 1e-9) -> RelationReport:
    """ntr(alpha^t(phi(1))) against the decomposition-weighted average of ntr(phi(1)(F(t)))."""
    n = stage.n
    ts = stage.grid.points
    lhs = stage.alpha(np.eye(n)).normalized_trace().real
    seq = lambda_sequence(n)
    vals, w = seq.evaluate(ts)
    fibres = phigen_fibre(n, np.eye(n), vals.ravel())
    ntr = (np.trace(fibres, axis1=1, axis2=2).real / (n * (n + 1))).reshape(vals.shape)
    rhs = w @ ntr
    rep = RelationReport("trace shadow")
    rep.add_curve("ntr alpha(phi(1)) = sum_F w_F ntr phi(1)(F(t))", np.abs(lhs - rhs), ts, tol)
    return rep


# --- symbolic connectors ------------------------------------------------------

def connector_symbolic(q: int, steps: int, budget: int = 200_000) -> ConnectorSymbolic:
    """Composite parameter maps of ``steps`` connecting steps starting at level q.

    The level-j factor is drawn from the decomposition at q_j = q^(3^j); the
    outermost factor belongs to the lowest level.
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    if q < 2:
        raise DomainError("q must be >= 2")
    out = lambda_sequence(q)
    for j in range(1, steps):
        level = q ** (3 ** j)
        if 2 * level > budget:
            raise ResourceError(f"level q={level} has too many distinct parameter maps")
        out = out.then(lambda_sequence(level), budget=budget)
    return out


def expected_fraction(q: int, steps: int) -> Fraction:
    """prod_j 1/(q_j^2 - q_j + 1) over the first ``steps`` levels."""
    out = Fraction(1)
    for j in range(steps):
        out *= plfun.nonconstant_factor(q ** (3 ** j))
    return out
