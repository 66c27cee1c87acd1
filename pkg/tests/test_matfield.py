import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ozcheck import plfun
from ozcheck.blocks import z_witness
from ozcheck.errors import DomainError, PositivityError, StructuralError
from ozcheck.matfield import (
    BlockSpec, GridSpec, MatFun, flip_matrix, flip_path, flip_path_at, membership_residual, positive_sqrt,
    scalar_calc, sup_norm,
)
from ozcheck.tower import rho

GRID = GridSpec(33)


def _random_matfun(rng, dim=3, grid=GRID):
    s = rng.normal(size=(grid.sample_count, dim, dim)) + 1j * rng.normal(size=(grid.sample_count, dim, dim))
    return MatFun(grid, s)


def test_identity_norm():
    assert sup_norm(MatFun.identity(4, GRID)) == pytest.approx(1.0)


def test_defect_norm_attained_at_one():
    phi = z_witness(2, GridSpec(257)).phi
    defect = 1 - phi.one
    norms = defect.fibre_norms()
    assert defect.sup_norm() == pytest.approx(1.0, abs=1e-12)
    assert np.argmax(norms) == len(norms) - 1


def test_adjoint_involution():
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = _random_matfun(rng, dim=2, grid=GridSpec(5))
        assert x.adj().adj().allclose(x, atol=0)


def test_grid_mismatch():
    a = MatFun.identity(2, GridSpec(5))
    b = MatFun.identity(2, GridSpec(9))
    with pytest.raises(StructuralError):
        a @ b
    with pytest.raises(StructuralError):
        a + MatFun.identity(3, GridSpec(5))


def test_membership_of_unit():
    one = MatFun.identity(6, GRID, BlockSpec.Z(2, 3))
    assert membership_residual(one) == 0


def test_membership_of_witness_image():
    phi = z_witness(2, GridSpec(257)).phi
    assert membership_residual(phi.image(0, 1)) <= 1e-12


def test_membership_corner_projection():
    # HS projection distance of e11 (x) e11 to both endpoint subspaces is 2/3 in operator norm
    a = np.kron(np.diag([1.0, 0.0]), np.diag([1.0, 0.0, 0.0]))
    x = MatFun.constant(a, GRID, BlockSpec.Z(2, 3))
    assert membership_residual(x) == pytest.approx(2 / 3, abs=1e-12)


def test_coprimality_checked():
    with pytest.raises(DomainError):
        BlockSpec.Z(2, 4)


def test_scalar_calc_identity():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4))
    pos = MatFun.constant(a @ a.T / np.linalg.norm(a @ a.T, 2), GRID)
    out = scalar_calc(pos, lambda t: t)
    assert out.allclose(pos, atol=1e-12)


def test_scalar_calc_f_on_rho():
    r = rho(2).one
    assert np.allclose(np.linalg.eigvalsh(r.at(0.0)), [0.5] * 2 + [1.0] * 6)
    out = scalar_calc(r, plfun.f)
    assert np.allclose(np.linalg.eigvalsh(out.at(1.0)), 1.0, atol=1e-12)


def test_dhat_on_quadratic_profile():
    ts = GRID.points
    x = MatFun(GRID, ts[:, None, None] * np.eye(2))
    out = scalar_calc(x, plfun.d_hat)  # d(t(1 - t))
    middle = (ts >= 0.25) & (ts <= 0.75)
    assert np.allclose(out.samples[middle], np.eye(2), atol=1e-12)


def test_scalar_calc_rejects_non_positive():
    x = MatFun.constant(np.diag([1.0, -0.5]), GRID)
    with pytest.raises(PositivityError):
        positive_sqrt(x)


def test_flip_path_endpoints():
    u = flip_path(2, GridSpec(65))
    assert np.allclose(u.at(0), np.eye(4), atol=1e-15)
    e1, e2 = np.eye(2)
    assert np.allclose(u.at(1) @ np.kron(e1, e2), np.kron(e2, e1), atol=1e-15)
    assert np.allclose(flip_matrix(2) @ np.kron(e1, e2), np.kron(e2, e1))
    uu = u @ u.adj() - MatFun.identity(4, u.grid)
    assert uu.sup_norm() <= 1e-13


def test_csv_and_json_round_trip():
    rng = np.random.default_rng(3)
    x = _random_matfun(rng, dim=2, grid=GridSpec(5))
    assert MatFun.from_json(x.to_json()).allclose(x, atol=0)
    assert MatFun.from_csv(x.to_csv()).allclose(x, atol=1e-15)


def test_interpolation_is_exact_for_linear_functions():
    coarse = GridSpec(9)
    ts = coarse.points
    x = MatFun(coarse, ts[:, None, None] * np.diag([1.0, 2.0]))
    fine = x.interpolate(coarse.refine())
    assert np.allclose(fine.samples, fine.points[:, None, None] * np.diag([1.0, 2.0]))


_seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


@settings(max_examples=30, deadline=None)
@given(_seeds)
def test_star_norm_property(seed):
    rng = np.random.default_rng(seed)
    x = _random_matfun(rng, grid=GridSpec(5))
    lhs = (x.adj() @ x).fibre_norms()
    assert np.allclose(lhs, x.fibre_norms() ** 2, rtol=1e-10)


@settings(max_examples=30, deadline=None)
@given(_seeds, st.sampled_from([plfun.f, plfun.h, plfun.d]))
def test_calculus_composition_law(seed, fn):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    pos = a @ a.conj().T
    pos /= np.linalg.norm(pos, 2)
    x = MatFun.constant(pos, GridSpec(3))
    two_step = scalar_calc(scalar_calc(x, plfun.h), fn)
    one_step = scalar_calc(x, plfun.compose(fn, plfun.h))
    assert two_step.allclose(one_step, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0, max_value=1), st.integers(min_value=2, max_value=3))
def test_flip_conjugation(t, q):
    # u(t) commutes with every symmetric tensor a (x) a
    rng = np.random.default_rng(q)
    a = rng.normal(size=(q, q))
    ut = flip_path_at(q, np.array([t]))[0]
    aa = np.kron(a, a)
    assert np.allclose(ut @ aa, aa @ ut, atol=1e-12)
