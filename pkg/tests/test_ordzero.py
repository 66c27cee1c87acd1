import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ozcheck import plfun
from ozcheck.blocks import w_witness, z_witness
from ozcheck.errors import CalculusDomainError, ContractionError, NotSquareZeroError, StructuralError
from ozcheck.matfield import CLUSTER_TOL, GridSpec, MatFun, scalar_calc
from ozcheck.ordzero import (
    OrderZeroMap, from_square_zero, multiplicativity_residual, oz_calc, support_hom_of, unit,
    validate_cone, validate_R, validate_Rhat,
)
from ozcheck.tower import random_hermitian, rho

GRID = GridSpec(257)
RELATION_III = "(iii) psi(e22)phi(e11) = psi(e22)"


@pytest.fixture(scope="module")
def zw():
    return z_witness(2, GRID)


@pytest.fixture(scope="module")
def ww():
    return w_witness(2, GRID)


def test_w_generators_satisfy_cone(ww):
    rep = validate_cone(ww.phi.cone_generators(), 1e-12)
    assert rep.passed, rep.summary()


def test_single_generator_cone():
    ts = GRID.points
    p = np.diag([1.0, 0.0, 0.0])
    x1 = MatFun(GRID, np.sqrt(ts)[:, None, None] * p)
    rep = validate_cone([x1])
    assert rep.passed
    assert rep.names == ["norm[1]", "positive[1]"]


def test_perturbed_cone_detected(ww):
    x = ww.phi.cone_generators()
    noise = random_hermitian(x[0].dim, np.random.default_rng(0))
    bad = [x[0] + 0.1 * MatFun.constant(noise, GRID)] + x[1:]
    rep = validate_cone(bad)
    assert rep["orth[1,2]"].value > 0.01
    assert not rep.passed


def test_cone_rejects_mixed_grids():
    with pytest.raises(StructuralError):
        validate_cone([MatFun.identity(2, GridSpec(5)), MatFun.identity(2, GridSpec(9))])


def test_square_zero_zero_map():
    psi = from_square_zero(MatFun.zeros(3, GridSpec(9)))
    for i in range(2):
        for j in range(2):
            assert psi.image(i, j).sup_norm() == 0


def test_square_zero_projection_case():
    v = MatFun.constant(unit(2, 0, 1), GridSpec(9))
    psi = from_square_zero(v)
    assert psi.image(0, 0).allclose(MatFun.constant(unit(2, 0, 0), v.grid))
    assert psi.image(1, 1).allclose(MatFun.constant(unit(2, 1, 1), v.grid))


def test_square_zero_w_witness(ww):
    one = ww.phi.one
    ts = GRID.points
    corner = np.kron(np.eye(2), np.diag([0.0, 0.0, 1.0]))
    target = MatFun(GRID, (ts * (1 - ts))[:, None, None] * corner)
    assert (ww.psi.image(0, 0) - target).sup_norm() <= 1e-12
    assert (ww.psi.image(0, 0) - one @ (1 - one)).sup_norm() <= 1e-12


def test_square_zero_errors():
    g = GridSpec(5)
    with pytest.raises(NotSquareZeroError):
        from_square_zero(MatFun.identity(2, g) * 0.5)
    with pytest.raises(ContractionError):
        from_square_zero(MatFun.constant(2 * unit(2, 0, 1), g))


def test_support_of_rho_is_ampliation():
    pi = support_hom_of(rho(2))
    for i in range(2):
        for j in range(2):
            expect = np.kron(unit(2, i, j), np.eye(4))
            assert np.allclose(pi.support_samples(unit(2, i, j))[0], expect, atol=1e-12)


def test_support_of_homomorphism_is_itself():
    g = GridSpec(9)
    hom = OrderZeroMap.from_frame(2, g, np.ones(3))
    pi = support_hom_of(hom)
    for i in range(2):
        for j in range(2):
            assert np.allclose(pi.support_samples(unit(2, i, j)), hom(unit(2, i, j)).samples)


def test_support_of_z_phi(zw):
    pi = support_hom_of(zw.phi)
    res = multiplicativity_residual(pi)
    assert res[:-1].max() <= 1e-10
    one = pi.support_samples(np.eye(2))
    assert np.allclose(one[:-1], np.eye(6), atol=1e-10)
    assert np.linalg.matrix_rank(one[-1], tol=1e-6) == 4


def test_oz_calc_identity(zw):
    same = oz_calc(lambda t: t, zw.phi)
    for i in range(2):
        for j in range(2):
            assert (same.image(i, j) - zw.phi.image(i, j)).sup_norm() <= 1e-12


def test_oz_calc_requires_vanishing_at_zero():
    with pytest.raises(CalculusDomainError):
        oz_calc(plfun.PLFunc.constant(1), rho(2))


def test_f_of_stage_map_on_rho():
    from ozcheck.tower import NumericStage
    stage = NumericStage(2, GridSpec(3))
    x = stage.alpha(np.eye(2))
    ev = np.round(np.linalg.eigvalsh(x.at(0.0)), 12)
    vals, counts = np.unique(ev, return_counts=True)
    assert dict(zip(vals.tolist(), counts.tolist())) == {0.5: 18, 1.0: 54}


def test_d_of_psi_is_one_at_threshold():
    # v with |v|^2 = 3/16 on one fibre; d(3/16) = 1
    g = GridSpec(3)
    v = MatFun.constant(np.sqrt(3 / 16) * unit(2, 0, 1), g)
    dpsi = oz_calc(plfun.d, from_square_zero(v))
    assert np.allclose(np.linalg.eigvalsh(dpsi.image(0, 0).at(0.5)), [0.0, 1.0], atol=1e-12)


def test_validate_R_on_witness(zw):
    rep = validate_R(zw.phi, zw.psi, 1e-11)
    assert rep.passed, rep.summary()


def test_validate_R_degenerate_solution():
    g = GridSpec(9)
    phi = OrderZeroMap.from_frame(2, g, np.ones(3))
    psi = from_square_zero(MatFun.zeros(6, g))
    rep = validate_R(phi, psi)
    assert rep["(ii) psi(e11) = 1 - phi(1)"].value == 0
    assert rep[RELATION_III].value == 0


def test_swapped_orientation_detected(zw):
    P = zw.psi.images
    swapped = OrderZeroMap.from_images([[P[1][1], P[1][0]], [P[0][1], P[0][0]]])
    rep = validate_R(zw.phi, swapped)
    assert rep[RELATION_III].value >= 0.4
    mid = GRID.index_of(0.5)
    assert rep[RELATION_III].curve[mid] >= 0.4


@pytest.mark.parametrize("n", [2, 3])
def test_validate_Rhat_on_witness(n):
    w = w_witness(n, GRID)
    rep = validate_Rhat(w.phi, w.psi, 1e-11)
    assert rep.passed, rep.summary()


def test_rhat_projection_forces_zero():
    g = GridSpec(9)
    phi = OrderZeroMap.from_frame(2, g, [1.0, 1.0, 0.0])
    psi = from_square_zero(MatFun.zeros(6, g))
    rep = validate_Rhat(phi, psi)
    assert rep["(ii) psi(e11) = phi(1)(1 - phi(1))"].value == 0


def test_pair_shape_checked(zw):
    with pytest.raises(StructuralError):
        validate_R(zw.phi, w_witness(3, GRID).phi)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
def test_square_zero_round_trip(a, b):
    g = GridSpec(3)
    v = MatFun.constant((a * unit(3, 0, 1) + b * unit(3, 0, 2)) / np.sqrt(2), g)
    psi = from_square_zero(v)
    roots = psi.cone_generators()
    # spectral values within CLUSTER_TOL of 0 are snapped, so |v| below its sqrt is lost
    assert (roots[1] - v).sup_norm() <= np.sqrt(CLUSTER_TOL)
    assert (psi.image(0, 0) - v @ v.adj()).sup_norm() <= 1e-12
    assert (psi.image(1, 1) @ psi.image(0, 0)).sup_norm() <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([plfun.f, plfun.h, plfun.d]), st.integers(0, 2 ** 16))
def test_calculus_matches_on_projections(fn, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 1, size=3)
    phi = OrderZeroMap.from_frame(2, GridSpec(3), w)
    lhs = oz_calc(fn, phi).image(1, 1)
    rhs = scalar_calc(phi.image(1, 1), fn)
    assert (lhs - rhs).sup_norm() <= 1e-10
