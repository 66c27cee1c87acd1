import numpy as np
import pytest

from ozcheck.blocks import (
    alt1_profiles, alt1_witness, drop_corner, fibre_span_check, phigen_fibre, w_center_check,
    w_identities, w_witness, witness_generators, z_witness,
)
from ozcheck.errors import DomainError
from ozcheck.matfield import GridSpec, MatFun, membership_residual
from ozcheck.ordzero import unit, validate_alt1, validate_R, validate_Rhat

GRID = GridSpec(257)


@pytest.fixture(scope="module")
def z2():
    return z_witness(2, GRID)


@pytest.fixture(scope="module")
def w2():
    return w_witness(2, GRID)


def test_small_n_rejected():
    with pytest.raises(DomainError):
        z_witness(1, GRID)


@pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 1.0])
def test_z_phi_spectrum(z2, t):
    ev = np.linalg.eigvalsh(z2.phi.one.at(t))
    assert np.allclose(ev, sorted([1.0] * 4 + [1 - t] * 2), atol=1e-12)


def test_z_defect_closed_form(z2):
    ts = GRID.points
    target = MatFun(GRID, ts[:, None, None] * drop_corner(2))
    assert (1 - z2.phi.one - target).sup_norm() <= 1e-12
    assert (z2.psi.image(0, 0) - target).sup_norm() <= 1e-12


def test_z_transfer_at_one_is_boundary_element(z2):
    expect = np.kron(np.eye(2), np.eye(3)[:, [2]] @ np.eye(3)[[0], :])
    assert np.allclose(z2.v.at(1.0), expect, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_z_witness_relations(n):
    wit = z_witness(n, GRID)
    assert validate_R(wit.phi, wit.psi, 1e-11).passed
    for i in range(n):
        for j in range(n):
            assert membership_residual(wit.phi.image(i, j)) <= 1e-11
    for i in range(2):
        for j in range(2):
            assert membership_residual(wit.psi.image(i, j)) <= 1e-11


def test_phigen_fibre_matches_samples(z2):
    a = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, 0.7]])
    direct = z2.phi(a).samples
    closed = phigen_fibre(2, a, GRID.points)
    assert np.allclose(direct, closed, atol=1e-13)


def test_w_psi_off_diagonal(w2):
    ts = GRID.points
    e = np.kron(unit(2, 0, 0), unit(3, 2, 0)) + np.kron(unit(2, 1, 0), unit(3, 2, 1))
    target = MatFun(GRID, (ts * (1 - ts))[:, None, None] * e)
    assert (w2.psi.image(0, 1) - target).sup_norm() <= 1e-12


def test_w_square_zero_exact(w2):
    assert (w2.v @ w2.v).sup_norm() == 0


def test_w_identities(w2):
    assert w_identities(w2).passed


def test_w_relations_n3():
    wit = w_witness(3, GRID)
    rep = validate_Rhat(wit.phi, wit.psi, 1e-11)
    assert rep.passed, rep.summary()


def test_center_at_half():
    rep = w_center_check(2, GRID, 1e-12)
    assert rep.passed
    mid = GRID.index_of(0.5)
    assert rep["z = t(1-t)1"].curve[mid] <= 1e-12
    assert rep["z = t(1-t)1"].curve[0] == 0


def test_center_n3():
    rep = w_center_check(3, GRID, 1e-11)
    assert rep["z = t(1-t)1"].value <= 1e-11


def test_alt1_profiles():
    c, eta, nu = alt1_profiles([0.0, 0.5, 0.625, 0.75, 0.875, 1.0])
    assert c.tolist() == [1, 1, 1, 1, 0.5, 0]
    assert eta.tolist() == [0, 0, 0.5, 1, 1, 1]
    assert nu.tolist() == [0, 1, 1, 1, 1, 1]


def test_alt1_witness_exact_identities():
    wit = alt1_witness(2, GRID)
    defect = 1 - wit.phi.one
    assert (wit.h @ defect - defect).sup_norm() <= 1e-15
    for i in range(2):
        for j in range(2):
            assert wit.h.commutator(wit.phi.image(i, j)).sup_norm() <= 1e-15
    late = GRID.points >= 0.5
    p11 = wit.psi.image(0, 0).samples[late]
    assert np.allclose(p11, drop_corner(2), atol=1e-12)


def test_alt1_mutation_names_relation():
    wit = alt1_witness(2, GRID)
    one = MatFun.identity(6, GRID, wit.h.block)
    rep = validate_alt1(wit.phi, wit.psi, one)
    assert "psi(e11)h = h" in [r.name for r in rep.failures()]


def test_span_endpoints(w2):
    gens = witness_generators(w2.phi, w2.psi)
    assert fibre_span_check(gens, 0.0) == 4
    assert fibre_span_check(gens, 1.0) == 4


def test_span_trivial():
    assert fibre_span_check([MatFun.identity(3, GridSpec(5))], 0.5) == 1


def test_generated_algebra_is_full_fibre(w2):
    gens = witness_generators(w2.phi, w2.psi)
    assert fibre_span_check(gens, 0.5, max_len=None) == 36


def test_z_span_at_one(z2):
    gens = witness_generators(z2.phi, z2.psi)
    assert fibre_span_check(gens, 1.0, max_len=None) == 9
