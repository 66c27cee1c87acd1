from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from ozcheck import plfun
from ozcheck.errors import DomainError
from ozcheck.plfun import PLFunc


def test_canonical_breakpoints():
    assert plfun.d.breakpoints == ((0, 0), (F(3, 16), 1), (1, 1))
    assert plfun.f.breakpoints == ((0, 0), (F(1, 4), 0), (F(1, 2), 1), (1, 1))
    assert plfun.g.breakpoints == ((0, 0), (F(1, 4), 0), (F(1, 2), 1), (F(3, 4), 0), (1, 0))
    assert plfun.h.breakpoints == ((0, 0), (F(1, 2), 0), (F(3, 4), 1), (1, 1))


def test_eval_examples():
    assert plfun.eval(plfun.d, 0) == 0
    assert plfun.eval(plfun.f, F(3, 8)) == F(1, 2)
    assert plfun.eval(plfun.h, F(5, 8)) == F(1, 2)


@pytest.mark.parametrize("t", [-0.1, 1.5, F(3, 2)])
def test_eval_outside_unit_interval(t):
    with pytest.raises(DomainError):
        plfun.eval(plfun.h, t)


def test_breakpoints_must_span_unit_interval():
    with pytest.raises(DomainError):
        PLFunc([(0, 0), (F(1, 2), 1)])
    with pytest.raises(DomainError):
        PLFunc([(0, 0), (F(1, 2), 1), (F(1, 2), 0), (1, 0)])


def test_h_composed_with_itself_is_steep_clamp():
    hh = plfun.compose(plfun.h, plfun.h)
    assert hh == PLFunc([(0, 0), (F(10, 16), 0), (F(11, 16), 1), (1, 1)])
    # dense grid cross-check
    for i in range(0, 100001, 97):
        t = F(i, 100000)
        assert hh(t) == min(1, max(0, 16 * t - 10))


def test_compose_with_identity():
    assert plfun.compose(plfun.f, PLFunc.identity()) == plfun.f


def test_compose_rejects_escaping_inner():
    inner = PLFunc([(0, 0), (1, 2)])
    with pytest.raises(DomainError):
        plfun.compose(plfun.h, inner)


@pytest.mark.parametrize("n", range(1, 7))
def test_iterated_h_slope_and_offset(n):
    hn = plfun.iterate(plfun.h, n)
    assert max(hn.slopes()) == 4 ** n
    assert hn.xs[1] * 4 ** n == plfun.ramp_offset(n)
    if n > 1:
        assert plfun.ramp_offset(n) == 4 * plfun.ramp_offset(n - 1) + 2
    assert plfun.ramp_offset(1) == 2


def test_identities_report():
    rep = plfun.verify_pl_identities()
    assert rep.passed
    assert len(rep) == 6
    assert rep.max_residual == 0


def test_support_unit_criterion_detects_failure():
    # f is not 1 on the support of g
    cover, dev = plfun.unit_on_support(plfun.f, plfun.g.support_closure())
    assert cover > 0


def test_lambda_sequence_q2():
    seq = plfun.lambda_sequence(2)
    assert seq.entry_count == 12
    assert seq.nonconstant_count == 4
    assert seq.nonconstant_fraction == F(1, 3)
    consts = [e for e in seq if e.func.is_constant]
    assert sum(e.multiplicity for e in consts) == 8
    assert all(e.func(0) == F(1, 2) for e in consts)


def test_lambda_sequence_rejects_small_q():
    with pytest.raises(DomainError):
        plfun.lambda_sequence(1)


@pytest.mark.parametrize("q", [2, 3, 5, 8])
def test_entry_count_identity(q):
    seq = plfun.lambda_sequence(q)
    assert seq.entry_count * q * (q + 1) == q ** 3 * (q ** 3 + 1)
    assert seq.nonconstant_fraction == F(1, q * q - q + 1)


def test_json_round_trip():
    assert PLFunc.from_json(plfun.g.to_json()) == plfun.g


_rationals = st.fractions(min_value=0, max_value=1, max_denominator=64)


@st.composite
def pl_functions(draw):
    inner = sorted(set(draw(st.lists(_rationals.filter(lambda x: 0 < x < 1), max_size=5))))
    xs = [F(0)] + inner + [F(1)]
    ys = [draw(_rationals) for _ in xs]
    return PLFunc(list(zip(xs, ys)))


@settings(max_examples=60, deadline=None)
@given(pl_functions(), pl_functions(), st.lists(_rationals, min_size=1, max_size=20))
def test_compose_is_exact(a, b, ts):
    c = plfun.compose(a, b)
    for t in ts:
        assert c(t) == a(b(t))


@settings(max_examples=40, deadline=None)
@given(pl_functions(), pl_functions())
def test_difference_is_pointwise(a, b):
    diff = a - b
    for x in set(a.xs) | set(b.xs):
        assert diff(x) == a(x) - b(x)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=2, max_value=12))
def test_lambda_fraction_property(q):
    seq = plfun.lambda_sequence(q)
    assert seq.nonconstant_fraction == plfun.nonconstant_factor(q)
    assert seq.entry_count * q * (q + 1) == q ** 3 * (q ** 3 + 1)
