import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfree import deriv
from qfree.deriv import (adjoint, adjoint_elementary, adjoint_verify, apply_derivation,
                         conjugate_from_zeta, difference_quotient, fisher_and_wasserstein_const,
                         q_semicircular_spec, zero_derivation)
from qfree.ncalg import NCPolynomial, Tensor2Series, all_words
from qfree.qfock import FockTrace, QParams

X = NCPolynomial.variable(1, 0)
ONE = NCPolynomial.constant(1)
X1, X2 = NCPolynomial.variable(2, 0), NCPolynomial.variable(2, 1)


def dq(N, q=0.0):
    return difference_quotient(N, FockTrace(QParams(q, N)))


def test_apply_derivation_examples():
    spec = dq(2)
    assert apply_derivation(spec, 0, X1 * X2) == Tensor2Series(2, {((), (1,)): 1})
    xi_spec = q_semicircular_spec(QParams(0.0, 2), 4)
    assert apply_derivation(xi_spec, 0, X1 * X1) == Tensor2Series(2, {((), (0,)): 1, ((0,), ()): 1})
    assert apply_derivation(spec, 1, NCPolynomial.constant(2)).is_zero()


def test_adjoint_elementary_examples():
    spec = dq(1)
    assert adjoint_elementary(spec, ONE, ONE, 0) == X
    assert adjoint_elementary(spec, X, ONE, 0).allclose(X * X - ONE)
    assert adjoint_elementary(spec, X, X, 0).allclose(X ** 3 - 2 * X)
    assert adjoint_elementary(spec, X, ONE, 0, "literal").allclose(X * X + ONE)
    assert adjoint_elementary(spec, X, X, 0, "literal").allclose(X ** 3 + 2 * X)


@pytest.mark.parametrize("convention,ok", [("adjoint", True), ("literal", False)])
def test_only_adjoint_convention_is_an_adjoint(convention, ok):
    spec = dq(1)
    eta = [Tensor2Series(1, {((0,), ()): 1})]
    worst = max(adjoint_verify(spec, eta, NCPolynomial.monomial(1, w), convention).residual
                for w in all_words(1, 4))
    assert (worst <= 1e-12) == ok


def test_conjugate_examples():
    for N in (1, 2, 3):
        conj = conjugate_from_zeta(q_semicircular_spec(QParams(0.0, N), 3))
        for j in range(N):
            assert conj.polynomial(j).allclose(NCPolynomial.variable(N, j))
    z = zero_derivation(2, FockTrace(QParams(0.0, 2)))
    conj = conjugate_from_zeta(z)
    assert all(conj.polynomial(j).is_zero() for j in range(2))


def test_conjugate_n1_d1():
    q = 0.1
    spec = q_semicircular_spec(QParams(q, 1), 1)
    expect = X + (X ** 3 - 2 * X).scale(q)
    for route in ("tensor3", "elementary", "dense"):
        assert conjugate_from_zeta(spec, route).polynomial(0).allclose(expect, atol=1e-14)
    lit = conjugate_from_zeta(spec, "elementary", "literal").polynomial(0)
    assert lit.allclose(X + (X ** 3 + 2 * X).scale(q), atol=1e-14)


def test_conjugate_routes_agree():
    spec = q_semicircular_spec(QParams(0.1, 2), 3)
    polys = {r: conjugate_from_zeta(spec, r) for r in ("tensor3", "elementary", "dense")}
    for j in range(2):
        ref = polys["tensor3"].polynomial(j)
        assert polys["elementary"].polynomial(j).max_abs_diff(ref) <= 1e-12
        assert polys["dense"].polynomial(j).max_abs_diff(ref) <= 1e-12


def test_adjoint_verify_zero_eta():
    spec = q_semicircular_spec(QParams(0.02, 2), 3)
    chk = adjoint_verify(spec, [Tensor2Series(2), Tensor2Series(2)], X1 * X2)
    assert chk.residual == 0


def test_adjoint_verify_z_j():
    spec = q_semicircular_spec(QParams(0.02, 2), 8)
    one = Tensor2Series.one(2)
    for w in all_words(2, 4):
        chk = adjoint_verify(spec, [one, Tensor2Series(2)], NCPolynomial.monomial(2, w))
        assert chk.residual <= 1e-10


def test_adjoint_verify_random_eta_within_budget():
    rng = np.random.default_rng(11)
    spec = q_semicircular_spec(QParams(0.02, 2), 8)
    words = all_words(2, 2)
    for _ in range(3):
        eta = [Tensor2Series(2, {(words[a], words[b]): float(rng.standard_normal())
                                 for a, b in rng.integers(0, len(words), (3, 2))}) for _ in range(2)]
        p = NCPolynomial(2, {w: float(rng.standard_normal()) for w in all_words(2, 4)[::5]})
        chk = adjoint_verify(spec, eta, p)
        assert chk.residual <= 1e-6
        assert chk.residual <= chk.budget + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(0, 1), max_size=3).map(tuple), min_size=1, max_size=3),
       st.lists(st.lists(st.integers(0, 1), max_size=3).map(tuple), min_size=1, max_size=3))
def test_derivation_leibniz(fw, gw):
    spec = q_semicircular_spec(QParams(0.1, 2), 2)
    f = NCPolynomial(2, {w: 1 for w in fw})
    g = NCPolynomial(2, {w: 2 for w in gw})
    lhs = apply_derivation(spec, 0, f * g)
    rhs = apply_derivation(spec, 0, f).right_mul(g) + apply_derivation(spec, 0, g).left_mul(f)
    assert lhs.allclose(rhs, atol=1e-12)


def test_adjoint_routes_agree_on_elementary():
    spec = q_semicircular_spec(QParams(0.2, 2), 2)
    eta = Tensor2Series(2, {((0, 1), (1,)): 1.0, ((), (0, 0)): -0.5})
    a = adjoint(spec, 0, eta, "tensor3")
    b = adjoint(spec, 0, eta, "elementary")
    assert a.max_abs_diff(b) <= 1e-12


def test_conjugates_self_adjoint():
    conj = conjugate_from_zeta(q_semicircular_spec(QParams(0.1, 2), 3))
    for j in range(2):
        p = conj.polynomial(j)
        assert p.allclose(p.adjoint(), atol=1e-12)


def test_fisher_examples():
    for N in (1, 2, 3):
        rep = fisher_and_wasserstein_const(dq(N))
        assert rep.phi_star == N
        assert rep.C == pytest.approx(0.5 * math.sqrt(N), abs=1e-15)
    rep = fisher_and_wasserstein_const(zero_derivation(2, FockTrace(QParams(0.0, 2))))
    assert rep.phi_star == 0 and rep.C == 0


def test_fisher_q002_d8():
    rep = fisher_and_wasserstein_const(q_semicircular_spec(QParams(0.02, 2), 8))
    assert abs(rep.phi_star - 2) <= 0.01
    assert rep.tail_bound > 0
    assert math.isnan(rep.C)


def test_fisher_q002_d3_has_finite_c():
    rep = fisher_and_wasserstein_const(q_semicircular_spec(QParams(0.02, 2), 3))
    assert math.isfinite(rep.C) and rep.C >= 0.5 * math.sqrt(rep.phi_star)


def test_dense_route_denoise_keeps_word_basis_small():
    spec = q_semicircular_spec(QParams(0.02, 2), 4)
    conj = conjugate_from_zeta(spec, "dense")
    for part in conj.xi[0].parts:
        assert len(part.lefts) <= len(spec.words)


def test_adjoint_requires_zeta():
    spec = deriv.DerivationSpec(1, [[Tensor2Series.one(1)]], FockTrace(QParams(0.0, 1)))
    with pytest.raises(ValueError):
        adjoint_elementary(spec, ONE, ONE, 0)


def test_tensor3_norm_table_route_matches_scalar_route():
    spec = q_semicircular_spec(QParams(0.1, 2), 1)
    theta = deriv.coderivation(spec, spec.values[0][0], 1)
    tr = spec.trace
    fast = deriv.tensor3_norm_sq(tr, theta)
    slow = deriv.tensor3_norm_sq(lambda w: tr(w), theta)
    assert fast == pytest.approx(slow, rel=1e-12)
