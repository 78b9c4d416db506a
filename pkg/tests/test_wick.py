import numpy as np
import pytest

from qfree import qfock, wick
from qfree.ncalg import NCPolynomial, Tensor2Series, all_words
from qfree.qfock import FockVector, QParams

X = NCPolynomial.variable(1, 0)
ONE = NCPolynomial.constant(1)


@pytest.mark.parametrize("q", [0.0, 0.3, -0.2])
def test_wick_examples(q):
    p = QParams(q, 1)
    assert wick.wick_poly((0,), p) == X
    assert wick.wick_poly((0, 0), p).allclose(X * X - ONE)
    assert wick.wick_poly((0, 0, 0), p).allclose(X ** 3 - (2 + q) * X)


@pytest.mark.parametrize("q", [0.0, 0.1, -0.3])
def test_wick_reproduces_basis_vectors(q):
    p = QParams(q, 2)
    for w in all_words(2, 5, 1):
        v = qfock.poly_vector(wick.wick_poly(w, p), q)
        assert (v - FockVector.basis(2, w)).max_abs() <= 1e-12


def test_wick_coefficient_bound_counterexample():
    """W_111111 at q=0 is the Chebyshev polynomial X⁶ − 5X⁴ + 6X² − 1; 5 exceeds 2²."""
    w6 = wick.wick_poly((0,) * 6, QParams(0.0, 1))
    assert w6.allclose(X ** 6 - 5 * X ** 4 + 6 * X ** 2 - ONE)
    assert abs(w6.coeff((0,) * 4)) > 2 ** (6 - 4)


def test_wick_coefficient_bound_holds_up_to_degree_5():
    for q in (0.0, 0.1, 0.3, -0.3):
        for w in all_words(2, 5, 1):
            for u, c in wick.wick_poly(w, QParams(q, 2)).terms.items():
                assert abs(c) <= (2 / (1 - abs(q))) ** (len(w) - len(u)) + 1e-12


def test_gram_examples():
    q = 0.3
    assert np.allclose(wick.gram(1, QParams(q, 3)), np.eye(3))
    assert wick.gram(2, QParams(q, 1)) == pytest.approx(np.array([[1 + q]]))
    g = wick.gram(2, QParams(q, 2), "brute")
    assert np.allclose(np.linalg.eigvalsh(g), [1 - q, 1 + q, 1 + q, 1 + q])


@pytest.mark.parametrize("q", [0.02, 0.1, 0.3])
def test_gram_brute_equals_recursive(q):
    for N in (1, 2, 3):
        for n in range(1, 5):
            p = QParams(q, N)
            assert np.max(np.abs(wick.gram(n, p, "brute") - wick.gram(n, p, "recursive"))) <= 1e-12


def test_min_eig_bound_examples():
    assert wick.min_eig_bound(3, QParams(0.0, 2)) == 1
    assert wick.min_eig_bound(2, QParams(0.02, 2), "theta") == pytest.approx(0.9596, abs=1e-4)
    assert wick.min_eig_bound(2, QParams(0.02, 2), "simplified") == pytest.approx(0.99917, abs=1e-5)


def test_simplified_bound_is_not_a_lower_bound():
    p = QParams(0.02, 2)
    lam = np.linalg.eigvalsh(wick.gram(2, p))[0]
    assert lam == pytest.approx(0.98)
    assert wick.min_eig_bound(2, p, "simplified") > lam
    assert wick.min_eig_bound(2, p, "theta") <= lam


def test_onb_examples():
    assert wick.onb_polys(1, QParams(0.2, 2))[0].allclose(NCPolynomial.variable(2, 0))
    q = 0.3
    p2 = wick.onb_polys(2, QParams(q, 1))[0]
    assert p2.allclose((X * X - ONE).scale(1 / np.sqrt(1 + q)))
    for w, pw in zip(all_words(2, 2, 2), wick.onb_polys(2, QParams(0.0, 2))):
        assert pw.allclose(wick.wick_poly(w, QParams(0.0, 2)))


@pytest.mark.parametrize("q", [0.1, -0.3])
def test_onb_orthonormal(q):
    p = QParams(q, 2)
    for n in (2, 3):
        vecs = [qfock.poly_vector(x, q) for x in wick.onb_polys(n, p)]
        g = np.array([[qfock.inner(a, b, q) for b in vecs] for a in vecs])
        assert np.max(np.abs(g - np.eye(len(vecs)))) <= 1e-9


def test_near_singular_gram_raises():
    with pytest.raises(wick.NearSingularGramError):
        wick.gram_inv_sqrt(2, QParams(-1 + 1e-12, 1))


def test_threshold_examples():
    from fractions import Fraction
    assert wick.q_threshold(2) == Fraction(1, 34)
    assert wick.q_threshold(1) == Fraction(1, 6)
    assert wick.q_threshold(3) == Fraction(1, 110)


def test_xi_examples():
    assert wick.xi_tensor(QParams(0.0, 2), 4) == Tensor2Series.one(2)
    q = 0.1
    t1 = wick.xi_tensor(QParams(q, 1), 1)
    assert t1.allclose(Tensor2Series(1, {((), ()): 1, ((0,), (0,)): q}))
    t2 = wick.xi_tensor(QParams(q, 1), 2)
    w = X * X - ONE
    extra = Tensor2Series.elementary(w, w).scale(q * q / (1 + q))
    assert t2.allclose(t1 + extra, atol=1e-14)


@pytest.mark.parametrize("legs", ["adjoint", "same"])
def test_xi_projector_legs(legs):
    p = QParams(0.2, 2)
    xi = wick.xi_expansion(p, 3, legs)
    v = FockVector.basis(2, (0, 1)).padded(3)
    err = (xi.kernel_apply(v) - v.scale(0.2 ** 2)).max_abs()
    if legs == "adjoint":
        assert err <= 1e-12
    else:
        assert err > 1e-3


def test_xi_tail_reports():
    xi = wick.xi_expansion(QParams(0.02, 2), 4)
    assert xi.operator_tail == pytest.approx(0.02 ** 5 / 0.98)
    assert 0 < xi.tail_bound < 1
    total = wick.xi_norm_check(xi)
    assert xi.level_rho_norms[0] <= total <= sum(xi.level_rho_norms) * (1 + 1e-12)
