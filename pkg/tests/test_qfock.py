import numpy as np
import pytest

from qfree import qfock
from qfree.ncalg import NCPolynomial, all_words
from qfree.qfock import FockTrace, FockVector, QParams


def test_inversions_examples():
    assert qfock.inversions((0, 1, 2)) == 0
    assert qfock.inversions((1, 0)) == 1
    assert qfock.inversions((3, 2, 1, 0)) == 6


@pytest.mark.parametrize("q", [0.0, 0.3, -0.4])
def test_q_inner_brute_examples(q):
    p = QParams(q, 2)
    assert qfock.q_inner_brute((0, 0), (0, 0), p) == pytest.approx(1 + q)
    assert qfock.q_inner_brute((0, 1), (1, 0), p) == pytest.approx(q)
    assert qfock.q_inner_brute((0,), (1,), p) == 0


def test_qparams_validation():
    with pytest.raises(ValueError):
        QParams(1.0, 2)
    with pytest.raises(ValueError):
        QParams(0.1, 0)


def test_create_annihilate_examples():
    q = 0.3
    v = qfock.create(0, FockVector.vacuum(2))
    assert np.allclose(v.flat(), FockVector.basis(2, (0,)).flat())
    got = qfock.annihilate(0, FockVector.basis(2, (0, 0)), q)
    assert np.allclose(got.level(1), (1 + q) * FockVector.basis(2, (0,)).level(1))
    assert qfock.annihilate(1, FockVector.basis(2, (0,)), q).max_abs() == 0


def test_generator_action_examples():
    q = 0.2
    om = FockVector.vacuum(2)
    x1 = qfock.apply_generator(0, om, q)
    assert np.allclose(x1.padded(1).flat(), FockVector.basis(2, (0,)).flat())
    x11 = qfock.apply_word((0, 0), om, q)
    expect = FockVector.basis(2, (0, 0)) + FockVector.vacuum(2).padded(2)
    assert np.allclose(x11.padded(2).flat(), expect.flat())
    x12 = qfock.apply_word((0, 1), om, q)
    assert np.allclose(x12.padded(2).flat(), FockVector.basis(2, (0, 1)).flat())


@pytest.mark.parametrize("q", [0.0, 0.1, -0.5])
def test_trace_examples(q):
    p = QParams(q, 2)
    assert qfock.trace_word((0, 0), p) == pytest.approx(1)
    assert qfock.trace_word((0,), p) == 0
    assert qfock.trace_word((0, 0, 0, 0), p) == pytest.approx(2 + q)
    assert qfock.moment_oracle((0, 0, 0, 0), p) == pytest.approx(2 + q)
    assert qfock.moment_oracle((1, 1), p) == 1


def test_catalan_moments_at_q0():
    p = QParams(0.0, 1)
    for n in range(1, 7):
        assert qfock.moment_oracle((0,) * (2 * n), p) == qfock.catalan(n)
        assert qfock.trace_word((0,) * (2 * n), p) == qfock.catalan(n)


@pytest.mark.parametrize("q", [0.0, 0.25, -0.3])
@pytest.mark.parametrize("N", [1, 2, 3])
def test_trace_word_matches_oracle(q, N):
    p = QParams(q, N)
    for w in all_words(N, 6):
        assert abs(qfock.trace_word(w, p) - qfock.moment_oracle(w, p)) <= 1e-12


@pytest.mark.parametrize("q", [0.1, -0.35])
def test_gram_apply_matches_brute(q):
    N, n = 2, 3
    words = all_words(N, n, n)
    brute = np.array([[qfock.q_inner_brute(u, v, QParams(q, N)) for v in words] for u in words])
    assert np.max(np.abs(qfock.gram_recursive_dense(n, N, q) - brute)) <= 1e-14


def test_inner_matches_brute_on_basis():
    q = 0.4
    u, v = FockVector.basis(2, (0, 1, 0)), FockVector.basis(2, (0, 0, 1))
    assert qfock.inner(u, v, q) == pytest.approx(qfock.q_inner_brute((0, 1, 0), (0, 0, 1), QParams(q, 2)))


def test_fock_trace_table_and_memo():
    tr = FockTrace(QParams(0.2, 2))
    words = all_words(2, 2)
    t = tr.table(words, words, (0,))
    for a, l in enumerate(words):
        for b, r in enumerate(words):
            assert t[a, b] == pytest.approx(qfock.moment_oracle(l + (0,) + r, tr.params), abs=1e-13)
    f = NCPolynomial(2, {(0, 0): 2, (): 1})
    assert tr.poly(f) == pytest.approx(3)


def test_trace_is_tracial():
    p = QParams(0.3, 2)
    for w in all_words(2, 5, 1):
        assert qfock.trace_word(w, p) == pytest.approx(qfock.trace_word(w[1:] + w[:1], p), abs=1e-13)


def test_moment_table_shape():
    rows = qfock.moment_table(2, 2, QParams(0.0, 2))
    assert len(rows) == 7
