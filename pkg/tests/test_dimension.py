from fractions import Fraction

import pytest

from qfree import dimension
from qfree.dimension import OUTSIDE, delta0_lower_bound, is_monotone_toward_N, limit_check, report


def test_delta0_examples():
    for N in range(1, 6):
        assert delta0_lower_bound(0, N) == N
    assert delta0_lower_bound(0.02, 2) == pytest.approx(1.99840, abs=1e-5)
    assert delta0_lower_bound(Fraction(1, 34), 2) == 2 * (1 - Fraction(2, 34 ** 2) / (1 - Fraction(2, 34 ** 2)))
    assert float(delta0_lower_bound(Fraction(1, 34), 2)) == pytest.approx(1.99654, abs=1e-5)


def test_delta0_domain():
    with pytest.raises(ValueError):
        delta0_lower_bound(0.8, 2)


def test_report_examples():
    r = report(0.02, 2)
    assert r.in_range and r.exceeds_one
    assert r.eta_bound == pytest.approx(1.99840, abs=1e-5)
    assert r.notes == list(dimension.CONSEQUENCES)
    out = report(0.1, 2)
    assert out.status == OUTSIDE and out.eta_bound is None and out.notes == []
    assert report(0, 3).eta_bound == 3


def test_report_invariants():
    for q in (0.0, 0.001, 0.01, 0.02, 0.029):
        r = report(q, 2)
        assert 0 <= r.eta_bound <= 2
        assert r.exceeds_one == (r.eta_bound > 1)


def test_limit_check():
    rows = limit_check(2, [0.001, 0.02, 0.01])
    assert [r.q for r in rows] == [0.02, 0.01, 0.001]
    assert is_monotone_toward_N(rows)
    assert len(limit_check(2, [0.01])) == 1
    assert limit_check(3, [0.005])[0].in_range


def test_limit_check_outside_range_is_not_monotone():
    assert not is_monotone_toward_N(limit_check(2, [0.1, 0.01]))
