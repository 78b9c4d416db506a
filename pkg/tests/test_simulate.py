import math

import numpy as np
import pytest

from qfree import simulate
from qfree.ncalg import NCPolynomial, Tensor2Series
from qfree.simulate import (MatrixEnsemble, NonFiniteError, NormGuardError, SDEConfig,
                            brownian_increment, evaluate_on_matrices, ntrace, ou_config,
                            run_sde, semicircular_ensemble, trajectory_rng)


def test_brownian_increment_zero_dt():
    assert np.all(brownian_increment(10, 0.0, np.random.default_rng(0)) == 0)


def test_brownian_increment_variance():
    rng = np.random.default_rng(123)
    vals = [float(np.real(ntrace(g @ g))) for g in (brownian_increment(100, 0.01, rng) for _ in range(200))]
    assert abs(np.mean(vals) - 0.01) <= 0.002


def test_brownian_increment_hermitian():
    g = brownian_increment(50, 0.1, np.random.default_rng(1))
    assert np.max(np.abs(g - g.conj().T)) <= 1e-15


def test_semicircular_ensemble_moments():
    ens = semicircular_ensemble(1, 400, np.random.default_rng(5))
    x = ens.matrices[0]
    assert float(np.real(ntrace(x @ x))) == pytest.approx(1, abs=0.02)
    assert float(np.real(ntrace(x @ x @ x @ x))) == pytest.approx(2, abs=0.08)


def test_evaluate_examples():
    rng = np.random.default_rng(2)
    ens = semicircular_ensemble(2, 8, rng)
    assert np.allclose(evaluate_on_matrices(NCPolynomial.variable(2, 0), ens), ens.matrices[0])
    w = rng.standard_normal((8, 8))
    assert np.allclose(evaluate_on_matrices(Tensor2Series.one(2), ens, w), w)
    d1, d2 = np.diag(rng.standard_normal(8)), np.diag(rng.standard_normal(8))
    diag = MatrixEnsemble([d1, d2])
    got = evaluate_on_matrices(NCPolynomial.monomial(2, (0, 1)), diag)
    assert np.allclose(np.diag(got), np.diag(d1) * np.diag(d2))


def test_tensor_evaluation_needs_w():
    ens = semicircular_ensemble(1, 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        evaluate_on_matrices(Tensor2Series.one(1), ens)


def test_seed_policy_is_deterministic_and_independent():
    a = trajectory_rng(7, 0).standard_normal(4)
    assert np.array_equal(a, trajectory_rng(7, 0).standard_normal(4))
    assert not np.array_equal(a, trajectory_rng(7, 1).standard_normal(4))


def test_run_sde_reproducible_and_hermitian():
    cfg = ou_config(2, dt=0.01, T=0.05, K=20, seed=4)
    a, b = run_sde(cfg), run_sde(cfg)
    assert a.moments == b.moments
    assert a.max_hermiticity_residual <= 1e-15
    assert a.final.hermiticity_residual() == 0


def test_norm_guard_trips():
    cfg = ou_config(1, dt=0.01, T=0.05, K=20, seed=0, norm_guard=0.5)
    with pytest.raises(NormGuardError):
        run_sde(cfg)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_detected():
    xi = [NCPolynomial.monomial(1, (0, 0, 0), -1e300)]
    cfg = SDEConfig([[Tensor2Series.one(1)]], xi, dt=1.0, T=3.0, K=4, seed=0)
    with pytest.raises(NonFiniteError):
        run_sde(cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ou_config(1, dt=0.0, T=1.0, K=10)
    with pytest.raises(ValueError):
        ou_config(1, dt=0.1, T=1.0, K=1)


def test_ou_second_moment_stationary():
    cfg = ou_config(1, dt=1e-3, T=0.5, K=100, seed=11, moment_degree=2)
    out = simulate.moment_drift(cfg, [11, 12])
    assert out["mean_drift"][(0, 0)] <= 0.05


def test_coupling_slope_small():
    cfg = ou_config(1, dt=1e-3, T=0.1, K=60, seed=3)
    res = simulate.coupling_experiment(cfg, np.logspace(-2, -1, 5))
    assert res.slope >= 0.9


def test_step_size_study_converges():
    cfg = ou_config(1, dt=1e-3, T=0.064, K=40, seed=5)
    out = simulate.step_size_study(cfg, (1, 2, 4, 8))
    assert out["errors"][0] < out["errors"][-1]
    assert out["slope"] >= 0.5


def test_rotation_flow_and_remainder():
    rng = np.random.default_rng(8)
    x = semicircular_ensemble(2, 30, rng).matrices
    s = semicircular_ensemble(2, 30, rng).matrices
    ax, as_ = simulate.rotation_flow(math.pi / 2, x, s)
    assert np.allclose(ax[0], s[0]) and np.allclose(as_[0], -x[0])
    for t in (0.0, 0.01, 0.1, 0.3):
        for lhs, bound in simulate.rotation_remainder(t, x, s):
            assert lhs <= bound + 1e-15


def test_rotation_preserves_norm_of_pair():
    rng = np.random.default_rng(9)
    x = semicircular_ensemble(1, 20, rng).matrices
    s = semicircular_ensemble(1, 20, rng).matrices
    ax, as_ = simulate.rotation_flow(0.7, x, s)
    before = simulate.l2_norm(x[0]) ** 2 + simulate.l2_norm(s[0]) ** 2
    after = simulate.l2_norm(ax[0]) ** 2 + simulate.l2_norm(as_[0]) ** 2
    assert after == pytest.approx(before, rel=1e-12)
