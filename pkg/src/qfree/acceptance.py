"""Acceptance criteria shared by the test suite and ``qfree verify-all``."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import dimension, qfock, simulate, wick
from .deriv import (adjoint_verify, difference_quotient, fisher_and_wasserstein_const,
                    q_semicircular_spec)
from .generator import (cauchy_bound, from_derivation, iterate_generator, iterated_bound,
                        majorant_generator, simple_majorant_generator, stationarity_residual,
                        stationarity_time)
from .ncalg import NCPolynomial, Tensor2Series, all_words, coefficient_majorant
from .qfock import FockTrace, QParams


@dataclass
class CriterionResult:
    cid: str
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    expected_failure: bool = False

    def line(self) -> str:
        tag = "XFAIL" if self.expected_failure else ("PASS" if self.passed else "FAIL")
        body = ", ".join(f"{k}={_short(v)}" for k, v in self.details.items())
        return f"[{tag}] criterion {self.cid} {self.name}: {body} ({self.seconds:.1f}s)"


def _short(v):
    if isinstance(v, float):
        return f"{v:.3e}" if v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e4) else f"{v:.6g}"
    return str(v)


def _timed(fn):
    def run(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


Q_GRID_MOMENTS = (0.0, 0.1, -0.1, 0.5, -0.5)


@_timed
def criterion_1() -> CriterionResult:
    """trace_word = moment_oracle on all words of length ≤ 8, N ≤ 3; Catalan at q=0."""
    worst = 0.0
    count = 0
    for q in Q_GRID_MOMENTS:
        for N in (1, 2, 3):
            p = QParams(q, N)
            for w in all_words(N, 8):
                worst = max(worst, abs(qfock.trace_word(w, p) - qfock.moment_oracle(w, p)))
                count += 1
    catalan_ok = all(
        qfock.trace_word((0,) * (2 * n), QParams(0.0, 1)) == qfock.catalan(n)
        and qfock.moment_oracle((0,) * (2 * n), QParams(0.0, 1)) == qfock.catalan(n)
        for n in range(1, 7))
    return CriterionResult("1", "Fock trace vs pair-partition oracle",
                           worst <= 1e-12 and catalan_ok,
                           {"words": count, "max_abs_diff": worst, "catalan_exact": catalan_ok})


Q_GRID_GRAM = (0.02, 0.1, 0.3)


@_timed
def criterion_2() -> CriterionResult:
    """gram(brute) = gram(recursive) and λ_min ≥ theta bound for n ≤ 5, N ≤ 3."""
    worst, margin = 0.0, math.inf
    for q in Q_GRID_GRAM:
        for N in (1, 2, 3):
            p = QParams(q, N)
            for n in range(1, 6):
                b, r = wick.gram(n, p, "brute"), wick.gram(n, p, "recursive")
                worst = max(worst, float(np.max(np.abs(b - r))))
                lam = float(np.linalg.eigvalsh(r)[0])
                margin = min(margin, lam - wick.min_eig_bound(n, p, "theta"))
    return CriterionResult("2", "Gram recursion and eigenvalue bound",
                           worst <= 1e-12 and margin >= 0,
                           {"max_abs_diff": worst, "min_lambda_minus_bound": margin})


@_timed
def criterion_3() -> CriterionResult:
    """W_w(X)Ω = e_w, Wick coefficient bounds, orthonormal p_i."""
    worst_vec, worst_coef_ratio, worst_norm_ratio, worst_onb = 0.0, 0.0, 0.0, 0.0
    worst_coef_case = None
    for q in (0.02, 0.1, 0.3, -0.3):
        for N in (1, 2, 3):
            p = QParams(q, N)
            for w in all_words(N, 6, 1):
                n = len(w)
                poly = wick.wick_poly(w, p)
                vec = qfock.poly_vector(poly, q)
                target = qfock.FockVector.basis(N, w)
                worst_vec = max(worst_vec, (vec - target).max_abs())
                maj = coefficient_majorant(poly)
                for (k,), c in maj.coeffs.items():
                    bound = (2 / (1 - abs(q))) ** (n - k)
                    if c / bound > worst_coef_ratio:
                        worst_coef_ratio = c / bound
                        worst_coef_case = f"q={q},w={''.join(str(x + 1) for x in w)},k={k}"
                nrm = float(qfock.norm_sq(vec, q))
                worst_norm_ratio = max(worst_norm_ratio, nrm / (2 / (1 - abs(q))) ** n)
            top = 6 if N <= 2 else 4
            for n in range(1, top + 1):
                polys = wick.onb_polys(n, p)
                vecs = [qfock.poly_vector(x, q).padded(n) for x in polys]
                batch = qfock.FockVector(N, [np.stack([v.levels[k] for v in vecs]) for k in range(n + 1)])
                g = qfock.inner_matrix(batch, batch, q)
                worst_onb = max(worst_onb, float(np.max(np.abs(g - np.eye(len(polys))))))
    ok = worst_vec <= 1e-12 and worst_coef_ratio <= 1 and worst_norm_ratio <= 1 and worst_onb <= 1e-9
    return CriterionResult("3", "Wick polynomials and orthonormal bases", ok,
                           {"max_vector_err": worst_vec, "max_coef_over_bound": worst_coef_ratio,
                            "worst_coef_case": worst_coef_case,
                            "max_norm_over_bound": worst_norm_ratio, "max_onb_err": worst_onb})


@_timed
def criterion_4() -> CriterionResult:
    """Ξ at D=8, N=2, q=0.02 acts as q^n on level n ≤ 6; threshold(2) = 1/34."""
    p = QParams(0.02, 2)
    xi = wick.xi_expansion(p, 8)
    rng = np.random.default_rng(4)
    worst = 0.0
    for n in range(7):
        levels = [np.zeros((3, 2 ** k)) for k in range(9)]
        levels[n] = rng.standard_normal((3, 2 ** n))
        v = qfock.FockVector(2, levels)
        out = xi.kernel_apply(v)
        diff = out - v.scale(p.q ** n)
        worst = max(worst, diff.max_abs() / max(v.max_abs(), 1e-300))
    thr = wick.q_threshold(2)
    thr_ok = thr == Fraction(1, 34) and math.floor(float(thr) * 1000) / 1000 == 0.029
    declared = xi.operator_tail
    ok = worst <= declared + 1e-14 and declared <= 1e-9 and thr_ok
    return CriterionResult("4", "Ξ level projector and threshold", ok,
                           {"max_rel_err": worst, "declared_tail": declared,
                            "rho_norm_tail": xi.tail_bound, "threshold": str(thr)})


@_timed
def criterion_5() -> CriterionResult:
    """<X_j, p> = <Z_j, ∂_j p> at q ∈ {0, 0.02}, D = 8, words up to length 6."""
    worst = 0.0
    for q in (0.0, 0.02):
        spec = q_semicircular_spec(QParams(q, 2), 8)
        for j in range(2):
            eta = [Tensor2Series.one(2) if i == j else Tensor2Series(2) for i in range(2)]
            for w in all_words(2, 6):
                chk = adjoint_verify(spec, eta, NCPolynomial.monomial(2, w))
                worst = max(worst, chk.residual)
    return CriterionResult("5", "conjugate identity ∂*(Z_j) = X_j", worst <= 1e-10,
                           {"max_residual": worst})


def _majorant_domination(q: float, N: int, D: int, variant: str) -> float:
    p = QParams(q, N)
    spec = difference_quotient(N, FockTrace(p)) if q == 0 else q_semicircular_spec(p, D)
    gen = from_derivation(spec, variant)
    mg = majorant_generator(gen)
    worst = 0.0
    for w in all_words(N, 4):
        f = NCPolynomial.monomial(N, w)
        phi = coefficient_majorant(f)
        fn = f
        for n in range(1, 4):
            fn = iterate_generator(gen, fn, 1)
            lhs = abs(fn.evaluate(gen.trace))
            rhs = iterated_bound(mg, phi, n)
            worst = max(worst, lhs / rhs if rhs > 0 else (math.inf if lhs > 1e-12 else 0.0))
    return worst


@_timed
def criterion_6() -> CriterionResult:
    """Stationarity of the Itô generator, literal-drift discrepancy, majorant domination."""
    p0 = QParams(0.0, 2)
    g0 = from_derivation(difference_quotient(2, FockTrace(p0)))
    r0 = stationarity_residual(g0, 6).max_residual
    r_lit = stationarity_residual(g0.with_variant("literal"), 6).max_residual
    gq = from_derivation(q_semicircular_spec(QParams(0.02, 2), 8))
    rq = stationarity_residual(gq, 6).max_residual
    dom = max(_majorant_domination(0.0, 2, 0, v) for v in ("ito", "literal"))
    dom = max(dom, *(_majorant_domination(0.02, N, D, v)
                     for N, D in ((1, 2), (2, 1)) for v in ("ito", "literal")))
    ok = r0 <= 1e-12 and rq <= 1e-6 and r_lit >= 0.5 and dom <= 1
    return CriterionResult("6", "stationarity certificate", ok,
                           {"ito_q0": r0, "ito_q0.02_D8": rq, "literal_q0": r_lit,
                            "max_ratio_to_majorant": dom})


@_timed
def criterion_7() -> CriterionResult:
    """t₀ = 1/3 for α₁ = 1, α₂ = z/2, R₀ = 2, ρ = 3; Cauchy bound monotone in n."""
    mg = simple_majorant_generator({0: 1}, {1: Fraction(1, 2)}, N=1, R0=2.0, rho=3.0)
    t0 = stationarity_time(mg)
    phi = coefficient_majorant(NCPolynomial.monomial(1, (0, 0)))
    bounds = [cauchy_bound(mg, phi, n) for n in range(13)]
    mono = all(a <= b for a, b in zip(bounds, bounds[1:]))
    return CriterionResult("7", "stationarity time", t0 == 1 / 3 and mono,
                           {"t0": t0, "K": mg.K, "cauchy_monotone": mono})


@_timed
def criterion_8(seeds=range(8)) -> CriterionResult:
    """OU surrogate at K=150, Δt=1e-3, T=1: max degree ≤ 4 moment drift ≤ 0.05."""
    cfg = simulate.ou_config(2, dt=1e-3, T=1.0, K=150, seed=2024)
    out = simulate.moment_drift(cfg, [2024 + s for s in seeds])
    return CriterionResult("8", "SDE stationarity surrogate", out["max_mean_drift"] <= 0.05,
                           {"max_mean_drift": out["max_mean_drift"],
                            "worst_word": "".join(str(x + 1) for x in out["worst_word"]),
                            "max_single_seed_drift": out["max_per_seed_drift"]})


@_timed
def criterion_9() -> CriterionResult:
    """Coupling distance grows like t on [1e-3, 1e-1]; rotation Taylor bound for t ≤ 0.3."""
    cfg = simulate.ou_config(2, dt=1e-4, T=0.1, K=150, seed=7)
    res = simulate.coupling_experiment(cfg, np.logspace(-3, -1, 9))
    rng = simulate.trajectory_rng(9)
    x = simulate.semicircular_ensemble(2, 150, rng).matrices
    s = simulate.semicircular_ensemble(2, 150, rng).matrices
    rot_ok = True
    worst = 0.0
    for t in np.linspace(0.0, 0.3, 31):
        for lhs, bound in simulate.rotation_remainder(float(t), x, s):
            rot_ok &= lhs <= bound + 1e-15
            if bound > 0:
                worst = max(worst, lhs / bound)
    return CriterionResult("9", "coupling scaling and rotation bound", res.slope >= 0.9 and rot_ok,
                           {"slope": res.slope, "rotation_bound_holds": rot_ok,
                            "max_remainder_over_bound": worst})


@_timed
def criterion_10() -> CriterionResult:
    """Closed-form δ₀ bound numbers and the proven-range flag."""
    exact = all(dimension.delta0_lower_bound(0, N) == N for N in range(1, 6))
    val = dimension.delta0_lower_bound(0.02, 2)
    rep = dimension.report(0.1, 2)
    ok = exact and abs(val - 1.99840) <= 1e-5 and wick.q_threshold(2) == Fraction(1, 34) \
        and rep.status == dimension.OUTSIDE and rep.eta_bound is None
    return CriterionResult("10", "dimension numbers", ok,
                           {"eta(0.02,2)": val, "q=0 exact": exact, "q=0.1 status": rep.status})


@_timed
def criterion_11() -> CriterionResult:
    """q=0 difference quotient: Φ* = N and C = ½√N."""
    rows = {}
    ok = True
    for N in (1, 2, 3):
        spec = difference_quotient(N, FockTrace(QParams(0.0, N)))
        rep = fisher_and_wasserstein_const(spec)
        good = rep.phi_star == N and abs(rep.C - 0.5 * math.sqrt(N)) <= 1e-15
        ok &= good
        rows[f"N={N}"] = f"Φ*={rep.phi_star:g},C={rep.C:.12g}"
    return CriterionResult("11", "Fisher information and Wasserstein constant", ok, rows)


@_timed
def literal_drift_expected_failure() -> CriterionResult:
    """The literal drift is not stationary at q=0; recorded as an expected failure."""
    g = from_derivation(difference_quotient(1, FockTrace(QParams(0.0, 1))), "literal")
    r = stationarity_residual(g, 2).max_residual
    return CriterionResult("6-literal", "literal drift stationarity", r <= 1e-12,
                           {"residual": r}, expected_failure=True)


CRITERIA = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4,
    "5": criterion_5, "6": criterion_6, "7": criterion_7, "8": criterion_8,
    "9": criterion_9, "10": criterion_10, "11": criterion_11,
}


def run(ids=None, include_literal: bool = False) -> list[CriterionResult]:
    ids = list(CRITERIA) if ids is None else list(ids)
    out = [CRITERIA[i]() for i in ids]
    if include_literal:
        out.append(literal_drift_expected_failure())
    return out
