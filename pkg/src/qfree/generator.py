"""Free Itô generator, its majorant, Cauchy-type bounds and stationarity checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qfock
from .deriv import ConjugateSet, DerivationSpec, conjugate_from_zeta, fock_vector
from .ncalg import (MajorantSeries, NCPolynomial, Tensor2Series, all_words,
                    coefficient_majorant, contract, first_quotient, hash_in, hash_out,
                    partial_trace_right, second_quotient)
from .qfock import FockTrace

DRIFT_VARIANTS = ("ito", "literal")


@dataclass
class GeneratorSpec:
    """L f = (1⊗τ)(Σ_ijk Ψ_jk #_in (Ψ_ki #_out D_ij f)) + drift.

    ``psi[i][k]`` multiplies dS_k in dX_i. The drift is −½Σ_j ξ_j f for
    ``literal`` and −½Σ_j Σ a ξ_j b over ∂_j f = Σ a⊗b for ``ito``.
    """

    N: int
    psi: list
    xi: list
    trace: object
    drift_variant: str = "ito"
    R0: float = 2.0
    dense: dict | None = None
    words: list | None = None

    def __post_init__(self):
        if self.drift_variant not in DRIFT_VARIANTS:
            raise ValueError(f"drift_variant must be one of {DRIFT_VARIANTS}")

    def with_variant(self, variant: str) -> "GeneratorSpec":
        return GeneratorSpec(self.N, self.psi, self.xi, self.trace, variant, self.R0,
                             self.dense, self.words)


def from_derivation(spec: DerivationSpec, drift_variant: str = "ito",
                    conj: ConjugateSet | None = None) -> GeneratorSpec:
    """Ψ_ik = ∂_k(X_i) and ξ_j = ∂*∂(X_j)."""
    N = spec.N
    if conj is None:
        conj = conjugate_from_zeta(spec)
    psi = [[spec.values[k][i] for k in range(N)] for i in range(N)]
    dense = {(i, k): m for (k, i), m in spec.dense.items()} if spec.dense else None
    params = spec.params
    R0 = 2.0 / (1.0 - abs(params.q)) if params is not None else 2.0
    return GeneratorSpec(N, psi, conj.xi, spec.trace, drift_variant, R0, dense, spec.words)


def _xi_poly(x) -> NCPolynomial:
    return x if isinstance(x, NCPolynomial) else x.to_polynomial()


def second_order(spec: GeneratorSpec, f: NCPolynomial) -> NCPolynomial:
    N = spec.N
    total = NCPolynomial(N)
    for i in range(N):
        for j in range(N):
            dij = second_quotient(f, i, j)
            if not dij.terms:
                continue
            for k in range(N):
                a, b = spec.psi[j][k], spec.psi[k][i]
                if not a.terms or not b.terms:
                    continue
                total = total + partial_trace_right(hash_in(a, hash_out(b, dij)), spec.trace)
    return total


def drift(spec: GeneratorSpec, f: NCPolynomial) -> NCPolynomial:
    total = NCPolynomial(spec.N)
    for j in range(spec.N):
        xj = _xi_poly(spec.xi[j])
        if spec.drift_variant == "literal":
            total = total + xj * f
        else:
            total = total + contract(first_quotient(f, j), xj)
    return total.scale(-0.5)


def apply_generator(spec: GeneratorSpec, f: NCPolynomial) -> NCPolynomial:
    return second_order(spec, f) + drift(spec, f)


def iterate_generator(spec: GeneratorSpec, f: NCPolynomial, n: int) -> NCPolynomial:
    for _ in range(n):
        f = apply_generator(spec, f)
    return f


# ---------------------------------------------------------------------------
# trace-level evaluation with dense coefficient matrices

class TraceGenerator:
    """τ(L X_w) from trace tables: Σ Tr(Ψ_ki · T_P · Ψ_jk · T_Q) over D_ij X_w = Σ P⊗Q."""

    def __init__(self, spec: GeneratorSpec):
        if spec.dense is None or spec.words is None or not isinstance(spec.trace, FockTrace):
            raise ValueError("trace route needs dense Ψ matrices and a Fock trace")
        self.spec = spec
        self._tables: dict = {}
        self._xi_vecs = [fock_vector(x, spec.trace) for x in spec.xi]

    def table(self, mid) -> np.ndarray:
        """T[B, C] = τ(B · mid · C) over the word basis."""
        t = self._tables.get(mid)
        if t is None:
            w = self.spec.words
            t = self.spec.trace.table(w, w, mid)
            self._tables[mid] = t
        return t

    def second_order_trace(self, word) -> float:
        spec, N = self.spec, self.spec.N
        f = NCPolynomial.monomial(N, word)
        total = 0.0
        for i in range(N):
            for j in range(N):
                dij = second_quotient(f, i, j)
                for k in range(N):
                    a, b = spec.dense.get((j, k)), spec.dense.get((k, i))
                    if a is None or b is None:
                        continue
                    for (p, q), c in dij.terms.items():
                        total += c * float(np.sum((b @ self.table(p)) * (a @ self.table(q)).T))
        return total

    def drift_trace(self, word) -> float:
        """Drift contribution via <ξ_j Ω, Y* Ω> = τ(ξ_j Y)."""
        spec, N = self.spec, self.spec.N
        tr = spec.trace
        q = tr.params.q
        total = 0.0
        for j in range(N):
            if spec.drift_variant == "literal":
                ys = {tuple(word): 1}
            else:
                ys = {}
                for (a, b), c in first_quotient(NCPolynomial.monomial(N, word), j).terms.items():
                    ys[b + a] = ys.get(b + a, 0) + c
            for y, c in ys.items():
                total += c * float(qfock.inner(self._xi_vecs[j], tr._word_vector(y[::-1]), q))
        return -0.5 * total

    def trace_L(self, word) -> float:
        return self.second_order_trace(word) + self.drift_trace(word)


@dataclass
class StationarityReport:
    residuals: dict
    max_residual: float
    worst_word: tuple


def stationarity_residual(spec: GeneratorSpec, degree: int, route: str = "auto") -> StationarityReport:
    """max |τ(L X_w)| over all words with |w| ≤ degree."""
    if route == "auto":
        route = "trace" if spec.dense is not None and isinstance(spec.trace, FockTrace) else "poly"
    res = {}
    if route == "trace":
        tg = TraceGenerator(spec)
        for w in all_words(spec.N, degree):
            res[w] = tg.trace_L(w)
    elif route == "poly":
        for w in all_words(spec.N, degree):
            lf = apply_generator(spec, NCPolynomial.monomial(spec.N, w))
            res[w] = float(np.real(lf.evaluate(spec.trace)))
    else:
        raise ValueError(f"unknown route {route!r}")
    worst = max(res, key=lambda w: abs(res[w]))
    return StationarityReport(res, abs(res[worst]), worst)


# ---------------------------------------------------------------------------
# majorant generator

class DivergentMajorantError(ValueError):
    pass


@dataclass
class MajorantGenerator:
    """L̂φ = α₁ φ'' + α₂ φ."""

    alpha1: MajorantSeries
    alpha2: MajorantSeries
    N: int
    R0: float
    rho: float | None = None

    @property
    def eval_point(self) -> float:
        return self.N * self.R0

    @property
    def K(self) -> float:
        self._check_rho()
        k = max(self.alpha1(self.rho), self.alpha2(self.rho))
        if not math.isfinite(k):
            raise DivergentMajorantError("α diverges on |z| = ρ")
        return k

    def _check_rho(self):
        if self.rho is None:
            raise ValueError("ρ is not set")
        if self.rho <= self.R0:
            raise ValueError(f"ρ = {self.rho} must exceed R₀ = {self.R0}")

    def C(self, phi: MajorantSeries) -> float:
        """sup_{|z|=ρ} |φ| / (2π(ρ − R₀))."""
        self._check_rho()
        return phi(self.rho) / (2 * math.pi * (self.rho - self.R0))


def majorant_generator(spec: GeneratorSpec, rho: float | None = None) -> MajorantGenerator:
    """α₁ = Σ_ijk φ_Ψjk(z, NR₀) φ_Ψki(NR₀, z), α₂ = ½ Σ_j φ_ξj(z)."""
    N, x0 = spec.N, spec.N * spec.R0
    alpha1 = MajorantSeries(1)
    for i in range(N):
        for j in range(N):
            for k in range(N):
                a, b = spec.psi[j][k], spec.psi[k][i]
                if not a.terms or not b.terms:
                    continue
                fa = coefficient_majorant(a).specialize(1, x0)
                fb = coefficient_majorant(b).specialize(0, x0)
                alpha1 = alpha1 + fa * fb
    alpha2 = MajorantSeries(1)
    for x in spec.xi:
        alpha2 = alpha2 + coefficient_majorant(_xi_poly(x))
    return MajorantGenerator(alpha1, alpha2.scale(0.5), N, spec.R0, rho)


def simple_majorant_generator(alpha1: dict, alpha2: dict, N: int, R0: float,
                              rho: float | None = None) -> MajorantGenerator:
    return MajorantGenerator(MajorantSeries(1, alpha1), MajorantSeries(1, alpha2), N, R0, rho)


def majorant_apply(mg: MajorantGenerator, phi: MajorantSeries) -> MajorantSeries:
    return mg.alpha1 * phi.derivative().derivative() + mg.alpha2 * phi


def iterated_bound(mg: MajorantGenerator, phi: MajorantSeries, n: int,
                   at: float | None = None) -> float:
    """L̂ⁿφ evaluated at NR₀ (or ``at``)."""
    for _ in range(n):
        phi = majorant_apply(mg, phi)
    return phi(mg.eval_point if at is None else at)


def cauchy_bound(mg: MajorantGenerator, phi: MajorantSeries, n: int) -> float:
    """C · n! · (2K/(ρ − R₀))ⁿ."""
    return mg.C(phi) * math.factorial(n) * (2 * mg.K / (mg.rho - mg.R0)) ** n


def stationarity_time(mg: MajorantGenerator) -> float:
    """(ρ − R₀)/(2K)."""
    return (mg.rho - mg.R0) / (2 * mg.K)
