"""Derivations valued in the tensor square, their adjoints, conjugate variables
and the Fisher/Wasserstein constants.

A derivation is fixed by ``values[j][i] = ∂_j(X_i)`` and extended by the
Leibniz rule ∂_j(ab) = ∂_j(a)·b + a·∂_j(b) for the bimodule action
f·(A⊗B)·g = fA⊗Bg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from . import qfock
from .ncalg import (EMPTY, NCPolynomial, Tensor2Series, Tensor3Series, Word, all_words,
                    contract, contract_middle, first_leg_quotient, hash_in1, hash_in2,
                    partial_trace_left, partial_trace_right, second_leg_quotient)
from .qfock import FockTrace, QParams
from .wick import XiExpansion, xi_expansion

CONVENTIONS = ("adjoint", "literal")


@dataclass
class DerivationSpec:
    """∂_j(X_i) = values[j][i]; ``zeta[j]`` = ∂_j*(1⊗1).

    ``dense`` optionally maps (j, i) to a coefficient matrix over ``words``
    for the same tensor, enabling the matrix route for large series.
    """

    N: int
    values: list
    trace: Callable[[Word], float]
    zeta: list | None = None
    words: list | None = None
    dense: dict = field(default_factory=dict)
    xi: XiExpansion | None = None

    def __post_init__(self):
        if len(self.values) != self.N or any(len(row) != self.N for row in self.values):
            raise ValueError("values must be an N×N array of tensor series")
        if self.zeta is not None and len(self.zeta) != self.N:
            raise ValueError("zeta must have N entries")

    def value(self, j: int, i: int) -> Tensor2Series:
        return self.values[j][i]

    @property
    def params(self) -> QParams | None:
        return getattr(self.trace, "params", None)


def zero_derivation(N: int, trace) -> DerivationSpec:
    zero = Tensor2Series(N)
    return DerivationSpec(N, [[zero] * N for _ in range(N)], trace,
                          zeta=[NCPolynomial(N) for _ in range(N)],
                          words=[EMPTY], dense={})


def difference_quotient(N: int, trace, zeta: Sequence[NCPolynomial] | None = None) -> DerivationSpec:
    """∂_j(X_i) = δ_ij 1⊗1. ``zeta`` defaults to X_j, the semicircular value."""
    one, zero = Tensor2Series.one(N), Tensor2Series(N)
    values = [[one if i == j else zero for i in range(N)] for j in range(N)]
    if zeta is None:
        zeta = [NCPolynomial.variable(N, j) for j in range(N)]
    dense = {(j, j): np.ones((1, 1)) for j in range(N)}
    return DerivationSpec(N, values, trace, list(zeta), [EMPTY], dense)


def q_semicircular_spec(params: QParams, D: int, legs: str = "adjoint") -> DerivationSpec:
    """∂_j(X_i) = δ_ij Ξ with Ξ truncated at level D and ζ_j = X_j."""
    xi = xi_expansion(params, D, legs)
    N = params.N
    terms = xi.terms
    zero = Tensor2Series(N)
    values = [[terms if i == j else zero for i in range(N)] for j in range(N)]
    zeta = [NCPolynomial.variable(N, j) for j in range(N)]
    dense = {(j, j): xi.coef for j in range(N)}
    return DerivationSpec(N, values, FockTrace(params), zeta, xi.words, dense, xi)


# ---------------------------------------------------------------------------
# derivation and adjoint on polynomials

def apply_derivation(spec: DerivationSpec, j: int, f: NCPolynomial) -> Tensor2Series:
    """Leibniz extension: X_w ↦ Σ_p X_{w<p} · ∂_j(X_{w_p}) · X_{w>p}."""
    acc: dict = {}
    for w, c in f.terms.items():
        for p, x in enumerate(w):
            val = spec.values[j][x]
            if not val.terms:
                continue
            left, right = w[:p], w[p + 1:]
            for (a, b), cv in val.terms.items():
                key = (left + a, b + right)
                acc[key] = acc.get(key, 0) + c * cv
    return Tensor2Series._make(f.N, acc, f.degree_cap)


def _signs(convention: str) -> int:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    return -1 if convention == "adjoint" else 1


def _require_zeta(spec):
    if spec.zeta is None:
        raise ValueError("derivation spec has no zeta = ∂*(1⊗1)")


def adjoint_elementary(spec: DerivationSpec, a: NCPolynomial, b: NCPolynomial, j: int,
                       convention: str = "adjoint") -> NCPolynomial:
    """∂_j*(a⊗b) = aζ_j b − (1⊗τ)(∂_j a)·b − a·(τ⊗1)(∂_j b).

    ``convention="literal"`` uses plus signs on both trace terms.
    """
    _require_zeta(spec)
    sign = _signs(convention)
    out = a * spec.zeta[j] * b
    t1 = partial_trace_right(apply_derivation(spec, j, a), spec.trace) * b
    t2 = a * partial_trace_left(apply_derivation(spec, j, b), spec.trace)
    return out + t1.scale(sign) + t2.scale(sign)


def adjoint(spec: DerivationSpec, j: int, eta: Tensor2Series, route: str = "tensor3",
            convention: str = "adjoint") -> NCPolynomial:
    """∂_j*(η) for a finite tensor series η.

    ``tensor3``: m_ζ(η) − M(Σ_s Ψ_js #_in1 D₁^(s) η) − M(Σ_s Ψ_js #_in2 D₂^(s) η)
    with M the middle-leg trace contraction.
    ``elementary``: termwise ``adjoint_elementary`` on the monomial pairs.
    """
    _require_zeta(spec)
    sign = _signs(convention)
    N = spec.N
    if route == "elementary":
        out = NCPolynomial(N)
        for (a, b), c in eta.terms.items():
            term = adjoint_elementary(spec, NCPolynomial.monomial(N, a),
                                      NCPolynomial.monomial(N, b), j, convention)
            out = out + term.scale(c)
        return out
    if route != "tensor3":
        raise ValueError(f"unknown route {route!r}")
    out = contract(eta, spec.zeta[j])
    for s in range(N):
        psi = spec.values[j][s]
        if not psi.terms:
            continue
        t1 = contract_middle(hash_in1(psi, first_leg_quotient(eta, s)), spec.trace)
        t2 = contract_middle(hash_in2(psi, second_leg_quotient(eta, s)), spec.trace)
        out = out + t1.scale(sign) + t2.scale(sign)
    return out


# ---------------------------------------------------------------------------
# concatenation forms: Σ M[a, b] · L_a · mid · R_b

def _word_offsets(N: int, max_len: int) -> np.ndarray:
    return np.concatenate([[0], np.cumsum([N ** k for k in range(max_len + 1)])])


def _encode(words, N: int):
    lens = np.array([len(w) for w in words], dtype=np.int64)
    vals = np.array([qfock.word_index(w, N) for w in words], dtype=np.int64)
    return lens, vals


def _decode(ids, N: int, offsets) -> list:
    out = []
    for gid in ids:
        n = int(np.searchsorted(offsets, gid, side="right") - 1)
        val = int(gid - offsets[n])
        digits = []
        for _ in range(n):
            val, r = divmod(val, N)
            digits.append(r)
        out.append(tuple(reversed(digits)))
    return out


@dataclass
class ConcatForm:
    """Polynomial Σ_{a,b} M[a, b] · X_{lefts[a]} · mid · X_{rights[b]}."""

    N: int
    M: np.ndarray
    lefts: list
    rights: list
    mid: NCPolynomial

    def scale(self, s) -> "ConcatForm":
        return ConcatForm(self.N, s * self.M, self.lefts, self.rights, self.mid)

    def to_polynomial(self, atol: float = 0.0) -> NCPolynomial:
        acc: dict = {}
        rows, cols = np.nonzero(np.abs(self.M) > atol)
        for a, b in zip(rows.tolist(), cols.tolist()):
            c = self.M[a, b]
            la, rb = self.lefts[a], self.rights[b]
            for wm, cm in self.mid.terms.items():
                k = la + wm + rb
                acc[k] = acc.get(k, 0) + c * cm
        return NCPolynomial(self.N, acc)

    def fock_vector(self, trace: FockTrace) -> qfock.FockVector:
        """Evaluate on Ω without expanding: Horner over the left words."""
        q = trace.params.q
        rv = trace.word_vectors(self.rights)
        u = qfock.FockVector(self.N, [self.M @ lvl for lvl in rv.levels])
        if self.mid.terms != {EMPTY: 1}:
            u = qfock.apply_poly(self.mid, u, q)
        by_len: dict = {}
        for a, w in enumerate(self.lefts):
            by_len.setdefault(len(w), []).append(a)
        acc: dict = {}
        top = max(by_len, default=0)
        for n in range(top, -1, -1):
            for a in by_len.get(n, []):
                w = self.lefts[a]
                row = qfock.FockVector(self.N, [lvl[a] for lvl in u.levels])
                acc[w] = row if w not in acc else acc[w] + row
            if n == 0:
                break
            for w in [w for w in acc if len(w) == n]:
                v = qfock.apply_generator(w[-1], acc.pop(w), q)
                parent = w[:-1]
                acc[parent] = v if parent not in acc else acc[parent] + v
        return acc.get(EMPTY, qfock.FockVector(self.N, [np.zeros(1)]))


@dataclass
class ConcatSum:
    """Sum of concatenation forms."""

    N: int
    parts: list

    def to_polynomial(self) -> NCPolynomial:
        out = NCPolynomial(self.N)
        for part in self.parts:
            out = out + part.to_polynomial()
        return out

    def fock_vector(self, trace: FockTrace) -> qfock.FockVector:
        vec = None
        for part in self.parts:
            v = part.fock_vector(trace)
            vec = v if vec is None else vec + v
        return vec


def as_polynomial(x) -> NCPolynomial:
    return x if isinstance(x, NCPolynomial) else x.to_polynomial()


def fock_vector(x, trace: FockTrace) -> qfock.FockVector:
    if isinstance(x, NCPolynomial):
        return qfock.poly_vector(x, trace.params.q)
    return x.fock_vector(trace)


NOISE_RTOL = 1e-13


def _denoise(a: np.ndarray) -> np.ndarray:
    """Zero entries that are rounding residue of exact cancellations.

    Contracting a Wick-basis tensor against traces cancels whole blocks of
    monomial coefficients exactly; in floating point they survive at the
    1e-17 level and would inflate the word basis.
    """
    scale = float(np.max(np.abs(a), initial=0.0))
    out = a.copy()
    out[np.abs(out) <= NOISE_RTOL * scale] = 0.0
    return out


def _dense_adjoint(spec: DerivationSpec, j: int, C: np.ndarray, sign: int) -> ConcatSum:
    """∂_j*(Θ) for Θ = Σ C[a, b] W_a ⊗ W_b over ``spec.words`` by matrix products."""
    N, words, trace = spec.N, spec.words, spec.trace
    lens, vals = _encode(words, N)
    max_len = int(lens.max())
    suffixes = all_words(N, max(max_len - 1, 0))
    sidx = {w: k for k, w in enumerate(suffixes)}
    offsets = _word_offsets(N, 2 * max_len)
    parts = [ConcatForm(N, C, words, words, spec.zeta[j])]
    mats = {s: spec.dense[(j, s)] for s in range(N) if (j, s) in spec.dense}
    if not mats:
        return ConcatSum(N, parts)
    # tab_r[V, R] = τ(V R), tab_l[L, U] = τ(L U)
    tab_r = trace.table(words, suffixes)
    tab_l = trace.table(suffixes, words)
    g = {s: _denoise(m @ tab_r) for s, m in mats.items()}
    h = {s: _denoise(tab_l @ m) for s, m in mats.items()}
    nz_rows = np.nonzero(np.any(C != 0, axis=1))[0]
    nz_cols = np.nonzero(np.any(C != 0, axis=0))[0]

    def build(rows, side):
        r_idx, ids, data = [], [], []
        for a in rows:
            w = words[a]
            for p, x in enumerate(w):
                if x not in mats:
                    continue
                left, right = w[:p], w[p + 1:]
                if side == "left":
                    vec = g[x][:, sidx[right]]
                else:
                    vec = h[x][sidx[left], :]
                nz = np.nonzero(vec)[0]
                if not len(nz):
                    continue
                if side == "left":
                    # word left + U
                    plen, pval = len(left), qfock.word_index(left, N)
                    new_len = plen + lens[nz]
                    new_val = pval * N ** lens[nz] + vals[nz]
                else:
                    # word V + right
                    slen, sval = len(right), qfock.word_index(right, N)
                    new_len = lens[nz] + slen
                    new_val = vals[nz] * N ** slen + sval
                r_idx.append(np.full(len(nz), a))
                ids.append(offsets[new_len] + new_val)
                data.append(vec[nz])
        if not ids:
            return None, []
        r_idx, ids, data = map(np.concatenate, (r_idx, ids, data))
        uniq, col = np.unique(ids, return_inverse=True)
        mat = sparse.coo_matrix((data, (r_idx, col)), shape=(len(words), len(uniq))).tocsr()
        return mat, _decode(uniq, N, offsets)

    cm, new_lefts = build(nz_rows, "left")
    if cm is not None:
        parts.append(ConcatForm(N, sign * np.asarray(cm.T @ C), new_lefts, words, NCPolynomial.constant(N)))
    dm, new_rights = build(nz_cols, "right")
    if dm is not None:
        parts.append(ConcatForm(N, sign * np.asarray((sparse.csr_matrix(C) @ dm).todense()),
                                words, new_rights, NCPolynomial.constant(N)))
    return ConcatSum(N, parts)


# ---------------------------------------------------------------------------
# conjugate variables

@dataclass
class ConjugateSet:
    """ξ_j = Σ_i ∂_i*(∂_i(X_j)); entries are polynomials or concatenation sums."""

    N: int
    xi: list
    convention: str
    route: str

    def polynomial(self, j: int) -> NCPolynomial:
        return as_polynomial(self.xi[j])

    def fock_vector(self, j: int, trace: FockTrace) -> qfock.FockVector:
        return fock_vector(self.xi[j], trace)


def conjugate_from_zeta(spec: DerivationSpec, route: str = "auto",
                        convention: str = "adjoint") -> ConjugateSet:
    """Conjugate system ξ_j = ∂*∂(X_j).

    ``route`` is ``tensor3`` or ``elementary`` (sparse series algebra) or
    ``dense`` (matrix products over ``spec.words``); ``auto`` picks ``dense``
    when dense data is present.
    """
    _require_zeta(spec)
    sign = _signs(convention)
    N = spec.N
    if route == "auto":
        route = "dense" if spec.words is not None and spec.dense else "tensor3"
    out = []
    for j in range(N):
        if route == "dense":
            parts = []
            for i in range(N):
                if (i, j) in spec.dense:
                    parts.extend(_dense_adjoint(spec, i, spec.dense[(i, j)], sign).parts)
            out.append(ConcatSum(N, parts))
        else:
            total = NCPolynomial(N)
            for i in range(N):
                val = spec.values[i][j]
                if val.terms:
                    total = total + adjoint(spec, i, val, route, convention)
            out.append(total)
    return ConjugateSet(N, out, convention, route)


# ---------------------------------------------------------------------------
# adjointness check

def _poly_inner(trace, x: NCPolynomial, y: NCPolynomial):
    """<x, y> = τ(y* x)."""
    total = 0
    for wx, cx in x.terms.items():
        for wy, cy in y.terms.items():
            total += cx * np.conj(cy) * trace(wy[::-1] + wx)
    return total


def _pos_inner(spec: DerivationSpec, j: int, s: int, a: Word, b: Word, left: Word, right: Word):
    """<a⊗b, X_left · ∂_j(X_s) · X_right> in L²(τ)⊗L²(τ)."""
    trace = spec.trace
    if (j, s) in spec.dense and isinstance(trace, FockTrace):
        words = spec.words
        # τ((left U)* a) = τ(rev(U) rev(left) a); τ((V right)* b) = τ(rev(V) b rev(right))
        rw = [w[::-1] for w in words]
        t1 = trace.table(rw, [left[::-1] + a])[:, 0]
        t2 = trace.table(rw, [b + right[::-1]])[:, 0]
        return float(t1 @ spec.dense[(j, s)] @ t2)
    total = 0
    for (u, v), c in spec.values[j][s].terms.items():
        total += np.conj(c) * trace((left + u)[::-1] + a) * trace((v + right)[::-1] + b)
    return total


def tensor_pairing(spec: DerivationSpec, eta: Sequence[Tensor2Series], p: NCPolynomial):
    """Σ_j <η_j, ∂_j p> in L²(τ)⊗L²(τ)."""
    total = 0
    for j, ej in enumerate(eta):
        for (a, b), ce in ej.terms.items():
            for w, cp in p.terms.items():
                for pos, s in enumerate(w):
                    if not spec.values[j][s].terms:
                        continue
                    total += ce * np.conj(cp) * _pos_inner(spec, j, s, a, b, w[:pos], w[pos + 1:])
    return total


@dataclass
class AdjointCheck:
    lhs: complex
    rhs: complex
    residual: float
    budget: float


def adjoint_verify(spec: DerivationSpec, eta: Sequence[Tensor2Series], p: NCPolynomial,
                   convention: str = "adjoint", route: str = "tensor3") -> AdjointCheck:
    """Compare <∂*η, p>_τ with <η, ∂p>_{τ⊗τ}.

    ``budget`` bounds the effect of truncating Ξ at level D: every position of
    every monomial contributes at most |q|^(D+1)/(1−|q|)·‖X_left Ω‖·‖X_right Ω‖.
    """
    if len(eta) != spec.N:
        raise ValueError("eta must have N entries")
    star = NCPolynomial(spec.N)
    for j, ej in enumerate(eta):
        if ej.terms:
            star = star + adjoint(spec, j, ej, route, convention)
    lhs = _poly_inner(spec.trace, star, p)
    rhs = tensor_pairing(spec, eta, p)
    budget = 0.0
    if spec.xi is not None and spec.xi.params.q != 0:
        tr = spec.trace
        q = spec.xi.params.q
        eta_norm = sum(math.sqrt(max(_tensor_norm_sq(tr, e), 0.0)) for e in eta)
        for w, c in p.terms.items():
            for pos in range(len(w)):
                nl = math.sqrt(qfock.norm_sq(tr._word_vector(w[:pos][::-1]), q))
                nr = math.sqrt(qfock.norm_sq(tr._word_vector(w[pos + 1:]), q))
                budget += abs(c) * nl * nr
        budget *= 2 * spec.xi.operator_tail * eta_norm
    return AdjointCheck(lhs, rhs, float(abs(lhs - rhs)), budget)


def _tensor_norm_sq(trace, t: Tensor2Series) -> float:
    total = 0
    items = list(t.terms.items())
    for (a, b), c in items:
        for (u, v), d in items:
            total += c * np.conj(d) * trace(u[::-1] + a) * trace(v[::-1] + b)
    return float(np.real(total))


def _leg_gram(trace: FockTrace, legs):
    """Distinct legs, index per term, and G[u, a] = τ(rev(u) a)."""
    uniq = sorted(set(legs), key=lambda w: (len(w), w))
    pos = {w: i for i, w in enumerate(uniq)}
    g = trace.table([w[::-1] for w in uniq], uniq)
    return np.array([pos[w] for w in legs]), g


def tensor3_norm_sq(trace, t: Tensor3Series) -> float:
    """‖Θ‖² in L²(τ)^⊗3."""
    items = list(t.terms.items())
    if not items:
        return 0.0
    if isinstance(trace, FockTrace):
        x = np.array([c for _, c in items], dtype=complex)
        m = np.ones((len(items), len(items)))
        for leg in range(3):
            idx, g = _leg_gram(trace, [k[leg] for k, _ in items])
            m = m * g[np.ix_(idx, idx)]
        return float(np.real(np.conj(x) @ m @ x))
    total = 0
    for (a, b, c), x in items:
        for (u, v, w), y in items:
            total += x * np.conj(y) * trace(u[::-1] + a) * trace(v[::-1] + b) * trace(w[::-1] + c)
    return float(np.real(total))


def coderivation(spec: DerivationSpec, theta: Tensor2Series, l: int) -> Tensor3Series:
    """(1⊗∂_l + ∂_l⊗1)(Θ)."""
    acc: dict = {}
    for (a, b), c in theta.terms.items():
        for (u, v), d in apply_derivation(spec, l, NCPolynomial.monomial(spec.N, b)).terms.items():
            k = (a, u, v)
            acc[k] = acc.get(k, 0) + c * d
        for (u, v), d in apply_derivation(spec, l, NCPolynomial.monomial(spec.N, a)).terms.items():
            k = (u, v, b)
            acc[k] = acc.get(k, 0) + c * d
    return Tensor3Series._make(spec.N, acc, theta.degree_cap)


CODERIVATION_MAX_TERMS = 4000


@dataclass
class FisherReport:
    phi_star: float
    C: float
    xi_norms: list
    coderivation_sq: float
    tail_bound: float


def fisher_and_wasserstein_const(spec: DerivationSpec, conj: ConjugateSet | None = None,
                                 route: str = "auto") -> FisherReport:
    """Φ* = Σ_j ‖ξ_j‖² and C = ½(Σ_j ‖ξ_j‖² + Σ_{j,k,l} ‖(1⊗∂_l+∂_l⊗1)(∂_k X_j)‖²)^(1/2).

    The coderivation sum is skipped (NaN) when the tensors exceed
    ``CODERIVATION_MAX_TERMS`` terms.
    """
    trace = spec.trace
    if not isinstance(trace, FockTrace):
        raise TypeError("Fisher information needs a Fock trace")
    if conj is None:
        conj = conjugate_from_zeta(spec, route)
    q = trace.params.q
    norms = [float(qfock.norm_sq(conj.fock_vector(j, trace), q)) for j in range(spec.N)]
    phi = float(sum(norms))
    co = 0.0
    for j in range(spec.N):
        for k in range(spec.N):
            val = spec.values[k][j]
            if not val.terms:
                continue
            if len(val.terms) > CODERIVATION_MAX_TERMS:
                co = math.nan
                continue
            for l in range(spec.N):
                co += tensor3_norm_sq(trace, coderivation(spec, val, l))
    c_const = 0.5 * math.sqrt(phi + co) if not math.isnan(co) else math.nan
    tail = spec.xi.tail_bound if spec.xi is not None else 0.0
    return FisherReport(phi, c_const, norms, co, tail)
