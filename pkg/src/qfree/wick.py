"""Wick polynomials, level Gram matrices, orthonormal bases and the expansion of Ξ."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations

import numpy as np

from . import qfock
from .ncalg import NCPolynomial, Tensor2Series, Word, all_words, seminorm_rho
from .qfock import QParams, inversions

WICK_MAX_LEN = 10
BRUTE_MAX_LEVEL = 5
EIG_CLAMP = 1e-12
EIG_FLOOR = 1e-10


class NearSingularGramError(ValueError):
    pass


_wick_cache: dict = {}
_wick_lock = threading.Lock()


def wick_poly(w: Word, params: QParams, max_len: int = WICK_MAX_LEN) -> NCPolynomial:
    """W_w with W_w(X)Ω = e_w, from the recursion
    W_{i1..in} = X_{i1} W_{i2..in} − Σ_{j≥2} q^(j−2) δ(i1 = ij) W_{i2..in without ij}.
    """
    w = tuple(w)
    if len(w) > max_len:
        raise ValueError(f"Wick polynomials limited to length {max_len}")
    key = (w, params.N, qfock._q_key(params.q))
    out = _wick_cache.get(key)
    if out is not None:
        return out
    N, q = params.N, params.q
    if not w:
        out = NCPolynomial.constant(N, 1)
    else:
        head, rest = w[0], w[1:]
        acc = {(head,) + u: c for u, c in wick_poly(rest, params, max_len).terms.items()}
        for j, x in enumerate(rest):
            if x != head:
                continue
            weight = q ** j
            if weight == 0:
                continue
            for u, c in wick_poly(rest[:j] + rest[j + 1:], params, max_len).terms.items():
                acc[u] = acc.get(u, 0) - weight * c
        out = NCPolynomial(N, acc)
    with _wick_lock:
        _wick_cache[key] = out
    return out


def wick_coefficient_matrix(n: int, params: QParams, words: list[Word]) -> np.ndarray:
    """Rows: W_j for level-n words j in lexicographic order; columns: ``words``."""
    col = {w: k for k, w in enumerate(words)}
    rows = all_words(params.N, n, n)
    out = np.zeros((len(rows), len(words)))
    for r, w in enumerate(rows):
        for u, c in wick_poly(w, params).terms.items():
            out[r, col[u]] = float(c)
    return out


# ---------------------------------------------------------------------------
# Gram matrices

def gram_brute(n: int, params: QParams) -> np.ndarray:
    """Γ_n as the sum over S_n of q^inv(π) times the letter-permutation action."""
    if n > BRUTE_MAX_LEVEL:
        raise ValueError(f"brute Gram limited to n <= {BRUTE_MAX_LEVEL}")
    N, q = params.N, params.q
    size = N ** n
    if n == 0:
        return np.ones((1, 1))
    digits = np.array(all_words(N, n, n), dtype=np.int64).reshape(size, n)
    place = N ** np.arange(n - 1, -1, -1)
    g = np.zeros((size, size))
    rows = np.arange(size)
    for perm in permutations(range(n)):
        moved = np.empty_like(digits)
        moved[:, list(perm)] = digits
        g[rows, moved @ place] += q ** inversions(perm)
    return g


def gram(n: int, params: QParams, method: str = "recursive") -> np.ndarray:
    """Level-n Gram matrix in the lexicographic word basis."""
    if method == "brute":
        return gram_brute(n, params)
    if method == "recursive":
        return np.array(qfock.GRAM_CACHE.get(n, params.N, params.q))
    raise ValueError(f"unknown method {method!r}")


def min_eig_bound(n: int, params: QParams, form: str = "theta") -> float:
    """Lower estimate for λ_min(Γ_n).

    ``theta``: ((1−|q|)^(−1) Π_k (1−|q|^k)/(1+|q|^k))^n.
    ``simplified``: ((1−2|q|)/(1−|q|)²)^n, kept for comparison only.
    """
    a = abs(float(params.q))
    if form == "theta":
        prod = 1.0 / (1.0 - a)
        k = 1
        while True:
            f = (1 - a ** k) / (1 + a ** k)
            if abs(1 - f) <= 1e-16:
                break
            prod *= f
            k += 1
        return prod ** n
    if form == "simplified":
        if a >= 0.5:
            raise ValueError("simplified form needs |q| < 1/2")
        return ((1 - 2 * a) / (1 - a) ** 2) ** n
    raise ValueError(f"unknown form {form!r}")


def gram_inv_sqrt(n: int, params: QParams) -> tuple[np.ndarray, float]:
    """B = Γ_n^(−1/2) and λ_min(Γ_n)."""
    g = gram(n, params)
    lam, vec = np.linalg.eigh(g)
    lam_min = float(lam[0])
    if lam_min < EIG_FLOOR:
        raise NearSingularGramError(f"λ_min(Γ_{n}) = {lam_min:.3e} below {EIG_FLOOR}")
    lam = np.maximum(lam, EIG_CLAMP)
    return (vec / np.sqrt(lam)) @ vec.T, lam_min


def onb_polys(n: int, params: QParams) -> list[NCPolynomial]:
    """p_i = Σ_j B[j, i] W_j with B = Γ_n^(−1/2); the p_i(X)Ω are orthonormal."""
    b, _ = gram_inv_sqrt(n, params)
    words = all_words(params.N, n, n)
    wicks = [wick_poly(w, params) for w in words]
    out = []
    for i in range(len(words)):
        acc: dict = {}
        for j, wj in enumerate(wicks):
            if b[j, i] == 0:
                continue
            for u, c in wj.terms.items():
                acc[u] = acc.get(u, 0) + b[j, i] * c
        out.append(NCPolynomial(params.N, acc))
    return out


def q_threshold(N: int):
    """(4N³ + 2)^(−1) as an exact fraction."""
    if N < 1:
        raise ValueError("N must be positive")
    return Fraction(1, 4 * N ** 3 + 2)


# ---------------------------------------------------------------------------
# Ξ = Σ_n q^n P_n

def reversal_permutation(n: int, N: int) -> np.ndarray:
    """Index of rev(w) for each level-n word w in lexicographic order."""
    words = all_words(N, n, n)
    return np.array([qfock.word_index(w[::-1], N) for w in words], dtype=np.int64)


@dataclass
class XiExpansion:
    """Ξ truncated at tensor level D as a dense coefficient matrix over words.

    ``coef[a, b]`` is the coefficient of X_{words[a]} ⊗ X_{words[b]}. With
    ``legs="adjoint"`` the level-n block is Σ_i p_i ⊗ p_i*; with ``legs="same"``
    it is Σ_i p_i ⊗ p_i. The two agree for N = 1.
    """

    params: QParams
    D: int
    legs: str
    words: list
    coef: np.ndarray
    level_rho_norms: list
    rho: float
    ratio: float
    tail_bound: float
    operator_tail: float
    _terms: Tensor2Series | None = field(default=None, repr=False)

    @property
    def index(self) -> dict:
        return {w: k for k, w in enumerate(self.words)}

    @property
    def terms(self) -> Tensor2Series:
        if self._terms is None:
            rows, cols = np.nonzero(np.abs(self.coef) > 1e-15)
            ws = self.words
            self._terms = Tensor2Series._make(
                self.params.N,
                {(ws[a], ws[b]): float(self.coef[a, b]) for a, b in zip(rows, cols)},
                None)
        return self._terms

    def kernel_apply(self, v: qfock.FockVector) -> qfock.FockVector:
        """Act as the operator Σ c·|X_a Ω⟩⟨X_b* Ω| on a batched Fock vector."""
        tr = qfock.FockTrace(self.params)
        q = self.params.q
        left = tr.word_vectors(self.words)
        right = tr.word_vectors([w[::-1] for w in self.words])
        coords = np.atleast_2d(qfock.inner_matrix(_as_batch(v), right, q))
        weights = coords @ self.coef.T
        levels = [weights @ lvl for lvl in left.levels]
        return qfock.FockVector(self.params.N, levels)


def _as_batch(v: qfock.FockVector) -> qfock.FockVector:
    if v.levels[0].ndim == 1:
        return qfock.FockVector(v.N, [a[None, :] for a in v.levels])
    return v


def xi_level_block(n: int, params: QParams, words: list[Word], legs: str = "adjoint") -> np.ndarray:
    """Coefficient matrix of P_n over ``words`` ⊗ ``words``."""
    wmat = wick_coefficient_matrix(n, params, words)
    ginv = np.linalg.inv(gram(n, params))
    if legs == "adjoint":
        ginv = ginv[:, reversal_permutation(n, params.N)]
    elif legs != "same":
        raise ValueError(f"unknown legs convention {legs!r}")
    return wmat.T @ ginv @ wmat


def xi_expansion(params: QParams, D: int, legs: str = "adjoint",
                 rho: float | None = None) -> XiExpansion:
    """Ξ = Σ_{n≤D} q^n P_n with a tail estimate from the measured growth ratio.

    ``rho`` defaults to R₀ = 2/(1−|q|). The tail bound continues the last
    level's q^n‖P_n‖_ρ geometrically with the ratio of the last two levels;
    ``operator_tail`` is |q|^(D+1)/(1−|q|), the operator-norm size of the
    omitted projections.
    """
    if D < 0:
        raise ValueError("D must be non-negative")
    N, q = params.N, params.q
    rho = 2.0 / (1.0 - abs(q)) if rho is None else rho
    words = all_words(N, D)
    coef = np.zeros((len(words), len(words)))
    norms = []
    for n in range(D + 1):
        if n > 0 and q == 0:
            norms.append(0.0)
            continue
        block = xi_level_block(n, params, words, legs)
        coef += q ** n * block
        norms.append(abs(q) ** n * _block_rho_norm(block, words, N, rho))
    if len(norms) >= 2 and norms[-2] > 0:
        ratio = norms[-1] / norms[-2]
    else:
        ratio = 0.0
    tail = math.inf if ratio >= 1 else norms[-1] * ratio / (1 - ratio)
    op_tail = abs(q) ** (D + 1) / (1 - abs(q))
    return XiExpansion(params, D, legs, words, coef, norms, rho, ratio, tail, op_tail)


def _block_rho_norm(block: np.ndarray, words, N: int, rho: float) -> float:
    lens = np.array([len(w) for w in words])
    best: dict = {}
    absb = np.abs(block)
    for a in np.unique(lens):
        for b in np.unique(lens):
            m = absb[np.ix_(lens == a, lens == b)].max()
            if m > 0:
                best[(int(a), int(b))] = m
    x = N * rho
    return float(sum(c * x ** (a + b) for (a, b), c in best.items()))


def xi_tensor(params: QParams, D: int, legs: str = "adjoint") -> Tensor2Series:
    """Ξ truncated at level D as a sparse tensor series."""
    return xi_expansion(params, D, legs).terms


def xi_norm_check(xi: XiExpansion) -> float:
    """‖Ξ_{≤D}‖_ρ recomputed from the sparse terms."""
    return seminorm_rho(xi.terms, xi.rho)
