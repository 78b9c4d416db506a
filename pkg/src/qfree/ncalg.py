"""Non-commutative polynomials and truncated series with majorant norms.

Words are tuples of 0-based letters. A series maps keys to coefficients:
a word for scalar series, a pair of words for 2-tensors and a triple for
3-tensors. Coefficients may be int, Fraction, float or complex; exact
types are pruned only at true zero, floats below ``ZERO_TOL``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from fractions import Fraction
from itertools import product
from numbers import Number
from typing import Callable, Iterable, Mapping

Word = tuple[int, ...]
EMPTY: Word = ()

ZERO_TOL = 1e-15


class CapOverflowError(ValueError):
    """Raised when a strict operation would drop terms above a degree cap."""


def _is_zero(c) -> bool:
    if isinstance(c, (int, Fraction)):
        return c == 0
    return abs(c) <= ZERO_TOL


def word_sort_key(w: Word):
    return (len(w), w)


def key_sort_key(key):
    if key and isinstance(key[0], tuple):
        return (sum(len(w) for w in key), tuple(word_sort_key(w) for w in key))
    return word_sort_key(key)


def all_words(N: int, max_len: int, min_len: int = 0) -> list[Word]:
    """Words over N letters ordered by length, then lexicographically."""
    out: list[Word] = []
    for n in range(min_len, max_len + 1):
        out.extend(product(range(N), repeat=n))
    return out


class MajorantSeries:
    """Power series with non-negative coefficients in 1, 2 or 3 commuting variables."""

    __slots__ = ("arity", "coeffs", "truncation")

    def __init__(self, arity: int, coeffs: Mapping[tuple, float] | None = None,
                 truncation: int | None = None):
        if arity not in (1, 2, 3):
            raise ValueError("arity must be 1, 2 or 3")
        self.arity = arity
        self.truncation = truncation
        clean = {}
        for k, v in (coeffs or {}).items():
            k = (k,) if isinstance(k, int) else tuple(k)
            if len(k) != arity:
                raise ValueError(f"degree tuple {k} does not match arity {arity}")
            if v < 0:
                raise ValueError("majorant coefficients must be non-negative")
            if truncation is not None and sum(k) > truncation:
                continue
            if v != 0:
                clean[k] = float(v) if not isinstance(v, (int, Fraction)) else v
        self.coeffs = clean

    def __repr__(self):
        return f"MajorantSeries(arity={self.arity}, coeffs={dict(sorted(self.coeffs.items()))})"

    def __eq__(self, other):
        return (isinstance(other, MajorantSeries) and self.arity == other.arity
                and self.coeffs == other.coeffs)

    def degree(self) -> int:
        return max((sum(k) for k in self.coeffs), default=-1)

    def __call__(self, *z) -> float:
        if len(z) != self.arity:
            raise ValueError("wrong number of arguments")
        total = 0.0
        for k, c in self.coeffs.items():
            term = float(c)
            for zi, ki in zip(z, k):
                term *= zi ** ki
            total += term
        return total

    def _combine(self, other, op):
        if self.arity != other.arity:
            raise ValueError("arity mismatch")
        out = defaultdict(float)
        for k, c in self.coeffs.items():
            out[k] += c
        for k, c in other.coeffs.items():
            out[k] = op(out[k], c)
        return out

    def __add__(self, other: "MajorantSeries") -> "MajorantSeries":
        return MajorantSeries(self.arity, self._combine(other, lambda a, b: a + b),
                              _min_trunc(self.truncation, other.truncation))

    def scale(self, s: float) -> "MajorantSeries":
        if s < 0:
            raise ValueError("scale must be non-negative")
        return MajorantSeries(self.arity, {k: s * c for k, c in self.coeffs.items()},
                              self.truncation)

    def __mul__(self, other):
        if isinstance(other, Number):
            return self.scale(other)
        if self.arity != other.arity:
            raise ValueError("arity mismatch")
        out = defaultdict(float)
        for k1, c1 in self.coeffs.items():
            for k2, c2 in other.coeffs.items():
                out[tuple(a + b for a, b in zip(k1, k2))] += c1 * c2
        return MajorantSeries(self.arity, out, _min_trunc(self.truncation, other.truncation))

    __rmul__ = __mul__

    def swap(self) -> "MajorantSeries":
        """Exchange the two variables of an arity-2 series."""
        if self.arity != 2:
            raise ValueError("swap needs arity 2")
        return MajorantSeries(2, {(b, a): c for (a, b), c in self.coeffs.items()},
                              self.truncation)

    def derivative(self, var: int = 0) -> "MajorantSeries":
        out = {}
        for k, c in self.coeffs.items():
            if k[var] > 0:
                kk = list(k)
                kk[var] -= 1
                out[tuple(kk)] = c * k[var]
        return MajorantSeries(self.arity, out, self.truncation)

    def specialize(self, var: int, value: float) -> "MajorantSeries":
        """Substitute a non-negative number for one variable."""
        if value < 0:
            raise ValueError("value must be non-negative")
        out = defaultdict(float)
        for k, c in self.coeffs.items():
            rest = k[:var] + k[var + 1:]
            out[rest] += float(c) * value ** k[var]
        return MajorantSeries(self.arity - 1, out)

    def diagonal(self) -> "MajorantSeries":
        """Set all variables equal: phi(z, ..., z)."""
        out = defaultdict(float)
        for k, c in self.coeffs.items():
            out[(sum(k),)] += c
        return MajorantSeries(1, out, self.truncation)


def _min_trunc(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def majorant_dominates(phi: MajorantSeries, psi: MajorantSeries, rtol: float = 0.0,
                       atol: float = 0.0) -> bool:
    """True iff every coefficient of ``phi`` is at most the matching one of ``psi``.

    Both are compared up to their common truncation degree.
    """
    if phi.arity != psi.arity:
        raise ValueError("arity mismatch")
    cap = _min_trunc(phi.truncation, psi.truncation)
    for k, c in phi.coeffs.items():
        if cap is not None and sum(k) > cap:
            continue
        bound = psi.coeffs.get(k, 0.0)
        if c > bound * (1 + rtol) + atol:
            return False
    return True


class _Series:
    """Sparse coefficient map shared by the scalar, 2-tensor and 3-tensor series."""

    arity = 1
    __slots__ = ("N", "terms", "degree_cap", "overflow")

    def __init__(self, N: int, terms=None, degree_cap: int | None = None,
                 _trusted: bool = False, _keys_ok: bool = False):
        if N < 1:
            raise ValueError("alphabet size must be positive")
        self.N = N
        self.degree_cap = degree_cap
        self.overflow: dict[int, float] = {}
        if _trusted:
            self.terms = terms
            return
        if _keys_ok and isinstance(terms, dict):
            acc = terms
        else:
            acc = {}
            items = terms.items() if isinstance(terms, Mapping) else (terms or ())
            for key, c in items:
                key = self._normalize_key(key)
                acc[key] = acc.get(key, 0) + c
        out = {}
        for key, c in acc.items():
            if _is_zero(c):
                continue
            deg = self._key_degree(key)
            if degree_cap is not None and deg > degree_cap:
                self.overflow[deg] = max(self.overflow.get(deg, 0.0), abs(c))
                continue
            out[key] = c
        self.terms = out

    def _normalize_key(self, key):
        words = self._split(key)
        out = []
        for w in words:
            w = tuple(int(x) for x in w)
            for x in w:
                if not 0 <= x < self.N:
                    raise ValueError(f"letter {x} outside alphabet of size {self.N}")
            out.append(w)
        return out[0] if self.arity == 1 else tuple(out)

    def _split(self, key):
        if self.arity == 1:
            return (key,)
        if len(key) != self.arity:
            raise ValueError(f"expected {self.arity} legs, got {key!r}")
        return key

    def _key_degree(self, key) -> int:
        return len(key) if self.arity == 1 else sum(len(w) for w in key)

    @classmethod
    def _make(cls, N, acc, cap):
        return cls(N, acc, cap, _keys_ok=True)

    @property
    def truncated(self) -> bool:
        """True when building this value dropped terms above the degree cap."""
        return bool(self.overflow)

    def overflow_majorant(self) -> MajorantSeries:
        return MajorantSeries(1, {(d,): c for d, c in self.overflow.items()})

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def items(self):
        return self.terms.items()

    def coeff(self, key):
        return self.terms.get(self._normalize_key(key), 0)

    def degree(self) -> int:
        return max((self._key_degree(k) for k in self.terms), default=-1)

    def is_zero(self) -> bool:
        return not self.terms

    def sorted_items(self):
        return sorted(self.terms.items(), key=lambda kv: key_sort_key(kv[0]))

    def _check(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.N != self.N:
            raise ValueError("alphabet size mismatch")

    def __add__(self, other):
        self._check(other)
        acc = dict(self.terms)
        for k, c in other.terms.items():
            acc[k] = acc.get(k, 0) + c
        return self._make(self.N, acc, _min_trunc(self.degree_cap, other.degree_cap))

    def __neg__(self):
        return type(self)(self.N, {k: -c for k, c in self.terms.items()}, self.degree_cap,
                          _trusted=True)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        if _is_zero(s):
            return type(self)(self.N, {}, self.degree_cap, _trusted=True)
        return self._make(self.N, {k: s * c for k, c in self.terms.items()}, self.degree_cap)

    def __rmul__(self, s):
        if isinstance(s, Number):
            return self.scale(s)
        return NotImplemented

    def __eq__(self, other):
        return (type(other) is type(self) and other.N == self.N
                and self.terms == other.terms)

    def __hash__(self):
        return hash((type(self).__name__, self.N, frozenset(self.terms.items())))

    def allclose(self, other, atol: float = 1e-12) -> bool:
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) <= atol for k in keys)

    def max_abs_diff(self, other) -> float:
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0) - other.terms.get(k, 0)) for k in keys), default=0.0)

    def map_coeffs(self, fn: Callable):
        return self._make(self.N, {k: fn(c) for k, c in self.terms.items()}, self.degree_cap)

    def with_cap(self, cap: int | None):
        return self._make(self.N, self.terms, cap)

    def __repr__(self):
        items = self.sorted_items()
        body = " + ".join(f"{c}*{_fmt_key(k, self.arity)}" for k, c in items[:12])
        more = f" + ... ({len(items) - 12} more)" if len(items) > 12 else ""
        return f"{type(self).__name__}(N={self.N}, {body or '0'}{more})"


def _fmt_word(w: Word) -> str:
    return "".join(f"X{x + 1}" for x in w) or "1"


def _fmt_key(k, arity):
    if arity == 1:
        return _fmt_word(k)
    return "⊗".join(_fmt_word(w) for w in k)


class NCPolynomial(_Series):
    """Element of the free algebra in N self-adjoint letters."""

    arity = 1
    __slots__ = ()

    @classmethod
    def constant(cls, N: int, c=1, degree_cap=None) -> "NCPolynomial":
        return cls(N, {EMPTY: c}, degree_cap)

    @classmethod
    def variable(cls, N: int, i: int, c=1) -> "NCPolynomial":
        return cls(N, {(i,): c})

    @classmethod
    def monomial(cls, N: int, w: Iterable[int], c=1) -> "NCPolynomial":
        return cls(N, {tuple(w): c})

    def __mul__(self, other):
        if isinstance(other, Number):
            return self.scale(other)
        if isinstance(other, NCPolynomial):
            return multiply(self, other)
        return NotImplemented

    def __pow__(self, n: int):
        out = NCPolynomial.constant(self.N, 1, self.degree_cap)
        for _ in range(n):
            out = out * self
        return out

    def adjoint(self) -> "NCPolynomial":
        """Involution X_w* = X_rev(w) with conjugated coefficients."""
        return NCPolynomial(self.N, {k[::-1]: _conj(c) for k, c in self.terms.items()},
                            self.degree_cap)

    def evaluate(self, word_value: Callable[[Word], object]):
        """Linear extension of a word functional, e.g. a trace."""
        return sum((c * word_value(w) for w, c in self.terms.items()), 0)


class Tensor2Series(_Series):
    """Element of the algebraic tensor square, keyed by (left word, right word)."""

    arity = 2
    __slots__ = ()

    @classmethod
    def one(cls, N: int, c=1) -> "Tensor2Series":
        return cls(N, {(EMPTY, EMPTY): c})

    @classmethod
    def elementary(cls, a: NCPolynomial, b: NCPolynomial) -> "Tensor2Series":
        """a⊗b for polynomials a and b."""
        acc: dict = {}
        for wa, ca in a.terms.items():
            for wb, cb in b.terms.items():
                k = (wa, wb)
                acc[k] = acc.get(k, 0) + ca * cb
        return cls(a.N, acc, _min_trunc(a.degree_cap, b.degree_cap))

    def left_mul(self, f: NCPolynomial) -> "Tensor2Series":
        """f·(A⊗B) = fA⊗B."""
        acc: dict = {}
        for (a, b), c in self.terms.items():
            for w, cf in f.terms.items():
                k = (w + a, b)
                acc[k] = acc.get(k, 0) + cf * c
        return Tensor2Series._make(self.N, acc, self.degree_cap)

    def right_mul(self, f: NCPolynomial) -> "Tensor2Series":
        """(A⊗B)·f = A⊗Bf."""
        acc: dict = {}
        for (a, b), c in self.terms.items():
            for w, cf in f.terms.items():
                k = (a, b + w)
                acc[k] = acc.get(k, 0) + c * cf
        return Tensor2Series._make(self.N, acc, self.degree_cap)

    def adjoint(self) -> "Tensor2Series":
        """(a⊗b)* = b*⊗a*."""
        return Tensor2Series(self.N, {(b[::-1], a[::-1]): _conj(c)
                                      for (a, b), c in self.terms.items()}, self.degree_cap)

    def flip(self) -> "Tensor2Series":
        """a⊗b ↦ b⊗a."""
        return Tensor2Series(self.N, {(b, a): c for (a, b), c in self.terms.items()},
                             self.degree_cap)


class Tensor3Series(_Series):
    """Element of the algebraic triple tensor power."""

    arity = 3
    __slots__ = ()


def _conj(c):
    return c.conjugate() if isinstance(c, complex) else c


# ---------------------------------------------------------------------------
# majorants and norms

def coefficient_majorant(f: _Series) -> MajorantSeries:
    """Largest coefficient modulus per (multi-)degree."""
    out: dict = {}
    for key, c in f.terms.items():
        deg = (len(key),) if f.arity == 1 else tuple(len(w) for w in key)
        a = abs(c)
        if a > out.get(deg, 0):
            out[deg] = a
    return MajorantSeries(f.arity, out, f.degree_cap)


def seminorm_rho(f, rho: float, tail_ratio: float | None = None) -> float:
    """Weighted norm sum_n c(n) N^n rho^n, or phi(N rho, ..., N rho) for tensors.

    ``f`` may be a series or a ``MajorantSeries`` (then ``N`` must be folded
    into ``rho`` by the caller). With ``tail_ratio`` the sum is extended by a
    geometric tail continuing the last computed term; a ratio at or above 1
    returns ``math.inf``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if isinstance(f, MajorantSeries):
        phi, x = f, rho
    else:
        phi, x = coefficient_majorant(f), f.N * rho
    value = phi(*([x] * phi.arity))
    if tail_ratio is not None:
        if tail_ratio >= 1:
            return math.inf
        top = phi.degree()
        if top >= 0:
            last = sum(c * x ** sum(k) for k, c in phi.coeffs.items() if sum(k) == top)
            value += last * tail_ratio / (1 - tail_ratio)
    return float(value)


# ---------------------------------------------------------------------------
# products and quotients

def multiply(f: NCPolynomial, g: NCPolynomial, strict: bool = False) -> NCPolynomial:
    """Concatenation product. With ``strict`` a cap overflow raises."""
    if f.N != g.N:
        raise ValueError("alphabet size mismatch")
    cap = _min_trunc(f.degree_cap, g.degree_cap)
    acc: dict = {}
    for wf, cf in f.terms.items():
        for wg, cg in g.terms.items():
            k = wf + wg
            acc[k] = acc.get(k, 0) + cf * cg
    out = NCPolynomial._make(f.N, acc, cap)
    if strict and out.truncated:
        raise CapOverflowError(f"product exceeds degree cap {cap}")
    return out


def _check_index(N, *idx):
    for i in idx:
        if not 0 <= i < N:
            raise IndexError(f"index {i} outside 0..{N - 1}")


def second_quotient(f: NCPolynomial, i: int, j: int) -> Tensor2Series:
    """D_ij f: for every pair k<l with w_k=i, w_l=j emit w(k+1..l-1) ⊗ w(l+1..) w(..k-1)."""
    _check_index(f.N, i, j)
    acc: dict = {}
    for w, c in f.terms.items():
        n = len(w)
        for k in range(n):
            if w[k] != i:
                continue
            for l in range(k + 1, n):
                if w[l] != j:
                    continue
                key = (w[k + 1:l], w[l + 1:] + w[:k])
                acc[key] = acc.get(key, 0) + c
    return Tensor2Series._make(f.N, acc, f.degree_cap)


def first_quotient(f: NCPolynomial, j: int) -> Tensor2Series:
    """Free difference quotient: X_w ↦ sum over positions k with w_k=j of w(<k) ⊗ w(>k)."""
    _check_index(f.N, j)
    acc: dict = {}
    for w, c in f.terms.items():
        for k, x in enumerate(w):
            if x == j:
                key = (w[:k], w[k + 1:])
                acc[key] = acc.get(key, 0) + c
    return Tensor2Series._make(f.N, acc, f.degree_cap)


def _pair_product(psi: Tensor2Series, theta: Tensor2Series, rule) -> Tensor2Series:
    if psi.N != theta.N:
        raise ValueError("alphabet size mismatch")
    acc: dict = {}
    for (a, b), c1 in psi.terms.items():
        for (p, q), c2 in theta.terms.items():
            key = rule(a, b, p, q)
            acc[key] = acc.get(key, 0) + c1 * c2
    return Tensor2Series._make(psi.N, acc, _min_trunc(psi.degree_cap, theta.degree_cap))


def hash_in(psi: Tensor2Series, theta: Tensor2Series) -> Tensor2Series:
    """(A⊗B) #_in (P⊗Q) = PA ⊗ BQ."""
    return _pair_product(psi, theta, lambda a, b, p, q: (p + a, b + q))


def hash_out(psi: Tensor2Series, theta: Tensor2Series) -> Tensor2Series:
    """(A⊗B) #_out (P⊗Q) = BP ⊗ QA."""
    return _pair_product(psi, theta, lambda a, b, p, q: (b + p, q + a))


def partial_trace_right(theta: Tensor2Series, tau: Callable[[Word], object]) -> NCPolynomial:
    """(1⊗τ): A⊗B ↦ τ(B)·A."""
    acc: dict = {}
    for (a, b), c in theta.terms.items():
        t = tau(b)
        if not _is_zero(t):
            acc[a] = acc.get(a, 0) + c * t
    return NCPolynomial._make(theta.N, acc, theta.degree_cap)


def partial_trace_left(theta: Tensor2Series, tau: Callable[[Word], object]) -> NCPolynomial:
    """(τ⊗1): A⊗B ↦ τ(A)·B."""
    acc: dict = {}
    for (a, b), c in theta.terms.items():
        t = tau(a)
        if not _is_zero(t):
            acc[b] = acc.get(b, 0) + c * t
    return NCPolynomial._make(theta.N, acc, theta.degree_cap)


def full_trace(theta: Tensor2Series, tau: Callable[[Word], object]):
    """(τ⊗τ)(Θ)."""
    return sum((c * tau(a) * tau(b) for (a, b), c in theta.terms.items()), 0)


def contract(theta: Tensor2Series, f: NCPolynomial) -> NCPolynomial:
    """Σ c·A f B for Θ = Σ c·A⊗B (the sandwich m_f)."""
    acc: dict = {}
    for (a, b), c in theta.terms.items():
        for w, cf in f.terms.items():
            k = a + w + b
            acc[k] = acc.get(k, 0) + c * cf
    return NCPolynomial._make(theta.N, acc, _min_trunc(theta.degree_cap, f.degree_cap))


sandwich_m = contract


# ---------------------------------------------------------------------------
# 3-tensor operations

def first_leg_quotient(psi: Tensor2Series, s: int) -> Tensor3Series:
    """D₁^(s)(A⊗B) = Σ_{p: A_p = s} A(<p) ⊗ A(>p) ⊗ B."""
    _check_index(psi.N, s)
    acc: dict = {}
    for (a, b), c in psi.terms.items():
        for p, x in enumerate(a):
            if x == s:
                key = (a[:p], a[p + 1:], b)
                acc[key] = acc.get(key, 0) + c
    return Tensor3Series._make(psi.N, acc, psi.degree_cap)


def second_leg_quotient(psi: Tensor2Series, s: int) -> Tensor3Series:
    """D₂^(s)(A⊗B) = Σ_{p: B_p = s} A ⊗ B(<p) ⊗ B(>p)."""
    _check_index(psi.N, s)
    acc: dict = {}
    for (a, b), c in psi.terms.items():
        for p, x in enumerate(b):
            if x == s:
                key = (a, b[:p], b[p + 1:])
                acc[key] = acc.get(key, 0) + c
    return Tensor3Series._make(psi.N, acc, psi.degree_cap)


def _triple_product(psi: Tensor2Series, theta: Tensor3Series, rule) -> Tensor3Series:
    if psi.N != theta.N:
        raise ValueError("alphabet size mismatch")
    acc: dict = {}
    for (a, b), c1 in psi.terms.items():
        for (p, q, r), c2 in theta.terms.items():
            key = rule(a, b, p, q, r)
            acc[key] = acc.get(key, 0) + c1 * c2
    return Tensor3Series._make(psi.N, acc, _min_trunc(psi.degree_cap, theta.degree_cap))


def hash_in1(psi: Tensor2Series, theta: Tensor3Series) -> Tensor3Series:
    """Inside product around the first tensor sign: (A⊗B), P⊗Q⊗R ↦ PA⊗BQ⊗R."""
    return _triple_product(psi, theta, lambda a, b, p, q, r: (p + a, b + q, r))


def hash_in2(psi: Tensor2Series, theta: Tensor3Series) -> Tensor3Series:
    """Inside product around the second tensor sign: (A⊗B), P⊗Q⊗R ↦ P⊗QA⊗BR."""
    return _triple_product(psi, theta, lambda a, b, p, q, r: (p, q + a, b + r))


def contract_m2(theta: Tensor3Series, tau: Callable[[Word], object]) -> NCPolynomial:
    """P⊗Q⊗R ↦ P·τ(QR)."""
    acc: dict = {}
    for (p, q, r), c in theta.terms.items():
        t = tau(q + r)
        if not _is_zero(t):
            acc[p] = acc.get(p, 0) + c * t
    return NCPolynomial._make(theta.N, acc, theta.degree_cap)


def contract_middle(theta: Tensor3Series, tau: Callable[[Word], object]) -> NCPolynomial:
    """P⊗Q⊗R ↦ τ(Q)·PR."""
    acc: dict = {}
    for (p, q, r), c in theta.terms.items():
        t = tau(q)
        if not _is_zero(t):
            k = p + r
            acc[k] = acc.get(k, 0) + c * t
    return NCPolynomial._make(theta.N, acc, theta.degree_cap)


# ---------------------------------------------------------------------------
# text serialization

def _fmt_number(x) -> str:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    return repr(x)


def _parse_number(tok: str):
    if "/" in tok:
        return Fraction(tok)
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def dumps(f: _Series) -> str:
    """One term per line: ``re im : i1 i2 | j1 j2``, letters 1-based."""
    cap = "none" if f.degree_cap is None else str(f.degree_cap)
    lines = [f"N={f.N} arity={f.arity} cap={cap}"]
    for key, c in f.sorted_items():
        if isinstance(c, complex):
            re, im = _fmt_number(c.real), _fmt_number(c.imag)
        else:
            re, im = _fmt_number(c), "0"
        words = (key,) if f.arity == 1 else key
        legs = " | ".join(" ".join(str(x + 1) for x in w) for w in words)
        lines.append(f"{re} {im} : {legs}".rstrip())
    return "\n".join(lines) + "\n"


def loads(text: str) -> _Series:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty input")
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    N, arity = int(header["N"]), int(header["arity"])
    cap = None if header.get("cap", "none") == "none" else int(header["cap"])
    cls = {1: NCPolynomial, 2: Tensor2Series, 3: Tensor3Series}[arity]
    terms = {}
    for ln in lines[1:]:
        num, _, legs = ln.partition(":")
        re_tok, im_tok = num.split()
        re = _parse_number(re_tok)
        c = re if im_tok == "0" else complex(float(re), float(_parse_number(im_tok)))
        words = [tuple(int(x) - 1 for x in leg.split()) for leg in legs.split("|")]
        if len(words) != arity:
            raise ValueError(f"line {ln!r} has {len(words)} legs, expected {arity}")
        key = words[0] if arity == 1 else tuple(words)
        if key in terms:
            raise ValueError(f"duplicate term {ln!r}")
        terms[key] = c
    return cls(N, terms, cap)
