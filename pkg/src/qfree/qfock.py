"""Truncated q-deformed Fock space over an N-dimensional Hilbert space.

A level-k tensor is stored as a flat array of length N**k whose index is the
base-N number formed by the letters, first letter most significant. Levels
may carry leading batch axes, so one ``FockVector`` can hold many vectors.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

import numpy as np

from .ncalg import NCPolynomial, Word, all_words

BRUTE_MAX_LEN = 8
ORACLE_MAX_LEN = 16
DENSE_GRAM_MAX = 4096


@dataclass(frozen=True)
class QParams:
    q: float
    N: int

    def __post_init__(self):
        if not -1 < self.q < 1:
            raise ValueError(f"|q| must be below 1, got {self.q}")
        if self.N < 1:
            raise ValueError("N must be positive")


def inversions(perm) -> int:
    """Number of pairs i<j with perm[i] > perm[j]."""
    perm = list(perm)
    return sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])


def q_inner_brute(u: Word, v: Word, params: QParams):
    """<e_u, e_v>_q as the permutation sum over S_n with orthonormal letters."""
    if len(u) != len(v):
        return 0
    n = len(u)
    if n > BRUTE_MAX_LEN:
        raise ValueError(f"brute-force inner product limited to length {BRUTE_MAX_LEN}")
    total = 0
    for perm in permutations(range(n)):
        if all(u[i] == v[perm[i]] for i in range(n)):
            total += params.q ** inversions(perm)
    return total


def word_index(w: Word, N: int) -> int:
    idx = 0
    for x in w:
        idx = idx * N + x
    return idx


class FockVector:
    """Truncated Fock vector: ``levels[k]`` has shape (*batch, N**k)."""

    __slots__ = ("N", "levels")

    def __init__(self, N: int, levels):
        self.N = N
        self.levels = [np.asarray(a) for a in levels]
        for k, a in enumerate(self.levels):
            if a.shape[-1] != N ** k:
                raise ValueError(f"level {k} must have {N ** k} entries, got {a.shape[-1]}")

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def batch_shape(self):
        return self.levels[0].shape[:-1]

    @classmethod
    def vacuum(cls, N: int, batch=()):
        a = np.ones(tuple(batch) + (1,))
        return cls(N, [a])

    @classmethod
    def basis(cls, N: int, w: Word):
        levels = [np.zeros(N ** k) for k in range(len(w) + 1)]
        levels[len(w)][word_index(w, N)] = 1.0
        return cls(N, levels)

    def copy(self):
        return FockVector(self.N, [a.copy() for a in self.levels])

    def level(self, k: int):
        if k < len(self.levels):
            return self.levels[k]
        return np.zeros(self.batch_shape + (self.N ** k,), dtype=self.levels[0].dtype)

    def truncate(self, depth: int) -> "FockVector":
        return FockVector(self.N, self.levels[:depth + 1])

    def padded(self, depth: int) -> "FockVector":
        return FockVector(self.N, [self.level(k) for k in range(depth + 1)])

    def __add__(self, other):
        d = max(self.depth, other.depth)
        return FockVector(self.N, [self.level(k) + other.level(k) for k in range(d + 1)])

    def __sub__(self, other):
        d = max(self.depth, other.depth)
        return FockVector(self.N, [self.level(k) - other.level(k) for k in range(d + 1)])

    def scale(self, s):
        return FockVector(self.N, [s * a for a in self.levels])

    def __rmul__(self, s):
        return self.scale(s)

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(a), initial=0.0)) for a in self.levels)

    def flat(self):
        """Concatenation of all levels along the last axis."""
        return np.concatenate(self.levels, axis=-1)


def create(j: int, v: FockVector, max_depth: int | None = None) -> FockVector:
    """l(h_j): prepend letter j. Levels above ``max_depth`` are dropped."""
    N = v.N
    out = [np.zeros(v.batch_shape + (1,), dtype=v.levels[0].dtype)]
    top = v.depth if max_depth is None else min(v.depth, max_depth - 1)
    for k in range(top + 1):
        a = v.levels[k]
        new = np.zeros(a.shape[:-1] + (N, N ** k), dtype=a.dtype)
        new[..., j, :] = a
        out.append(new.reshape(a.shape[:-1] + (N ** (k + 1),)))
    return FockVector(N, out)


def annihilate(j: int, v: FockVector, q: float) -> FockVector:
    """l*(h_j): delete the m-th factor when it equals h_j, with weight q^(m-1)."""
    N = v.N
    out = []
    for k in range(v.depth):
        a = v.levels[k + 1]
        batch = a.shape[:-1]
        acc = np.zeros(batch + (N ** k,), dtype=a.dtype)
        for m in range(k + 1):
            w = q ** m
            if w == 0:
                continue
            blk = a.reshape(batch + (N ** m, N, N ** (k - m)))[..., j, :]
            acc += w * blk.reshape(batch + (N ** k,))
        out.append(acc)
    if not out:
        out = [np.zeros(v.batch_shape + (1,), dtype=v.levels[0].dtype)]
    return FockVector(N, out)


def apply_generator(j: int, v: FockVector, q: float, max_depth: int | None = None) -> FockVector:
    """X_j = l(h_j) + l*(h_j)."""
    return create(j, v, max_depth) + annihilate(j, v, q)


def apply_word(w: Word, v: FockVector, q: float, max_depth: int | None = None) -> FockVector:
    """X_w v, applying the last letter first."""
    for x in reversed(w):
        v = apply_generator(x, v, q, max_depth)
    return v


def apply_poly(f: NCPolynomial, v: FockVector, q: float) -> FockVector:
    out = None
    for w, c in f.terms.items():
        term = apply_word(w, v, q).scale(c)
        out = term if out is None else out + term
    if out is None:
        return FockVector(v.N, [np.zeros_like(v.levels[0])])
    return out


def poly_vector(f: NCPolynomial, q: float) -> FockVector:
    """f(X)Ω."""
    return apply_poly(f, FockVector.vacuum(f.N), q)


# ---------------------------------------------------------------------------
# level Gram matrices

def _q_key(q):
    return q if isinstance(q, Fraction) else float(q)


def gram_apply(x, n: int, N: int, q: float):
    """Γ_n x on the last axis, via Γ_n = (1⊗Γ_{n-1}) Σ_k q^(k-1) (move letter k to front)."""
    x = np.asarray(x)
    if n <= 1 or q == 0:
        return x.copy()
    batch = x.shape[:-1]
    t = x.reshape(batch + (N,) * n)
    nb = len(batch)
    acc = np.array(t, dtype=np.result_type(t, float), copy=True)
    for k in range(1, n):
        acc += q ** k * np.moveaxis(t, nb + k, nb)
    acc = acc.reshape(batch + (N, N ** (n - 1)))
    return gram_apply(acc, n - 1, N, q).reshape(batch + (N ** n,))


class _GramCache:
    """Dense level Gram matrices keyed by (n, N, q); reads are lock-free."""

    def __init__(self):
        self._store: dict = {}
        self._lock = threading.Lock()

    def get(self, n: int, N: int, q) -> np.ndarray:
        key = (n, N, _q_key(q))
        g = self._store.get(key)
        if g is not None:
            return g
        with self._lock:
            g = self._store.get(key)
            if g is None:
                g = gram_recursive_dense(n, N, float(q))
                g.setflags(write=False)
                self._store[key] = g
            return g

    def clear(self):
        with self._lock:
            self._store.clear()


GRAM_CACHE = _GramCache()


def gram_recursive_dense(n: int, N: int, q: float) -> np.ndarray:
    """Dense Γ_n built from the product recursion."""
    if N ** n > DENSE_GRAM_MAX:
        raise ValueError(f"dense Gram of size {N ** n} exceeds {DENSE_GRAM_MAX}")
    return gram_apply(np.eye(N ** n), n, N, q)


def inner(u: FockVector, v: FockVector, q: float):
    """<u, v>_q, conjugate-linear in the second argument; batched over leading axes."""
    total = 0
    for k in range(min(u.depth, v.depth) + 1):
        a, b = u.levels[k], v.levels[k]
        total = total + np.sum(gram_apply(a, k, u.N, q) * np.conj(b), axis=-1)
    return total


def norm_sq(u: FockVector, q: float):
    return np.real(inner(u, u, q))


def inner_matrix(us: FockVector, vs: FockVector, q: float) -> np.ndarray:
    """Matrix of <u_a, v_b>_q for batched vectors with one batch axis each."""
    N = us.N
    out = 0
    for k in range(min(us.depth, vs.depth) + 1):
        a, b = us.levels[k], vs.levels[k]
        if N ** k <= DENSE_GRAM_MAX and a.shape[0] * b.shape[0] > 0:
            ga = a @ GRAM_CACHE.get(k, N, q) if k > 1 and q != 0 else a
        else:
            ga = gram_apply(a, k, N, q)
        out = out + ga @ np.conj(b).T
    return np.asarray(out)


# ---------------------------------------------------------------------------
# traces

def trace_word(w: Word, params: QParams) -> float:
    """τ(X_w) = <X_w Ω, Ω>, exact since only levels up to |w| are touched."""
    q, N = params.q, params.N
    v = FockVector.vacuum(N)
    n = len(w)
    if n % 2:
        return 0.0
    for step, x in enumerate(reversed(w)):
        remaining = n - step - 1
        v = apply_generator(x, v, q, max_depth=remaining + 1)
        v = v.truncate(remaining)
    return float(v.levels[0][0])


def trace_poly(f: NCPolynomial, params: QParams):
    return sum((c * trace_word(w, params) for w, c in f.terms.items()), 0)


class FockTrace:
    """Memoized trace functional of a q-semicircular family; callable on words."""

    def __init__(self, params: QParams):
        self.params = params
        self._cache: dict = {}
        self._lock = threading.Lock()
        self._vec_cache: dict = {}

    @property
    def R0(self) -> float:
        return 2.0 / (1.0 - abs(self.params.q))

    def __call__(self, w: Word) -> float:
        w = tuple(w)
        t = self._cache.get(w)
        if t is None:
            if len(w) % 2:
                t = 0.0
            elif len(w) <= 2:
                t = float(len(w) == 0 or w[0] == w[1])
            else:
                t = trace_word(w, self.params)
            with self._lock:
                self._cache[w] = t
        return t

    def poly(self, f: NCPolynomial):
        return f.evaluate(self)

    def word_vectors(self, words, depth: int | None = None) -> FockVector:
        """Batched X_w Ω for a list of words, padded to a common depth."""
        words = [tuple(w) for w in words]
        d = max((len(w) for w in words), default=0) if depth is None else depth
        N, q = self.params.N, self.params.q
        levels = [np.zeros((len(words), N ** k)) for k in range(d + 1)]
        for r, w in enumerate(words):
            v = self._word_vector(w)
            for k in range(min(v.depth, d) + 1):
                levels[k][r] = v.levels[k]
        return FockVector(N, levels)

    def _word_vector(self, w: Word) -> FockVector:
        v = self._vec_cache.get(w)
        if v is None:
            if not w:
                v = FockVector.vacuum(self.params.N)
            else:
                v = apply_generator(w[0], self._word_vector(w[1:]), self.params.q)
            self._vec_cache[w] = v
        return v

    def table(self, lefts, rights, mid: Word = ()) -> np.ndarray:
        """T[a, b] = τ(L_a · mid · R_b) = <X_mid X_{R_b} Ω, X_{rev L_a} Ω>_q."""
        q = self.params.q
        lv = self.word_vectors([tuple(w)[::-1] for w in lefts])
        rv = self.word_vectors(rights)
        if mid:
            rv = apply_word(tuple(mid), rv, q)
        return inner_matrix(rv, lv, q).T


# ---------------------------------------------------------------------------
# pair-partition oracle

def moment_oracle(w: Word, params: QParams):
    """Σ over pairings of equal letters of q^(number of crossings)."""
    n = len(w)
    if n > ORACLE_MAX_LEN:
        raise ValueError(f"moment oracle limited to length {ORACLE_MAX_LEN}")
    if n % 2:
        return 0
    q = params.q
    w = tuple(w)

    @lru_cache(maxsize=None)
    def walk(pos: int, open_arcs: tuple):
        if pos == n:
            return 1 if not open_arcs else 0
        if len(open_arcs) > n - pos:
            return 0
        total = 0
        if len(open_arcs) < n - pos:
            total += walk(pos + 1, open_arcs + (pos,))
        for idx, o in enumerate(open_arcs):
            if w[o] == w[pos]:
                crossings = len(open_arcs) - idx - 1
                total += q ** crossings * walk(pos + 1, open_arcs[:idx] + open_arcs[idx + 1:])
        return total

    return walk(0, ())


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def moment_table(N: int, max_len: int, params: QParams):
    """Rows (word, q, value) for every word up to ``max_len``."""
    tr = FockTrace(params)
    return [(w, params.q, tr(w)) for w in all_words(N, max_len)]
