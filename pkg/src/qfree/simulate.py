"""Finite-K Hermitian matrix surrogate for free SDEs.

Free Brownian motion is replaced by Hermitian Brownian motion scaled so that
(1/K)Tr(G²) ≈ Δt; traces are normalized, τ_K(A) = Tr(A)/K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ncalg import NCPolynomial, Tensor2Series, Word, all_words


class NormGuardError(RuntimeError):
    """A matrix left the region where the series evaluations are trusted."""


class NonFiniteError(RuntimeError):
    pass


def ntrace(a: np.ndarray) -> complex:
    return np.trace(a) / a.shape[0]


def l2_norm(a: np.ndarray) -> float:
    """‖A‖₂ = (τ_K(A*A))^(1/2)."""
    return float(np.sqrt(np.sum(np.abs(a) ** 2) / a.shape[0]))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def gue(K: int, rng: np.random.Generator, variance: float = 1.0) -> np.ndarray:
    """Hermitian matrix with E|h_ij|² = variance/K."""
    z = rng.standard_normal((K, K, 2)).view(np.complex128)[..., 0]
    # entries of z have E|z|² = 2; the Hermitian part is scaled back to variance/K
    return (z + z.conj().T) * (0.5 * math.sqrt(variance / K))


def brownian_increment(K: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return gue(K, rng, dt)


@dataclass
class MatrixEnsemble:
    matrices: list
    t: float = 0.0
    seed: int | None = None

    @property
    def N(self) -> int:
        return len(self.matrices)

    @property
    def K(self) -> int:
        return self.matrices[0].shape[0]

    def max_spectral_norm(self) -> float:
        return max(float(np.linalg.norm(x, 2)) for x in self.matrices)

    def hermiticity_residual(self) -> float:
        return max(float(np.max(np.abs(x - x.conj().T))) for x in self.matrices)


def semicircular_ensemble(N: int, K: int, rng: np.random.Generator, t: float = 0.0) -> MatrixEnsemble:
    """Independent GUE matrices normalized to unit variance."""
    return MatrixEnsemble([gue(K, rng) for _ in range(N)], t)


class _WordEvaluator:
    """Memoized products X_w over an ensemble."""

    def __init__(self, matrices):
        self.x = matrices
        K = matrices[0].shape[0]
        self.cache: dict = {(): np.eye(K, dtype=complex)}

    def __call__(self, w: Word) -> np.ndarray:
        m = self.cache.get(w)
        if m is None:
            m = self.x[w[0]] if len(w) == 1 else self.x[w[0]] @ self(w[1:])
            self.cache[w] = m
        return m


def _guard(ens: MatrixEnsemble, rho: float | None):
    if rho is not None:
        norm = ens.max_spectral_norm()
        if norm >= rho:
            raise NormGuardError(f"spectral norm {norm:.4f} reached the guard {rho}")


def evaluate_on_matrices(f, ens: MatrixEnsemble, W: np.ndarray | None = None,
                         rho: float | None = None) -> np.ndarray:
    """f(x) for a polynomial, or Σ c·a(x) W b(x) for a tensor series."""
    _guard(ens, rho)
    ev = _WordEvaluator(ens.matrices)
    K = ens.K
    out = np.zeros((K, K), dtype=complex)
    if isinstance(f, NCPolynomial):
        for w, c in f.terms.items():
            out += c * ev(w)
        return out
    if isinstance(f, Tensor2Series):
        if W is None:
            raise ValueError("tensor evaluation needs a matrix W")
        for (a, b), c in f.terms.items():
            left = W if not a else ev(a) @ W
            out += c * (left if not b else left @ ev(b))
        return out
    raise TypeError(f"cannot evaluate {type(f).__name__}")


def empirical_moments(ens: MatrixEnsemble, words) -> dict:
    ev = _WordEvaluator(ens.matrices)
    return {tuple(w): float(np.real(ntrace(ev(tuple(w))))) for w in words}


@dataclass
class SDEConfig:
    """dX_i = Σ_k Ψ_ik(X) # dS_k − ½ ξ_i(X) dt."""

    psi: list
    xi: list
    dt: float
    T: float
    K: int
    seed: int = 0
    norm_guard: float | None = None
    moment_degree: int = 4
    sample_every: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.T < 0:
            raise ValueError("T must be non-negative")

    @property
    def N(self) -> int:
        return len(self.psi)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


def ou_config(N: int, **kw) -> SDEConfig:
    """Ψ = identity, ξ_j = X_j: free Ornstein–Uhlenbeck process."""
    one, zero = Tensor2Series.one(N), Tensor2Series(N)
    psi = [[one if i == k else zero for k in range(N)] for i in range(N)]
    xi = [NCPolynomial.variable(N, j) for j in range(N)]
    return SDEConfig(psi, xi, **kw)


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream per (master seed, trajectory index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _is_identity(t: Tensor2Series) -> bool:
    return t.terms == {((), ()): 1}


def em_step(cfg: SDEConfig, ens: MatrixEnsemble, incs: list, dt: float,
            stats: dict | None = None) -> MatrixEnsemble:
    """One Euler–Maruyama step with the given Brownian increments.

    The Hermiticity residual before re-symmetrization is recorded in
    ``stats["hermiticity"]`` as a running maximum.
    """
    N = cfg.N
    new = []
    for i in range(N):
        x = ens.matrices[i].astype(complex, copy=True)
        for k in range(N):
            p = cfg.psi[i][k]
            if not p.terms:
                continue
            x += incs[k] if _is_identity(p) else evaluate_on_matrices(p, ens, incs[k])
        if cfg.xi[i].terms:
            x -= 0.5 * dt * evaluate_on_matrices(cfg.xi[i], ens)
        new.append(x)
    out = MatrixEnsemble(new, ens.t + dt, ens.seed)
    herm = out.hermiticity_residual()
    if not np.isfinite(herm):
        raise NonFiniteError(f"non-finite entries at t = {out.t}")
    if stats is not None:
        stats["hermiticity"] = max(stats.get("hermiticity", 0.0), herm)
    out.matrices = [hermitize(x) for x in out.matrices]
    _guard(out, cfg.norm_guard)
    return out


@dataclass
class Trajectory:
    times: list
    moments: list
    final: MatrixEnsemble
    initial: MatrixEnsemble
    max_hermiticity_residual: float
    words: list = field(default_factory=list)


def run_sde(cfg: SDEConfig, x0: MatrixEnsemble | None = None, index: int = 0,
            increments: list | None = None) -> Trajectory:
    """Integrate from ``x0`` (independent GUE by default) and sample moments.

    ``increments`` optionally supplies the Brownian increments per step, so
    several runs can share a path.
    """
    rng = trajectory_rng(cfg.seed, index)
    if x0 is None:
        x0 = semicircular_ensemble(cfg.N, cfg.K, rng)
    x0.seed = cfg.seed
    words = all_words(cfg.N, cfg.moment_degree, 1)
    ens = x0
    times, moments = [0.0], [empirical_moments(ens, words)]
    stats: dict = {}
    every = cfg.sample_every or cfg.steps
    for step in range(cfg.steps):
        incs = increments[step] if increments is not None else \
            [brownian_increment(cfg.K, cfg.dt, rng) for _ in range(cfg.N)]
        ens = em_step(cfg, ens, incs, cfg.dt, stats)
        if (step + 1) % every == 0 or step + 1 == cfg.steps:
            times.append((step + 1) * cfg.dt)
            moments.append(empirical_moments(ens, words))
    return Trajectory(times, moments, ens, x0, stats.get("hermiticity", 0.0), words)


def moment_drift(cfg: SDEConfig, seeds) -> dict:
    """Seed-averaged |m_w(T) − m_w(0)| statistics for all words up to the moment degree."""
    starts, ends = [], []
    for s in seeds:
        c = SDEConfig(cfg.psi, cfg.xi, cfg.dt, cfg.T, cfg.K, s, cfg.norm_guard, cfg.moment_degree)
        tr = run_sde(c)
        starts.append(tr.moments[0])
        ends.append(tr.moments[-1])
    words = list(starts[0])
    mean_drift = {w: abs(np.mean([e[w] for e in ends]) - np.mean([s[w] for s in starts]))
                  for w in words}
    per_seed = {w: max(abs(e[w] - s[w]) for s, e in zip(starts, ends)) for w in words}
    worst = max(mean_drift, key=mean_drift.get)
    return {"mean_drift": mean_drift, "max_mean_drift": mean_drift[worst], "worst_word": worst,
            "max_per_seed_drift": max(per_seed.values())}


# ---------------------------------------------------------------------------
# coupling and step-size studies

@dataclass
class CouplingResult:
    times: list
    distances: list
    slope: float
    intercept: float


def loglog_fit(ts, ds) -> tuple[float, float]:
    slope, intercept = np.polyfit(np.log(ts), np.log(ds), 1)
    return float(slope), float(intercept)


def coupling_experiment(cfg: SDEConfig, t_grid, xi_tensor: list | None = None,
                        x0: MatrixEnsemble | None = None, index: int = 0) -> CouplingResult:
    """d(t) = max_j ‖x_j(t) − (x_j(0) + Σ_k Ψ_jk(x(0)) # s_k(t))‖₂ on a shared Brownian path.

    ``xi_tensor[j][k]`` defaults to ``cfg.psi``; s_k(t) is the running sum of
    the increments driving the SDE.
    """
    rng = trajectory_rng(cfg.seed, index)
    N, K = cfg.N, cfg.K
    if x0 is None:
        x0 = semicircular_ensemble(N, K, rng)
    coef = cfg.psi if xi_tensor is None else xi_tensor
    grid_steps = sorted({int(round(t / cfg.dt)) for t in t_grid})
    if grid_steps and grid_steps[0] <= 0:
        raise ValueError("grid times must be positive multiples of dt")
    ens = x0
    s = [np.zeros((K, K), dtype=complex) for _ in range(N)]
    times, dists = [], []
    for step in range(1, grid_steps[-1] + 1):
        incs = [brownian_increment(K, cfg.dt, rng) for _ in range(N)]
        s = [a + b for a, b in zip(s, incs)]
        ens = em_step(cfg, ens, incs, cfg.dt)
        if step in grid_steps:
            d = 0.0
            for j in range(N):
                approx = x0.matrices[j].astype(complex)
                for k in range(N):
                    p = coef[j][k]
                    if p.terms:
                        approx = approx + (s[k] if _is_identity(p) else evaluate_on_matrices(p, x0, s[k]))
                d = max(d, l2_norm(ens.matrices[j] - approx))
            times.append(step * cfg.dt)
            dists.append(d)
    slope, intercept = loglog_fit(times, dists)
    return CouplingResult(times, dists, slope, intercept)


def step_size_study(cfg: SDEConfig, factors=(1, 2, 4, 8, 16), index: int = 0) -> dict:
    """Strong error at T of coarse runs against the finest run on one Brownian path."""
    rng = trajectory_rng(cfg.seed, index)
    N, K = cfg.N, cfg.K
    x0 = semicircular_ensemble(N, K, rng)
    fine = [[brownian_increment(K, cfg.dt, rng) for _ in range(N)] for _ in range(cfg.steps)]

    def run(m):
        ens = MatrixEnsemble([x.copy() for x in x0.matrices])
        for start in range(0, cfg.steps, m):
            incs = [sum(fine[s][k] for s in range(start, start + m)) for k in range(N)]
            ens = em_step(cfg, ens, incs, m * cfg.dt)
        return ens

    if any(cfg.steps % m for m in factors):
        raise ValueError("step count must be divisible by every factor")
    ref = run(1)
    dts, errs = [], []
    for m in factors[1:]:
        e = run(m)
        dts.append(m * cfg.dt)
        errs.append(max(l2_norm(a - b) for a, b in zip(e.matrices, ref.matrices)))
    slope, _ = loglog_fit(dts, errs)
    return {"dts": dts, "errors": errs, "slope": slope}


# ---------------------------------------------------------------------------
# rotation flow

def rotation_flow(t: float, x: list, s: list) -> tuple[list, list]:
    """α_t(x) = cos t·x + sin t·s, α_t(s) = −sin t·x + cos t·s."""
    c, sn = math.cos(t), math.sin(t)
    return ([c * a + sn * b for a, b in zip(x, s)], [-sn * a + c * b for a, b in zip(x, s)])


def _max_rotated_norm(x: np.ndarray, s: np.ndarray, t: float) -> float:
    """max_{0≤r≤t} ‖cos r·x + sin r·s‖₂ from the quadratic form in (cos r, sin r)."""
    K = x.shape[0]
    a = np.sum(np.abs(x) ** 2) / K
    c = np.sum(np.abs(s) ** 2) / K
    b = float(np.real(np.sum(np.conj(x) * s))) / K
    cands = [0.0, t]
    phase = math.atan2(b, (a - c) / 2)
    for k in range(-2, 4):
        r = (phase + k * math.pi) / 2
        if 0 <= r <= t:
            cands.append(r)
    vals = [(a + c) / 2 + (a - c) / 2 * math.cos(2 * r) + b * math.sin(2 * r) for r in cands]
    return math.sqrt(max(max(vals), 0.0))


def rotation_remainder(t: float, x: list, s: list) -> list:
    """Per generator: (‖α_t(x_j) − (x_j + t s_j)‖₂, (t²/2)·max_{r≤t}‖α_r(x_j)‖₂)."""
    rows = []
    c, sn = math.cos(t), math.sin(t)
    for a, b in zip(x, s):
        lhs = l2_norm((c - 1) * a + (sn - t) * b)
        bound = 0.5 * t * t * _max_rotated_norm(a, b, t)
        rows.append((lhs, bound))
    return rows
