"""Closed-form free entropy dimension lower bounds for q-semicircular families."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .wick import q_threshold

OUTSIDE = "outside proven range"

CONSEQUENCES = (
    "δ₀(X₁,…,X_N) > 1: the generated von Neumann algebra has no Cartan subalgebra "
    "(quoted consequence, not computed)",
    "δ₀(X₁,…,X_N) > 1: the generated von Neumann algebra is prime "
    "(quoted consequence, not computed)",
)


def delta0_lower_bound(q, N: int):
    """N(1 − q²N/(1 − q²N)); exact for Fraction or int input."""
    if N < 1:
        raise ValueError("N must be positive")
    x = q * q * N
    if x >= 1:
        raise ValueError(f"q²N = {x} must be below 1")
    return N * (1 - x / (1 - x))


@dataclass
class DimensionReport:
    q: float
    N: int
    threshold: Fraction
    in_range: bool
    eta_bound: float | None
    exceeds_one: bool | None
    status: str
    notes: list = field(default_factory=list)


def report(q, N: int) -> DimensionReport:
    thr = q_threshold(N)
    if abs(q) < thr:
        eta = delta0_lower_bound(q, N)
        exceeds = eta > 1
        notes = list(CONSEQUENCES) if exceeds else []
        return DimensionReport(q, N, thr, True, eta, exceeds, "in proven range", notes)
    return DimensionReport(q, N, thr, False, None, None, OUTSIDE, [])


def limit_check(N: int, q_grid) -> list[DimensionReport]:
    """Reports ordered by decreasing |q|; eta should increase toward N."""
    return [report(q, N) for q in sorted(q_grid, key=abs, reverse=True)]


def is_monotone_toward_N(rows: list[DimensionReport]) -> bool:
    etas = [r.eta_bound for r in rows]
    if any(e is None for e in etas):
        return False
    return all(a < b for a, b in zip(etas, etas[1:])) and all(e <= rows[0].N for e in etas)
