"""Disease-free and endemic equilibria.

Endemic infection levels are the positive roots of a cubic ``A(x)`` obtained
by eliminating ``S``, ``V`` and ``Q`` from the steady-state equations.  The
remaining components are recovered by back-substitution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import ModelParams, State, r0, rhs

__all__ = [
    "EndemicCubic",
    "EquilibriumPoint",
    "DescartesReport",
    "disease_free_point",
    "endemic_cubic",
    "positive_roots",
    "back_substitute",
    "endemic_points",
    "equilibria",
    "descartes_table",
]


@dataclass(frozen=True)
class EndemicCubic:
    """``A(x) = d3 x^3 + d2 x^2 + d1 x + d0``."""

    d3: float
    d2: float
    d1: float
    d0: float

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([self.d3, self.d2, self.d1, self.d0])

    def __call__(self, x):
        return np.polyval(self.coeffs, x)

    def derivative(self, x):
        return np.polyval(np.polyder(self.coeffs), x)


@dataclass(frozen=True)
class EquilibriumPoint:
    kind: str  # "DFE" or "endemic"
    S: float
    V: float
    Q: float
    I: float
    residual: float
    multiplicity: int = 1
    admissible: bool = True

    @property
    def state(self) -> State:
        return State(self.S, self.V, self.Q, self.I)

    def as_array(self) -> np.ndarray:
        return np.array([self.S, self.V, self.Q, self.I])


class DescartesReport(NamedTuple):
    signs: tuple
    changes: int
    admissible_counts: tuple


def _residual(params: ModelParams, s: State) -> float:
    d = rhs(params, s, s.I)
    return max(abs(d.S), abs(d.V), abs(d.Q), abs(d.I))


def disease_free_point(params: ModelParams) -> EquilibriumPoint:
    s = State(params.carrying, 0.0, 0.0, 0.0)
    return EquilibriumPoint("DFE", *s[:4], residual=_residual(params, s))


def endemic_cubic(params: ModelParams) -> EndemicCubic:
    """Coefficients of the cubic whose positive roots are endemic ``I``."""
    b, beta, gamma = params.b, params.beta, params.gamma
    lam, sigma, mu = params.lam, params.sigma, params.mu
    rho, delta, alpha = params.rho, params.delta, params.alpha
    q1, q2 = params.q1, params.q2
    R0 = r0(params)
    rm = rho + mu
    lm = lam + mu

    d3 = -alpha * sigma * beta * (beta * rm + q1 * rm + mu * q2)
    d2 = (
        rm
        * (
            alpha * sigma * mu * q1 * R0
            + alpha * sigma * beta * mu * (R0 - 1)
            - alpha * beta * lm
            - alpha * mu * q1
            - sigma * beta**2
            - sigma * beta * q1
        )
        - alpha * mu * q2 * lm
        - alpha * mu * lam * q1
        - mu * sigma * beta * q2
    )
    d1 = (
        rm
        * (
            (sigma * beta * mu + alpha * lam * mu + alpha * mu**2) * (R0 - 1)
            + sigma * mu * q1 * R0
            - beta * lm
            - mu * q1
            - beta * delta
        )
        - mu * q2 * lm
        - mu * lam * q1
        - delta * q2 * mu
    )
    d0 = mu * rm * (mu + lam + delta) * (R0 - 1)
    return EndemicCubic(d3, d2, d1, d0)


def _newton(cubic: EndemicCubic, x: float, iters: int = 50) -> float:
    for _ in range(iters):
        fp = cubic.derivative(x)
        if fp == 0:
            break
        step = cubic(x) / fp
        x_new = x - step
        if not np.isfinite(x_new):
            break
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            return x_new
        # keep the best iterate; near a double root Newton creeps
        if abs(cubic(x_new)) > abs(cubic(x)):
            break
        x = x_new
    return x


def _real_roots(cubic: EndemicCubic, merge_tol: float) -> list[float]:
    c = cubic.coeffs
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return []
    eig = np.roots(c[nz[0]:])
    out = []
    for z in eig:
        if abs(z.imag) <= merge_tol * max(1.0, abs(z.real)):
            out.append(_newton(cubic, float(z.real)))
    return sorted(out)


def positive_roots(
    cubic: EndemicCubic, tol: float = 1e-12, merge_tol: float = 1e-4
) -> list[tuple[float, int]]:
    """Positive real roots of ``A`` with multiplicities, ascending.

    Roots come from the companion-matrix eigenvalues, polished by Newton.
    Roots closer than ``merge_tol * max(1, |x|)`` are reported once with
    their combined multiplicity.  Roots ``<= tol`` are discarded.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    roots = [x for x in _real_roots(cubic, merge_tol) if x > tol]
    clusters: list[list[float]] = []
    for x in roots:
        if clusters and abs(x - clusters[-1][-1]) < merge_tol * max(1.0, abs(x)):
            clusters[-1].append(x)
        else:
            clusters.append([x])
    return [(float(np.mean(c)), len(c)) for c in clusters]


def back_substitute(params: ModelParams, I: float) -> State:
    """Recover ``(S, V, Q)`` from an endemic infection level ``I``."""
    b, beta, lam = params.b, params.beta, params.lam
    sigma, mu, rho = params.sigma, params.mu, params.rho
    delta, alpha, q1, q2 = params.delta, params.alpha, params.q1, params.q2
    R0 = r0(params)
    lm = lam + mu
    a = 1.0 + alpha * I
    den = mu * R0 * (a * (sigma * q1 * I + sigma * beta * I + lm) + delta)
    Q = b * q1 * a * I / den
    S = b * (a * (sigma * beta * I + lm) + delta) / den
    V = (b * q2 * (a * (sigma * beta * I + lm) + delta) * I + lam * q1 * b * a * I) / (den * (rho + mu))
    return State(S, V, Q, I)


def endemic_points(params: ModelParams, tol: float | None = None) -> list[EquilibriumPoint]:
    """All endemic equilibria, ascending in ``I``.

    Points with a negative back-substituted component are returned with
    ``admissible=False`` rather than dropped.  Nearly coincident roots
    (a numerically double root) each yield their own point, tagged with the
    cluster multiplicity.
    """
    if tol is None:
        tol = 1e-12 * params.carrying
    cubic = endemic_cubic(params)
    merge_tol = 1e-4
    clusters = positive_roots(cubic, tol=tol, merge_tol=merge_tol)
    raw = [x for x in _real_roots(cubic, merge_tol) if x > tol]
    points = []
    seen: list[float] = []
    for x in raw:
        if any(abs(x - y) <= 1e-13 * max(1.0, abs(x)) for y in seen):
            continue
        seen.append(x)
        mult = next(m for c, m in clusters if abs(c - x) < merge_tol * max(1.0, abs(x)))
        s = back_substitute(params, x)
        ok = min(s.S, s.V, s.Q) >= 0
        points.append(
            EquilibriumPoint(
                "endemic", *s[:4], residual=_residual(params, s), multiplicity=mult, admissible=ok
            )
        )
    return points


def equilibria(params: ModelParams) -> list[EquilibriumPoint]:
    """DFE followed by the admissible endemic points."""
    return [disease_free_point(params)] + [p for p in endemic_points(params) if p.admissible]


def _admissible_distinct(changes: int) -> tuple:
    # counts with multiplicity are changes, changes-2, ...; merging roots
    # lets any distinct count between 1 and that maximum occur
    with_mult = list(range(changes, -1, -2))
    top = max(with_mult)
    counts = set(range(1, top + 1))
    if 0 in with_mult:
        counts.add(0)
    return tuple(sorted(counts))


def descartes_table(cubic: EndemicCubic) -> DescartesReport:
    """Sign pattern of ``(d3, d2, d1, d0)`` and admissible positive-root counts."""
    signs = tuple(int(np.sign(c)) for c in cubic.coeffs)
    nonzero = [s for s in signs if s != 0]
    changes = sum(1 for u, v in zip(nonzero, nonzero[1:]) if u != v)
    return DescartesReport(signs, changes, _admissible_distinct(changes))
