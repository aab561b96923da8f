"""Linear stability of the equilibria and Hopf crossings in the reporting delay.

At an endemic point the characteristic function with the uniform kernel is

    P(z; T, L) = z^4 + A3 z^3 + A2 z^2 + A1 z + A0
                 + (B2 z^2 + B1 z + B0) (1 - exp(-z L)) / (z L) exp(-z T).

Purely imaginary roots ``z = +-iw`` exist exactly when ``K(w^2) = 0``; for
each such ``w`` the delays at which they occur form a ladder
``T_n = T* + 2 pi n / w``.  The sign of ``K'`` at the root fixes the crossing
direction, and counting crossings along ``T`` gives the stability intervals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .equilibria import EquilibriumPoint
from .model import ModelParams, r0

__all__ = [
    "DegenerateFrequency",
    "Tangency",
    "TangencyWarning",
    "NegativeCount",
    "LEFT_TO_RIGHT",
    "RIGHT_TO_LEFT",
    "LinearizationAmplitudes",
    "CharCoeffs",
    "KRoot",
    "UndelayedVerdict",
    "HopfRoot",
    "StabilityInterval",
    "HopfSummary",
    "dfe_eigenvalues",
    "linearization_amplitudes",
    "char_coeffs",
    "characteristic",
    "characteristic_derivative",
    "k_eval",
    "k_prime",
    "k_root_bound",
    "k_roots",
    "epsilons",
    "critical_delays",
    "crossing_direction",
    "undelayed_stability",
    "lienard_chipart_cubic",
    "stability_intervals",
]

LEFT_TO_RIGHT = "left_to_right"
RIGHT_TO_LEFT = "right_to_left"

DEGENERACY_TOL = 1e-10
TANGENCY_TOL = 1e-8


class DegenerateFrequency(ArithmeticError):
    """``1 - cos(wL)`` vanishes, so the delay angle is undefined."""


class Tangency(ArithmeticError):
    """``K'`` vanishes at a root: transversality fails."""


class TangencyWarning(RuntimeWarning):
    pass


class NegativeCount(ArithmeticError):
    """A stabilising crossing was met with no unstable pair left to remove."""


# ---------------------------------------------------------------------------
# coefficients


def dfe_eigenvalues(params: ModelParams) -> np.ndarray:
    """Eigenvalues of the linearisation at the disease-free equilibrium.

    The kernel drops out at the DFE, so the spectrum is delay independent.
    """
    p = params
    return np.array(
        [
            -p.mu,
            -(p.rho + p.mu),
            -(p.delta + p.lam + p.mu),
            (p.gamma + p.mu) * (r0(p) - 1.0),
        ]
    )


@dataclass(frozen=True)
class LinearizationAmplitudes:
    """Entries of the endemic linearisation.

    ``k3_amp`` and ``k4_amp`` multiply the kernel's Laplace transform.
    """

    k1: float
    k2: float
    k3_amp: float
    k4_amp: float
    k5: float
    k6: float


def linearization_amplitudes(params: ModelParams, eq: EquilibriumPoint) -> LinearizationAmplitudes:
    p = params
    S, Q, I = eq.S, eq.Q, eq.I
    a = 1.0 + p.alpha * I
    return LinearizationAmplitudes(
        k1=(p.beta + p.q1 + p.q2) * I + p.mu,
        k2=p.delta / a,
        k3_amp=p.q2 * S,
        k4_amp=p.q1 * S + p.alpha * p.delta * Q / a**2,
        k5=p.delta / a + p.sigma * p.beta * I + p.lam + p.mu,
        k6=p.rho + p.mu,
    )


@dataclass(frozen=True)
class CharCoeffs:
    A3: float
    A2: float
    A1: float
    A0: float
    B2: float
    B1: float
    B0: float
    L: float
    c4: float = field(init=False)
    c3: float = field(init=False)
    c2: float = field(init=False)
    c1: float = field(init=False)
    r2: float = field(init=False)
    r1: float = field(init=False)
    r0: float = field(init=False)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"information window L must be > 0, got {self.L}")
        A3, A2, A1, A0 = self.A3, self.A2, self.A1, self.A0
        B2, B1, B0, L = self.B2, self.B1, self.B0, self.L
        derived = dict(
            c4=A3**2 - 2 * A2,
            c3=A2**2 + 2 * A0 - 2 * A1 * A3,
            c2=A1**2 - 2 * A0 * A2,
            c1=A0**2,
            r2=-2 * B2**2 / L**2,
            r1=-2 * (B1**2 - 2 * B0 * B2) / L**2,
            r0=-2 * B0**2 / L**2,
        )
        for k, v in derived.items():
            object.__setattr__(self, k, float(v))

    @property
    def quartic(self) -> np.ndarray:
        """Delay-free part ``z^4 + A3 z^3 + ... + A0`` (highest degree first)."""
        return np.array([1.0, self.A3, self.A2, self.A1, self.A0])

    @property
    def delayed(self) -> np.ndarray:
        return np.array([self.B2, self.B1, self.B0])

    def with_window(self, L: float) -> "CharCoeffs":
        return CharCoeffs(self.A3, self.A2, self.A1, self.A0, self.B2, self.B1, self.B0, L)


def char_coeffs(params: ModelParams, eq: EquilibriumPoint, L: float) -> CharCoeffs:
    """Characteristic coefficients at an endemic equilibrium."""
    if eq.kind != "endemic" or not eq.I > 0:
        raise ValueError("char_coeffs needs an endemic point; use dfe_eigenvalues at the DFE")
    p = params
    beta, sigma, rho, lam, mu = p.beta, p.sigma, p.rho, p.lam, p.mu
    q1, q2 = p.q1, p.q2
    S, Q, I = eq.S, eq.Q, eq.I
    k = linearization_amplitudes(p, eq)
    k1, k2, k5, k6 = k.k1, k.k2, k.k5, k.k6
    M = k.k4_amp
    hq = p.alpha * p.delta * Q / (1.0 + p.alpha * I) ** 2
    b2 = beta**2

    A3 = k1 + k5 + k6
    A2 = (
        k1 * k5 + k5 * k6 + k1 * k6
        - rho * q2 * I - k2 * q1 * I
        + S * b2 * I + Q * sigma**2 * b2 * I
    )
    A1 = (
        k1 * k5 * k6 - k2 * k6 * q1 * I
        + b2 * k5 * S * I + b2 * k6 * S * I
        - lam * rho * q1 * I - rho * k5 * q2 * I
        + sigma * b2 * k2 * Q * I + sigma**2 * b2 * k1 * Q * I
        + sigma**2 * b2 * k6 * I * Q + sigma * b2 * q1 * S * I**2
    )
    A0 = (
        b2 * k5 * k6 * S * I + sigma**2 * b2 * k1 * k6 * I * Q
        + sigma * b2 * k6 * q1 * S * I**2 + sigma * b2 * lam * rho * I * Q
        - sigma**2 * b2 * rho * q2 * Q * I**2 + sigma * b2 * k2 * k6 * Q * I
    )
    B2 = beta * q2 * S * I + beta * (1 - sigma) * M * I
    B1 = (
        (beta * lam + beta * mu * (1 - sigma) + (1 - sigma) * beta * k6) * M * I
        + (beta * k5 + beta * mu) * q2 * S * I
        - sigma * beta * q2 * hq * I**2
    )
    B0 = (
        (beta * k6 * mu * (1 - sigma) + beta * lam * mu) * M * I
        + beta * k5 * mu * q2 * S * I
        - sigma * beta * q2 * mu * hq * I**2
    )
    return CharCoeffs(A3, A2, A1, A0, B2, B1, B0, L)


def characteristic(coeffs: CharCoeffs, zeta, T: float):
    """Evaluate ``P(zeta; T, L)``."""
    zeta = np.asarray(zeta, dtype=complex)
    zl = zeta * coeffs.L
    kern = -np.expm1(-zl) / zl * np.exp(-zeta * T)
    out = np.polyval(coeffs.quartic, zeta) + np.polyval(coeffs.delayed, zeta) * kern
    return out if out.ndim else complex(out)


def characteristic_derivative(coeffs: CharCoeffs, zeta, T: float):
    """``dP/dzeta`` at fixed ``T`` and ``L``."""
    zeta = np.asarray(zeta, dtype=complex)
    L = coeffs.L
    e_l = np.exp(-zeta * L)
    e_t = np.exp(-zeta * T)
    g = (1 - e_l) / (zeta * L)
    dg = (zeta * L * e_l - (1 - e_l)) / (zeta**2 * L)
    bpoly = np.polyval(coeffs.delayed, zeta)
    dbpoly = np.polyval(np.polyder(coeffs.delayed), zeta)
    out = (
        np.polyval(np.polyder(coeffs.quartic), zeta)
        + dbpoly * g * e_t
        + bpoly * dg * e_t
        - T * bpoly * g * e_t
    )
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# K function and its roots


def k_eval(coeffs: CharCoeffs, x):
    """``K(x)``; zero at ``x = w^2`` iff ``|P1(w)| = |P2(w)|``."""
    c = coeffs
    x = np.asarray(x, dtype=float)
    poly = ((((x + c.c4) * x + c.c3) * x + c.c2) * x + c.c1) * x
    osc = 1.0 - np.cos(np.sqrt(x) * c.L)
    out = poly + (c.r2 * x**2 + c.r1 * x + c.r0) * osc
    return out if out.ndim else float(out)


def _k_prime_terms(coeffs: CharCoeffs, x: float) -> np.ndarray:
    c = coeffs
    w = math.sqrt(x)
    s = math.sin(w * c.L)
    osc = 1.0 - math.cos(w * c.L)
    # sin(wL) L / (2w) -> L^2/2 as w -> 0
    sinc_term = c.L * s / (2 * w) if w > 0 else c.L**2 / 2
    return np.array(
        [
            5 * x**4,
            4 * c.c4 * x**3,
            3 * c.c3 * x**2,
            2 * c.c2 * x,
            c.c1,
            (2 * c.r2 * x + c.r1) * osc,
            (c.r2 * x**2 + c.r1 * x + c.r0) * sinc_term,
        ]
    )


def k_prime(coeffs: CharCoeffs, x: float) -> float:
    """Analytic ``K'(x)``."""
    return float(_k_prime_terms(coeffs, x).sum())


def _k_scale(coeffs: CharCoeffs, x: float) -> float:
    c = coeffs
    osc = 1.0 - math.cos(math.sqrt(x) * c.L)
    terms = [x**5, c.c4 * x**4, c.c3 * x**3, c.c2 * x**2, c.c1 * x,
             (abs(c.r2) * x**2 + abs(c.r1) * x + abs(c.r0)) * osc]
    return float(sum(abs(t) for t in terms))


def k_root_bound(coeffs: CharCoeffs) -> float:
    """Upper bound on the positive roots of ``K``.

    Uses ``0 <= 1 - cos <= 2`` to get a polynomial lower bound for ``K``
    whose largest real root caps every root of ``K``.
    """
    c = coeffs
    low = np.array(
        [1.0, c.c4, c.c3, c.c2 - 2 * abs(c.r2), c.c1 - 2 * abs(c.r1), -2 * abs(c.r0)]
    )
    roots = np.roots(low)
    real = roots.real[np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots))]
    top = real.max() if real.size else 0.0
    # Cauchy bound as a fallback when the eigen-solve is inaccurate
    cauchy = 1.0 + np.max(np.abs(low[1:]))
    return float(min(max(top, 0.0) * (1 + 1e-6) + 1e-12, cauchy))


@dataclass(frozen=True)
class KRoot:
    x: float
    dK: float

    @property
    def w(self) -> float:
        return math.sqrt(self.x)

    @property
    def direction(self) -> str:
        return LEFT_TO_RIGHT if self.dK > 0 else RIGHT_TO_LEFT


def k_roots(coeffs: CharCoeffs, x_max: float | None = None, n_grid: int = 20000) -> list[KRoot]:
    """Sign-change roots of ``K`` on ``(0, x_max]``, ascending.

    ``x_max`` defaults to ``10 max(1, c4^2)``; the scan is further capped by
    :func:`k_root_bound`.  The grid is uniform in ``w = sqrt(x)`` and at
    least 50 points per period of ``cos(wL)``.
    """
    if x_max is None:
        x_max = 10.0 * max(1.0, coeffs.c4**2)
    if x_max <= 0:
        raise ValueError("x_max must be positive")
    x_hi = min(x_max, k_root_bound(coeffs))
    if x_hi <= 0:
        return []
    w_hi = math.sqrt(x_hi)
    n = max(n_grid, int(50 * w_hi * coeffs.L / (2 * math.pi)) + 1)
    w = np.linspace(w_hi * 1e-7, w_hi, n)
    xs = w**2
    ks = k_eval(coeffs, xs)
    roots = []
    sign = np.sign(ks)
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        x = brentq(lambda t: k_eval(coeffs, t), xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
        roots.append(_polish(coeffs, x))
    for i in np.flatnonzero(ks == 0):
        roots.append(float(xs[i]))
    out = []
    for x in sorted(roots):
        dk = k_prime(coeffs, x)
        if abs(dk) < TANGENCY_TOL * np.abs(_k_prime_terms(coeffs, x)).sum():
            warnings.warn(f"K'({x:.6g}) = {dk:.3g}: tangency, transversality fails", TangencyWarning)
        out.append(KRoot(x, dk))
    return out


def _polish(coeffs: CharCoeffs, x: float, iters: int = 5) -> float:
    best, fbest = x, abs(k_eval(coeffs, x))
    for _ in range(iters):
        if fbest <= 1e-15 * _k_scale(coeffs, best):
            break
        dk = k_prime(coeffs, best)
        if dk == 0:
            break
        cand = best - k_eval(coeffs, best) / dk
        fc = abs(k_eval(coeffs, cand))
        if not fc < fbest:
            break
        best, fbest = cand, fc
    return best


# ---------------------------------------------------------------------------
# delay angle, ladders, crossing direction


def epsilons(coeffs: CharCoeffs, w: float) -> tuple[float, float]:
    """``(cos(wT), sin(wT))`` required for ``+-iw`` to be a root.

    Closed form of ``e^{-iwT} = -Q(iw) / (B(iw) (1 - e^{-iwL}) / (iwL))``
    split into real and imaginary parts.
    """
    c = coeffs
    if w <= 0:
        raise ValueError("w must be positive")
    L = c.L
    one_m_cos = 1.0 - math.cos(w * L)
    if one_m_cos < DEGENERACY_TOL:
        raise DegenerateFrequency(f"wL = {w * L:.6g} is a multiple of 2 pi")
    s = math.sin(w * L)
    u = c.B0 - c.B2 * w**2
    v = c.B1 * w
    bb = u * u + v * v
    if bb == 0:
        raise DegenerateFrequency(f"delayed polynomial vanishes at iw, w = {w:.6g}")
    n_re = c.A2 * w**2 - w**4 - c.A0
    n_im = c.A3 * w**3 - c.A1 * w
    den = 2.0 * bb * one_m_cos
    eps1 = w * L * (n_re * (v * one_m_cos + u * s) - n_im * (u * one_m_cos - v * s)) / den
    eps2 = -w * L * (n_re * (u * one_m_cos - v * s) + n_im * (v * one_m_cos + u * s)) / den
    return eps1, eps2


def critical_delays(coeffs: CharCoeffs, w: float, T_max: float) -> np.ndarray:
    """Delays ``T_n = T* + 2 pi n / w <= T_max`` with ``T* w`` in ``[0, 2 pi)``."""
    if T_max <= 0:
        raise ValueError("T_max must be positive")
    e1, e2 = epsilons(coeffs, w)
    theta = math.atan2(e2, e1) % (2 * math.pi)
    t0 = theta / w
    period = 2 * math.pi / w
    if t0 > T_max:
        return np.empty(0)
    n = int(math.floor((T_max - t0) / period))
    return t0 + period * np.arange(n + 1)


def crossing_direction(coeffs: CharCoeffs, x: float, tol: float = TANGENCY_TOL) -> str:
    """Direction in which ``+-i sqrt(x)`` crosses the imaginary axis as ``T`` grows.

    ``Re(dz/dT)^{-1}`` has the sign of ``K'(x)``.
    """
    terms = _k_prime_terms(coeffs, x)
    dk = terms.sum()
    if abs(dk) < tol * np.abs(terms).sum():
        raise Tangency(f"K'({x:.6g}) = {dk:.3g} is numerically zero")
    return LEFT_TO_RIGHT if dk > 0 else RIGHT_TO_LEFT


# ---------------------------------------------------------------------------
# delay-free checks


@dataclass(frozen=True)
class UndelayedVerdict:
    stable: bool
    positivity: tuple  # (A3, A2+B2, A1+B1, A0+B0)
    hurwitz: float


def undelayed_stability(coeffs: CharCoeffs) -> UndelayedVerdict:
    """Routh-Hurwitz test of the quartic obtained at ``T = L = 0``."""
    c = coeffs
    a3, a2, a1, a0 = c.A3, c.A2 + c.B2, c.A1 + c.B1, c.A0 + c.B0
    hurwitz = a3 * (a1 * a2 - a3 * a0) - a1**2
    stable = a3 > 0 and a2 > 0 and a1 > 0 and a0 > 0 and hurwitz > 0
    return UndelayedVerdict(bool(stable), (a3, a2, a1, a0), float(hurwitz))


def lienard_chipart_cubic(a2: float, a1: float, a0: float) -> bool:
    """True iff every root of ``z^3 + a2 z^2 + a1 z + a0`` lies in ``Re z < 0``."""
    return bool(a2 > 0 and a1 > 0 and a0 > 0 and a1 * a2 - a0 > 0)


# ---------------------------------------------------------------------------
# stability intervals


@dataclass(frozen=True)
class HopfRoot:
    x: float
    dK: float
    direction: str
    delays: np.ndarray
    residuals: np.ndarray

    @property
    def w(self) -> float:
        return math.sqrt(self.x)


@dataclass(frozen=True)
class StabilityInterval:
    start: float
    end: float
    stable: bool
    unstable_pairs: int


@dataclass(frozen=True)
class HopfSummary:
    roots: list
    intervals: list
    undelayed: UndelayedVerdict
    T_max: float
    status: str = "ok"

    @property
    def events(self) -> list[tuple[float, str, int, int]]:
        """``(T, direction, root index, ladder index)`` sorted by ``T``."""
        ev = [
            (float(T), r.direction, i, n)
            for i, r in enumerate(self.roots)
            for n, T in enumerate(r.delays)
        ]
        return sorted(ev)

    def stable_at(self, T: float) -> bool:
        for iv in self.intervals:
            if iv.start <= T < iv.end:
                return iv.stable
        raise ValueError(f"T = {T} outside (0, {self.T_max})")


def _rhp_pairs_undelayed(coeffs: CharCoeffs) -> int:
    c = coeffs
    q = np.array([1.0, c.A3, c.A2 + c.B2, c.A1 + c.B1, c.A0 + c.B0])
    n = int(np.sum(np.roots(q).real > 0))
    return (n + 1) // 2


def stability_intervals(
    coeffs: CharCoeffs, T_max: float, x_max: float | None = None
) -> HopfSummary:
    """Partition ``(0, T_max)`` into stable and unstable delay intervals.

    Starts from the delay-free verdict and adds (removes) one unstable pair
    at every left-to-right (right-to-left) crossing.  Raises
    :class:`NegativeCount` when a removal would make the count negative.
    """
    undelayed = undelayed_stability(coeffs)
    count = 0 if undelayed.stable else _rhp_pairs_undelayed(coeffs)
    status = "ok" if undelayed.stable else "undelayed-unstable"

    roots = []
    for kr in k_roots(coeffs, x_max=x_max):
        direction = crossing_direction(coeffs, kr.x)
        w = kr.w
        delays = critical_delays(coeffs, w, T_max)
        res = np.abs([characteristic(coeffs, 1j * w, T) for T in delays]) if delays.size else np.empty(0)
        roots.append(HopfRoot(kr.x, kr.dK, direction, delays, np.asarray(res, dtype=float)))

    events = sorted(
        (float(T), r.direction) for r in roots for T in r.delays if 0 < T < T_max
    )
    intervals = []
    start = 0.0
    for T, direction in events:
        if T > start:
            intervals.append(StabilityInterval(start, T, count == 0, count))
            start = T
        if direction == LEFT_TO_RIGHT:
            count += 1
        else:
            if count == 0:
                raise NegativeCount(f"right-to-left crossing at T = {T:.6g} with no unstable pair")
            count -= 1
    intervals.append(StabilityInterval(start, float(T_max), count == 0, count))
    return HopfSummary(roots, intervals, undelayed, float(T_max), status)
