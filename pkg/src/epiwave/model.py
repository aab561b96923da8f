"""Parameters, delay kernel and right-hand side of the SQIR-V delay system.

The state is ``(S, V, Q, I)`` with an optional passive recovered class ``R``.
Every transition that depends on the infection history goes through the
convolved infection level ``(f * I)(t)``, written ``convolved_I`` throughout.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import NamedTuple

import numpy as np

__all__ = [
    "ParameterError",
    "ModelParams",
    "UniformKernel",
    "State",
    "Rates",
    "r0",
    "beta_from_r0",
    "rates",
    "rhs",
]


class ParameterError(ValueError):
    """Raised when a parameter violates the model assumptions."""


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological constants of the model.

    All rates are per unit time (years in the shipped presets).

    Attributes
    ----------
    b : float
        Birth (recruitment) rate.
    beta : float
        Transmission rate.
    gamma : float
        Recovery rate.
    lam : float
        Vaccination rate of quarantined individuals (Q -> V).
    sigma : float
        Residual susceptibility of quarantined individuals, ``0 <= sigma < 1``.
    mu : float
        Natural mortality rate.
    rho : float
        Waning rate of vaccine-induced immunity (V -> S).
    delta : float
        Maximal release rate from quarantine (Q -> S).
    alpha : float
        Sensitivity of the release rate to the infection history.
    q1, q2 : float
        Sensitivities of the quarantine (S -> Q) and vaccination (S -> V)
        rates to the infection history.
    """

    b: float
    beta: float
    gamma: float
    lam: float
    sigma: float
    mu: float
    rho: float
    delta: float
    alpha: float
    q1: float
    q2: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ParameterError(f"{f.name} must be finite, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        for name in ("b", "beta", "gamma", "lam", "mu", "rho"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.sigma < 1.0:
            raise ParameterError(f"sigma must satisfy 0 <= sigma < 1, got {self.sigma}")
        for name in ("q1", "q2", "delta", "alpha"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def carrying(self) -> float:
        """Total population at the disease-free state, ``b / mu``."""
        return self.b / self.mu

    @property
    def r0(self) -> float:
        return r0(self)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class UniformKernel:
    """Uniform information kernel: density ``1/L`` on ``[T, T + L]``.

    ``T`` is the reporting delay and ``L`` the window during which reported
    cases influence behaviour.
    """

    T: float
    L: float

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T >= 0):
            raise ParameterError(f"reporting delay T must be >= 0, got {self.T}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ParameterError(f"information window L must be > 0, got {self.L}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "L", float(self.L))

    @property
    def tau(self) -> float:
        """Length of the history the kernel reads, ``T + L``."""
        return self.T + self.L

    def density(self, a):
        a = np.asarray(a, dtype=float)
        inside = (a >= self.T) & (a <= self.T + self.L)
        return np.where(inside, 1.0 / self.L, 0.0)

    def laplace(self, zeta):
        """Laplace transform ``int f(a) exp(-zeta a) da``."""
        zeta = np.asarray(zeta, dtype=complex)
        zl = zeta * self.L
        small = np.abs(zl) < 1e-8
        safe = np.where(small, 1.0, zl)
        # (1 - e^{-z}) / z -> 1 - z/2 for small z
        ratio = np.where(small, 1.0 - zl / 2.0, -np.expm1(-safe) / safe)
        out = ratio * np.exp(-zeta * self.T)
        return out if out.ndim else complex(out)


class State(NamedTuple):
    """Population densities. ``R`` is optional and never feeds back."""

    S: float
    V: float
    Q: float
    I: float
    R: float | None = None

    @property
    def total(self) -> float:
        """``S + V + Q + I`` (the reduced-system population)."""
        return self.S + self.V + self.Q + self.I


class Rates(NamedTuple):
    g1: float
    g2: float
    h: float


def r0(params: ModelParams) -> float:
    """Basic reproduction number ``b beta / (mu (gamma + mu))``."""
    return params.b * params.beta / (params.mu * (params.gamma + params.mu))


def beta_from_r0(R0: float, b: float, mu: float, gamma: float) -> float:
    """Transmission rate giving a target reproduction number."""
    if R0 < 0:
        raise ParameterError(f"R0 must be non-negative, got {R0}")
    return R0 * mu * (gamma + mu) / b


def rates(params: ModelParams, convolved_I: float) -> Rates:
    """History-dependent transition rates ``(g1, g2, h)``."""
    if convolved_I < 0:
        raise ValueError(f"convolved infection level must be >= 0, got {convolved_I}")
    return Rates(
        params.q1 * convolved_I,
        params.q2 * convolved_I,
        params.delta / (1.0 + params.alpha * convolved_I),
    )


def rhs(params: ModelParams, s: State, convolved_I: float) -> State:
    """Time derivatives of the state given the convolved infection level.

    When ``s.R`` is ``None`` the returned derivative also carries ``R=None``.
    """
    p = params
    S, V, Q, I = s.S, s.V, s.Q, s.I
    g1, g2, h = rates(p, convolved_I)
    infection = p.beta * S * I
    leak = p.sigma * p.beta * Q * I
    dS = p.b - infection - (g1 + g2) * S - p.mu * S + h * Q + p.rho * V
    dV = g2 * S + p.lam * Q - (p.rho + p.mu) * V
    dQ = g1 * S - h * Q - leak - (p.lam + p.mu) * Q
    dI = infection + leak - (p.gamma + p.mu) * I
    dR = None if s.R is None else p.gamma * I - p.mu * s.R
    return State(dS, dV, dQ, dI, dR)
