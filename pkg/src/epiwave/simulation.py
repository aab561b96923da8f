"""Forward integration of the delay system and trajectory classification.

Time stepping is explicit Euler.  The history integral ``(f * I)(t_i)`` is a
left rectangle sum over the stored grid values of ``I``::

    (f * I)(t_i) ~= sum_j f(j dt) I(t_i - j dt) dt,   j = 0 .. N_tau - 1

so a constant history is reproduced exactly.  For the uniform kernel only the
``L / dt`` indices with ``j dt`` in ``[T, T + L)`` contribute, each with weight
``dt / L``, and the sum is updated in O(1) per step.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .equilibria import EquilibriumPoint, disease_free_point, endemic_points
from .model import ModelParams, State, UniformKernel

__all__ = [
    "StepTooLarge",
    "NonIntegralDelay",
    "TabulatedKernel",
    "Trajectory",
    "TrajectoryVerdict",
    "simulate",
    "classify",
    "lyapunov_w",
    "multistability_probe",
    "default_dt",
]


class StepTooLarge(ArithmeticError):
    """A component went negative beyond the scheme tolerance."""


class NonIntegralDelay(ValueError):
    """The kernel support is not a whole number of time steps."""


@dataclass(frozen=True)
class TabulatedKernel:
    """Non-negative kernel sampled on ``a_k = k * da``, zero beyond the table.

    The density is interpolated onto the simulation grid and renormalised so
    the discrete weights sum to one.
    """

    density: np.ndarray
    da: float

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise ValueError("density must be a 1-D table with at least two samples")
        if np.any(d < 0) or not np.any(d > 0):
            raise ValueError("density must be non-negative and not identically zero")
        if not self.da > 0:
            raise ValueError("da must be positive")
        object.__setattr__(self, "density", d)

    @property
    def tau(self) -> float:
        return (self.density.size - 1) * self.da

    def weights(self, dt: float) -> np.ndarray:
        n = _steps(self.tau, dt, "kernel support")
        grid = np.arange(max(n, 1)) * dt
        w = np.interp(grid, np.arange(self.density.size) * self.da, self.density)
        if w.sum() <= 0:
            raise ValueError("kernel has no mass on the simulation grid")
        return w / w.sum()


@dataclass
class Trajectory:
    """Simulation output sampled every ``stride`` steps."""

    params: ModelParams
    t: np.ndarray
    S: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    I: np.ndarray
    convI: np.ndarray
    R: np.ndarray | None = None
    W: np.ndarray | None = None

    @property
    def states(self) -> np.ndarray:
        """Array of shape ``(n, 4)`` with columns S, V, Q, I."""
        return np.column_stack([self.S, self.V, self.Q, self.I])

    @property
    def total(self) -> np.ndarray:
        return self.S + self.V + self.Q + self.I

    def final_state(self) -> State:
        R = None if self.R is None else float(self.R[-1])
        return State(float(self.S[-1]), float(self.V[-1]), float(self.Q[-1]), float(self.I[-1]), R)

    def to_csv(self, path=None, stride: int = 1) -> str:
        """Write ``t,S,V,Q,I[,R],convI[,W]`` rows; returns the text."""
        cols = [("t", self.t), ("S", self.S), ("V", self.V), ("Q", self.Q), ("I", self.I)]
        if self.R is not None:
            cols.append(("R", self.R))
        cols.append(("convI", self.convI))
        if self.W is not None:
            cols.append(("W", self.W))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([c for c, _ in cols])
        data = np.column_stack([v for _, v in cols])[::stride]
        for row in data:
            writer.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class TrajectoryVerdict:
    label: str  # converged_DFE | converged_endemic | periodic | undetermined
    equilibrium: EquilibriumPoint | None = None
    deviation: float = math.nan
    amplitude: float = math.nan
    period: float = math.nan
    tail_start: float = math.nan

    def describe(self) -> str:
        if self.label == "converged_endemic":
            return f"converged_endemic I={self.equilibrium.I:.6g} (max deviation {self.deviation:.3g})"
        if self.label == "converged_DFE":
            return f"converged_DFE (max deviation {self.deviation:.3g})"
        if self.label == "periodic":
            return f"periodic amplitude={self.amplitude:.4g} period={self.period:.4g}"
        return f"undetermined (nearest-equilibrium deviation {self.deviation:.3g})"


def _steps(length: float, dt: float, what: str) -> int:
    n = round(length / dt)
    if abs(n * dt - length) > 1e-9 * max(1.0, length):
        raise NonIntegralDelay(f"{what} {length} is not a multiple of dt = {dt}")
    return int(n)


def default_dt(kernel: UniformKernel, params: ModelParams) -> float:
    """``min(L, 1/gamma) / 50``, shrunk so that ``T`` and ``L`` are whole steps."""
    target = min(kernel.L, 1.0 / params.gamma) / 50.0
    dt = kernel.L / math.ceil(kernel.L / target)
    if kernel.T > 0:
        # refine until T also lands on the grid
        for k in range(1, 10_000):
            cand = dt / k
            if abs(round(kernel.T / cand) * cand - kernel.T) <= 1e-9 * max(1.0, kernel.T):
                return cand
        raise NonIntegralDelay(f"no common grid step for T = {kernel.T} and L = {kernel.L}")
    return dt


def lyapunov_w(params: ModelParams, s) -> float:
    """Lyapunov function for the disease-free state (valid when ``R0 <= 1``).

    ``W = (S + V + Q + I - b/mu)^2 / 2 + (2 mu + gamma) I / beta``.
    Accepts a :class:`State` or arrays ``(S, V, Q, I)`` broadcasting elementwise.
    """
    S, V, Q, I = s[0], s[1], s[2], s[3]
    total = np.asarray(S) + V + Q + I
    W = 0.5 * (total - params.carrying) ** 2 + (2 * params.mu + params.gamma) / params.beta * np.asarray(I)
    return W if np.ndim(W) else float(W)


def _history(phi, tau_steps: int, dt: float) -> tuple[State, np.ndarray]:
    """Initial state and the I-history on ``-tau .. 0`` (oldest first)."""
    if callable(phi):
        theta = -dt * np.arange(tau_steps, -1, -1)
        states = [phi(float(th)) for th in theta]
        hist = np.array([s[3] for s in states], dtype=float)
        s0 = states[-1]
    else:
        s0 = phi
        hist = np.full(tau_steps + 1, float(s0[3]))
    if np.any(hist < 0) or min(s0[:4]) < 0:
        raise ValueError("initial history must be non-negative")
    return State(*[float(v) for v in s0[:4]], R=None if len(s0) < 5 or s0[4] is None else float(s0[4])), hist


def simulate(
    params: ModelParams,
    kernel: UniformKernel | TabulatedKernel,
    phi: State | Callable[[float], State],
    t_end: float,
    dt: float | None = None,
    *,
    track_R: bool = False,
    lyapunov: bool = False,
    stride: int = 1,
    neg_tol: float = 1e-6,
) -> Trajectory:
    """Integrate from the history ``phi`` up to ``t_end``.

    Parameters
    ----------
    phi
        Either a constant :class:`State` or a callable ``theta -> State`` on
        ``[-(T + L), 0]``.  Only the ``I`` component of the past matters; the
        other components are read at ``theta = 0``.
    dt
        Time step.  ``T`` and ``L`` (or the tabulated support) must be whole
        multiples of it.  Defaults to :func:`default_dt` for uniform kernels.
    track_R
        Also integrate ``R' = gamma I - mu R`` (initial value ``phi.R`` or 0).
    lyapunov
        Store the Lyapunov function along the path.
    stride
        Keep every ``stride``-th step in the output.
    neg_tol
        :class:`StepTooLarge` is raised once any component drops below
        ``-neg_tol * b / mu``.
    """
    p = params
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if dt is None:
        if not isinstance(kernel, UniformKernel):
            raise ValueError("dt is required for tabulated kernels")
        dt = default_dt(kernel, p)
    if dt <= 0:
        raise ValueError("dt must be positive")

    uniform = isinstance(kernel, UniformKernel)
    if uniform:
        nT = _steps(kernel.T, dt, "reporting delay T")
        nL = _steps(kernel.L, dt, "information window L")
        if nL < 1:
            raise NonIntegralDelay("information window shorter than one step")
        ntau = nT + nL
        weights = None
    else:
        weights = kernel.weights(dt)
        ntau = weights.size

    s0, hist = _history(phi, ntau, dt)
    n = int(round(t_end / dt))
    off = ntau
    Ibuf = np.empty(n + 1 + off)
    Ibuf[: off + 1] = hist

    nout = n // stride + 1
    out = np.empty((nout, 5))
    floor = -neg_tol * p.carrying

    b, beta, gamma, lam = p.b, p.beta, p.gamma, p.lam
    sigma, mu, rho, delta = p.sigma, p.mu, p.rho, p.delta
    alpha, q1, q2 = p.alpha, p.q1, p.q2
    rm, lm, gm = rho + mu, lam + mu, gamma + mu
    sb = sigma * beta

    S, V, Q = s0.S, s0.V, s0.Q
    if uniform:
        csum = math.fsum(Ibuf[off - j] for j in range(nT, nT + nL))
    for i in range(n + 1):
        Ii = Ibuf[off + i]
        if uniform:
            C = csum / nL
        else:
            C = float(np.dot(weights, Ibuf[off + i - np.arange(ntau)]))
        if i % stride == 0:
            out[i // stride] = (S, V, Q, Ii, C)
        if i == n:
            break
        h = delta / (1.0 + alpha * C)
        inf = beta * S * Ii
        leak = sb * Q * Ii
        dS = b - inf - (q1 + q2) * C * S - mu * S + h * Q + rho * V
        dV = q2 * C * S + lam * Q - rm * V
        dQ = q1 * C * S - h * Q - leak - lm * Q
        dI = inf + leak - gm * Ii
        S += dt * dS
        V += dt * dV
        Q += dt * dQ
        Inew = Ii + dt * dI
        Ibuf[off + i + 1] = Inew
        if S < floor or V < floor or Q < floor or Inew < floor:
            raise StepTooLarge(
                f"negative component at t = {(i + 1) * dt:.6g} "
                f"(S={S:.3g}, V={V:.3g}, Q={Q:.3g}, I={Inew:.3g}); reduce dt"
            )
        if uniform:
            csum += Ibuf[off + i + 1 - nT] - Ibuf[off + i + 1 - ntau]

    t = np.arange(nout) * dt * stride
    traj = Trajectory(p, t, out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4])
    if track_R:
        # R does not feed back, so integrate it on the stored I path
        R0_ = 0.0 if s0.R is None else s0.R
        Ifull = Ibuf[off : off + n + 1]
        R = np.empty(n + 1)
        R[0] = R0_
        decay = 1.0 - dt * mu
        for i in range(n):
            R[i + 1] = R[i] * decay + dt * gamma * Ifull[i]
        traj.R = R[::stride]
    if lyapunov:
        traj.W = lyapunov_w(p, (traj.S, traj.V, traj.Q, traj.I))
    return traj


def _peak_stats(x: np.ndarray, t: np.ndarray):
    peaks, _ = find_peaks(x, prominence=0.25 * np.ptp(x))
    if peaks.size < 3:
        return None
    gaps = np.diff(t[peaks])
    return float(gaps.mean()), float(gaps.std() / gaps.mean())


def classify(
    traj: Trajectory,
    eq_candidates: Sequence[EquilibriumPoint] | None = None,
    tail_fraction: float = 0.25,
    conv_tol: float = 1e-4,
) -> TrajectoryVerdict:
    """Label the long-time behaviour of a trajectory.

    Converged when the tail stays within ``conv_tol * b / mu`` of a
    candidate equilibrium in every component.  Periodic when the tail swing
    exceeds ten times that threshold, peaks are regular (spacing CV < 0.05)
    and the swing is not decaying across the tail.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    p = traj.params
    if eq_candidates is None:
        eq_candidates = [disease_free_point(p)] + [e for e in endemic_points(p) if e.admissible]
    k0 = int(len(traj.t) * (1 - tail_fraction))
    tail = traj.states[k0:]
    t_tail = traj.t[k0:]
    thr = conv_tol * p.carrying

    best, best_dev = None, math.inf
    for eq in eq_candidates:
        dev = float(np.max(np.abs(tail - eq.as_array())))
        if dev < best_dev:
            best, best_dev = eq, dev
    if best is not None and best_dev < thr:
        label = "converged_DFE" if best.kind == "DFE" else "converged_endemic"
        return TrajectoryVerdict(label, best, best_dev, tail_start=float(t_tail[0]))

    swing = np.ptp(tail, axis=0)
    comp = int(np.argmax(swing / np.maximum(np.abs(tail).max(axis=0), 1e-300)))
    amplitude = float(swing.max())
    if amplitude > 10 * thr:
        x = tail[:, comp]
        half = len(x) // 2
        sustained = np.ptp(x[half:]) >= 0.9 * np.ptp(x[:half])
        stats = _peak_stats(x, t_tail)
        if sustained and stats is not None and stats[1] < 0.05:
            return TrajectoryVerdict(
                "periodic", best, best_dev, amplitude, stats[0], float(t_tail[0])
            )
    return TrajectoryVerdict("undetermined", best, best_dev, amplitude, tail_start=float(t_tail[0]))


def _probe_one(args):
    params, kernel, level, t_end, dt, tail_fraction = args
    phi = State(max(params.carrying - level, 0.0), 0.0, 0.0, level)
    traj = simulate(params, kernel, phi, t_end, dt, stride=10)
    return classify(traj, tail_fraction=tail_fraction)


def multistability_probe(
    params: ModelParams,
    kernel: UniformKernel,
    initial_I_levels: Sequence[float],
    t_end: float,
    dt: float | None = None,
    *,
    tail_fraction: float = 0.25,
    workers: int | None = 1,
) -> list[TrajectoryVerdict]:
    """Classify runs started from constant histories at several ``I`` levels.

    Each history is ``(b/mu - I0, 0, 0, I0)``.  With ``workers`` other than 1
    the runs go to a process pool; results keep the input order.
    """
    jobs = [(params, kernel, float(lvl), t_end, dt, tail_fraction) for lvl in initial_I_levels]
    if workers == 1 or len(jobs) < 2:
        return [_probe_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_probe_one, jobs))
