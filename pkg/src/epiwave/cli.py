"""Scenario runners and the ``epiwave`` command.

Every runner takes a :class:`~epiwave.config.RunConfig` and returns a
:class:`Report` holding a human-readable summary and named CSV documents.
Output is deterministic: identical configurations give byte-identical CSV.

Exit codes of the command: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import PRESETS, SCENARIOS, ConfigError, RunConfig, load_config
from .equilibria import (
    descartes_table,
    disease_free_point,
    endemic_cubic,
    endemic_points,
    positive_roots,
)
from .model import ParameterError, State
from .simulation import NonIntegralDelay, StepTooLarge, classify, simulate
from .spectral import (
    DegenerateFrequency,
    NegativeCount,
    Tangency,
    TangencyWarning,
    char_coeffs,
    characteristic,
    critical_delays,
    crossing_direction,
    dfe_eigenvalues,
    k_roots,
    stability_intervals,
    undelayed_stability,
)

__all__ = [
    "Report",
    "run_equilibria",
    "run_hopf",
    "run_stability_map",
    "run_simulate",
    "run_multistability",
    "run_scenario",
    "initial_history",
    "main",
]

_NUMERICAL = (NegativeCount, Tangency, DegenerateFrequency, StepTooLarge)


@dataclass
class Report:
    text: str
    csv: dict = field(default_factory=dict)  # file name -> CSV text
    ok: bool = True

    def write(self, out_dir: str) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for name, text in self.csv.items():
            path = os.path.join(out_dir, name)
            with open(path, "w", newline="") as fh:
                fh.write(text)
            paths.append(path)
        return paths


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for v in row])
    return buf.getvalue()


def _stride(cfg: RunConfig, dt: float) -> int:
    return cfg.stride if cfg.stride is not None else max(1, round(0.05 / dt))


def initial_history(cfg: RunConfig) -> State:
    """Constant history used when the config gives none.

    Above threshold: the smallest admissible endemic point with ``I`` raised
    by 10%.  Otherwise the disease-free point with 1% of the population
    moved from ``S`` to ``I``.
    """
    if cfg.initial is not None:
        return cfg.initial
    p = cfg.params
    if p.r0 > 1:
        pts = [e for e in endemic_points(p) if e.admissible]
        if pts:
            e = pts[0]
            return State(e.S, e.V, e.Q, 1.1 * e.I)
    n = p.carrying
    return State(0.99 * n, 0.0, 0.0, 0.01 * n)


# ---------------------------------------------------------------------------
# equilibria


def run_equilibria(cfg: RunConfig) -> Report:
    p = cfg.params
    cubic = endemic_cubic(p)
    desc = descartes_table(cubic)
    roots = positive_roots(cubic, tol=1e-12 * p.carrying)
    points = [disease_free_point(p)] + endemic_points(p)
    sign = {1: "+", -1: "-", 0: "0"}
    lines = [
        f"R0 = {p.r0:.6g}",
        "cubic A(x): d3 = {:.6g}, d2 = {:.6g}, d1 = {:.6g}, d0 = {:.6g}".format(*cubic.coeffs),
        "sign pattern ({}), {} sign change(s); possible distinct positive roots: {}".format(
            " ".join(sign[s] for s in desc.signs), desc.changes,
            ", ".join(map(str, desc.admissible_counts)),
        ),
        "positive roots: "
        + (", ".join(f"{x:.6g}" + (f" (x{m})" if m > 1 else "") for x, m in roots) or "none"),
        "",
        f"{'kind':8s} {'S':>12s} {'V':>12s} {'Q':>12s} {'I':>12s} {'residual':>10s}",
    ]
    for e in points:
        tag = "" if e.admissible else "  (inadmissible)"
        lines.append(
            f"{e.kind:8s} {e.S:12.6g} {e.V:12.6g} {e.Q:12.6g} {e.I:12.6g} {e.residual:10.2g}{tag}"
        )
    rows = [
        (e.kind, e.S, e.V, e.Q, e.I, e.residual, e.multiplicity, str(e.admissible).lower())
        for e in points
    ]
    table = _csv(["kind", "S", "V", "Q", "I", "residual", "multiplicity", "admissible"], rows)
    return Report("\n".join(lines), {"equilibria.csv": table})


# ---------------------------------------------------------------------------
# Hopf analysis


def _hopf_one(cfg: RunConfig, idx: int, eq, lines, delay_rows, interval_rows) -> bool:
    coeffs = char_coeffs(cfg.params, eq, cfg.kernel.L)
    lines.append(f"endemic point {idx}: I = {eq.I:.6g}")
    lines.append(
        "  A3 = {:.6g}, A2 = {:.6g}, A1 = {:.6g}, A0 = {:.6g}; B2 = {:.6g}, B1 = {:.6g}, B0 = {:.6g}".format(
            coeffs.A3, coeffs.A2, coeffs.A1, coeffs.A0, coeffs.B2, coeffs.B1, coeffs.B0
        )
    )
    lines.append(
        f"  c4 = {coeffs.c4:.6g}, c3 = {coeffs.c3:.6g}, c2 = {coeffs.c2:.6g}, c1 = {coeffs.c1:.6g}"
    )
    ok = True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TangencyWarning)
        roots = k_roots(coeffs, x_max=cfg.x_max)
    for wmsg in caught:
        lines.append(f"  warning: {wmsg.message}")
    if not roots:
        verdict = "stable" if undelayed_stability(coeffs).stable else "unstable"
        lines.append(
            f"  K has no positive root: no purely imaginary eigenvalue, "
            f"{verdict} for all T <= {cfg.T_max:g}"
        )
    for j, kr in enumerate(roots):
        w = kr.w
        status = "ok"
        try:
            direction = crossing_direction(coeffs, kr.x)
        except Tangency:
            direction, status, ok = "", "tangency", False
        try:
            delays = critical_delays(coeffs, w, cfg.T_max)
        except DegenerateFrequency:
            delays, status, ok = np.empty(0), "degenerate", False
        lines.append(
            f"  root {j}: x = {kr.x:.6g}, w = {w:.6g}, K'(x) = {kr.dK:.4g}, {direction or status}"
        )
        if delays.size:
            lines.append("    critical delays: " + ", ".join(f"{T:.6g}" for T in delays))
        if not delays.size:
            delay_rows.append((idx, j, kr.x, w, kr.dK, direction, None, None, None, status))
        for n, T in enumerate(delays):
            res = abs(characteristic(coeffs, 1j * w, T))
            delay_rows.append((idx, j, kr.x, w, kr.dK, direction, n, float(T), float(res), status))
    try:
        summary = stability_intervals(coeffs, cfg.T_max, x_max=cfg.x_max)
    except _NUMERICAL as exc:
        lines.append(f"  stability intervals unavailable: {type(exc).__name__}: {exc}")
        interval_rows.append((idx, None, None, None, None, type(exc).__name__))
        return False
    verdict = "stable" if summary.undelayed.stable else "unstable"
    lines.append(f"  without delay: {verdict} (Hurwitz determinant {summary.undelayed.hurwitz:.4g})")
    for iv in summary.intervals:
        label = "stable" if iv.stable else f"unstable ({iv.unstable_pairs} pair(s))"
        lines.append(f"  T in [{iv.start:.6g}, {iv.end:.6g}): {label}")
        interval_rows.append(
            (idx, iv.start, iv.end, "stable" if iv.stable else "unstable", iv.unstable_pairs, summary.status)
        )
    return ok


def run_hopf(cfg: RunConfig) -> Report:
    """Critical delays and stability intervals of every admissible endemic point."""
    p = cfg.params
    pts = [e for e in endemic_points(p) if e.admissible]
    lines = [f"R0 = {p.r0:.6g}, L = {cfg.kernel.L:.6g}, T_max = {cfg.T_max:.6g}"]
    delay_rows: list = []
    interval_rows: list = []
    ok = True
    if not pts:
        ev = dfe_eigenvalues(p)
        lines.append("no endemic equilibrium; disease-free eigenvalues: " + ", ".join(f"{z:.6g}" for z in ev))
        lines.append("disease-free point is " + ("stable" if np.all(ev < 0) else "unstable") + " for every delay")
    if len(pts) > 1:
        lines.append(f"{len(pts)} endemic points; the analysis below treats each separately")
    for idx, eq in enumerate(pts):
        ok &= _hopf_one(cfg, idx, eq, lines, delay_rows, interval_rows)
    return Report(
        "\n".join(lines),
        {
            "hopf_delays.csv": _csv(
                ["equilibrium", "root", "x", "w", "dK", "direction", "n", "T", "residual", "status"],
                delay_rows,
            ),
            "hopf_intervals.csv": _csv(
                ["equilibrium", "start", "end", "verdict", "unstable_pairs", "status"], interval_rows
            ),
        },
        ok,
    )


# ---------------------------------------------------------------------------
# stability map


def _map_point(args):
    """Ladders of one sweep value: ``(T_plus, T_minus, unstable_length, error)``."""
    params, L, T_max, x_max = args
    pts = [e for e in endemic_points(params) if e.admissible]
    if not pts:
        return [], [], math.nan, "no_endemic_point"
    if len(pts) > 1:
        return [], [], math.nan, "multiple_endemic_points"
    coeffs = char_coeffs(params, pts[0], L)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TangencyWarning)
            summary = stability_intervals(coeffs, T_max, x_max=x_max)
    except _NUMERICAL as exc:
        return [], [], math.nan, type(exc).__name__
    plus = [r for r in summary.roots if r.direction == "left_to_right"]
    minus = [r for r in summary.roots if r.direction == "right_to_left"]
    error = ""
    if len(plus) > 1 or len(minus) > 1:
        error = "extra_crossing_frequencies"
    unstable = sum(iv.end - iv.start for iv in summary.intervals if not iv.stable)
    T_plus = list(plus[0].delays) if plus else []
    T_minus = list(minus[0].delays) if minus else []
    return T_plus, T_minus, float(unstable), error


def run_stability_map(cfg: RunConfig) -> Report:
    """Critical-delay ladders ``T_n^+`` and ``T_n^-`` along a parameter sweep.

    One row per (sweep value, ladder index ``n``); a ladder that is shorter
    than the other, or absent, leaves empty fields.  ``unstable_length`` is
    the total length of unstable delay intervals inside ``(0, T_max)``.
    """
    if cfg.sweep is None:
        raise ConfigError(["stability-map needs a [sweep] section"])
    axis = cfg.sweep.parameter
    values = cfg.sweep.values()
    jobs = [
        (cfg.params.replace(**{axis: float(v)}), cfg.kernel.L, cfg.T_max, cfg.x_max) for v in values
    ]
    workers = cfg.workers if cfg.workers is not None else min(len(jobs), os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_map_point, jobs))
    else:
        results = [_map_point(j) for j in jobs]

    rows = []
    ok = True
    lines = [f"sweep {axis} over {len(values)} values, T_max = {cfg.T_max:.6g}"]
    for v, (tp, tm, unstable, error) in zip(values, results):
        if error in {e.__name__ for e in _NUMERICAL}:
            ok = False
        n_rows = max(len(tp), len(tm), 1)
        for n in range(n_rows):
            rows.append((
                float(v), n,
                tp[n] if n < len(tp) else None,
                tm[n] if n < len(tm) else None,
                None if math.isnan(unstable) else unstable,
                error,
            ))
        first = f"T0+ = {tp[0]:.5g}" if tp else "no crossing"
        lines.append(f"  {axis} = {v:.6g}: {first}, unstable length {unstable:.4g} {error}".rstrip())
    table = _csv([axis, "n", "T_plus", "T_minus", "unstable_length", "error"], rows)
    return Report("\n".join(lines), {"stability_map.csv": table}, ok)


# ---------------------------------------------------------------------------
# simulation


def run_simulate(cfg: RunConfig) -> Report:
    phi = initial_history(cfg)
    traj = simulate(
        cfg.params, cfg.kernel, phi, cfg.t_end, cfg.dt,
        track_R=cfg.track_R, lyapunov=cfg.lyapunov,
    )
    verdict = classify(traj, tail_fraction=cfg.tail_fraction)
    text = "\n".join([
        f"R0 = {cfg.params.r0:.6g}, T = {cfg.kernel.T:.6g}, L = {cfg.kernel.L:.6g}, t_end = {cfg.t_end:.6g}",
        "initial history S={:.6g} V={:.6g} Q={:.6g} I={:.6g}".format(*phi[:4]),
        "verdict: " + verdict.describe(),
    ])
    dt = float(traj.t[1] - traj.t[0])
    return Report(text, {"trajectory.csv": traj.to_csv(stride=_stride(cfg, dt))})


def run_multistability(cfg: RunConfig) -> Report:
    """Runs from constant histories ``(b/mu - I0, 0, 0, I0)`` for each level ``I0``."""
    levels = cfg.levels or (0.01 * cfg.params.carrying, 0.5 * cfg.params.carrying)
    p = cfg.params
    candidates = [disease_free_point(p)] + [e for e in endemic_points(p) if e.admissible]
    lines = [
        "equilibria: " + ", ".join(f"{e.kind} I={e.I:.6g}" for e in candidates),
    ]
    out = {}
    rows = []
    for k, level in enumerate(levels):
        phi = State(max(p.carrying - level, 0.0), 0.0, 0.0, float(level))
        traj = simulate(p, cfg.kernel, phi, cfg.t_end, cfg.dt, track_R=cfg.track_R, lyapunov=cfg.lyapunov)
        v = classify(traj, candidates, tail_fraction=cfg.tail_fraction)
        lines.append(f"I0 = {level:.6g}: {v.describe()}")
        dt = float(traj.t[1] - traj.t[0])
        out[f"multistability_{k}.csv"] = traj.to_csv(stride=_stride(cfg, dt))
        rows.append((float(level), v.label, None if v.equilibrium is None else v.equilibrium.I, v.deviation))
    out["multistability.csv"] = _csv(["I0", "verdict", "I_equilibrium", "deviation"], rows)
    return Report("\n".join(lines), out)


_RUNNERS = {
    "equilibria": run_equilibria,
    "hopf": run_hopf,
    "stability-map": run_stability_map,
    "simulate": run_simulate,
    "multistability": run_multistability,
}


def run_scenario(cfg: RunConfig, scenario: str | None = None) -> Report:
    scenario = scenario or cfg.scenario
    if scenario is None:
        raise ConfigError(["no scenario given"])
    cfg = cfg.with_scenario(scenario)
    return _RUNNERS[scenario](cfg)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="epiwave",
        description="Equilibria, delay stability and simulation of the SQIR-V information-delay model.",
    )
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", metavar="PATH", help="INI-style configuration file")
    ap.add_argument("--out", metavar="DIR", help="directory for CSV output (default: config value or '.')")
    ap.add_argument("--preset", choices=sorted(PRESETS), help="named parameter set applied before --config")
    ap.add_argument("--quiet", action="store_true", help="do not print the summary")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.preset)
        report = run_scenario(cfg, args.scenario)
    except (ConfigError, ParameterError, NonIntegralDelay) as exc:
        print(f"epiwave: invalid input:\n{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"epiwave: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL as exc:
        print(f"epiwave: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    out_dir = args.out or cfg.out or "."
    paths = report.write(out_dir)
    if not args.quiet:
        print(report.text)
        for path in paths:
            print(f"wrote {path}")
    if not report.ok:
        print("epiwave: some results are flagged as numerically unreliable", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
