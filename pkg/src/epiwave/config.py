"""Run configuration: INI-style documents, validation and named presets.

A document has up to six sections::

    [params]         b, beta | R0, gamma, lambda, sigma, mu, rho, delta, alpha, q1, q2
    [kernel]         T, L
    [run]            scenario, dt, t_end, T_max, x_max, tail_fraction, stride,
                     workers, track_R, lyapunov, out
    [initial]        S, V, Q, I            (constant initial history)
    [sweep]          parameter, start, stop, step
    [multistability] levels               (comma separated I levels)

Missing fields fall back to the baseline parameter set (``b = mu = 1/80``
per year, ``gamma = 24``, ``R0 = 2.5``, ``L = 1/4`` ...).  ``beta`` may be
given directly or through ``R0``; ``beta = R0 mu (gamma + mu) / b``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields

import numpy as np

from .model import ModelParams, ParameterError, State, UniformKernel, beta_from_r0

__all__ = [
    "ConfigError",
    "SCENARIOS",
    "SWEEP_AXES",
    "BASELINE",
    "PRESETS",
    "SweepAxis",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "preset_text",
    "load_config",
]

SCENARIOS = ("simulate", "equilibria", "hopf", "stability-map", "multistability")
SWEEP_AXES = ("q1", "q2", "delta")

# config key -> ModelParams field
_PARAM_KEYS = {
    "b": "b",
    "beta": "beta",
    "gamma": "gamma",
    "lambda": "lam",
    "sigma": "sigma",
    "mu": "mu",
    "rho": "rho",
    "delta": "delta",
    "alpha": "alpha",
    "q1": "q1",
    "q2": "q2",
}
_SECTIONS = {
    "params": set(_PARAM_KEYS) | {"R0"},
    "kernel": {"T", "L"},
    "run": {"scenario", "dt", "t_end", "T_max", "x_max", "tail_fraction", "stride",
            "workers", "track_R", "lyapunov", "out"},
    "initial": {"S", "V", "Q", "I"},
    "sweep": {"parameter", "start", "stop", "step"},
    "multistability": {"levels"},
}

# quarantine efficacy (1 - sigma) = 70% gives sigma = 0.3
BASELINE = {
    "params": {
        "b": 1 / 80, "mu": 1 / 80, "gamma": 24.0, "lambda": 0.1, "rho": 0.1,
        "sigma": 0.3, "delta": 12.0, "alpha": 1.0, "q1": 75.0, "q2": 10.0, "R0": 2.5,
    },
    "kernel": {"T": 0.5, "L": 0.25},
}


class ConfigError(ValueError):
    """Invalid configuration document; ``str()`` lists every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    start: float
    stop: float
    step: float

    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(max(n, 1))


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    kernel: UniformKernel
    scenario: str | None = None
    dt: float | None = None
    t_end: float = 200.0
    T_max: float = 40.0
    x_max: float | None = None
    tail_fraction: float = 0.25
    stride: int | None = None  # None: about one row per 0.05 time units
    workers: int | None = None
    track_R: bool = False
    lyapunov: bool = False
    out: str | None = None
    initial: State | None = None
    sweep: SweepAxis | None = None
    levels: tuple = field(default=())

    def with_scenario(self, scenario: str) -> "RunConfig":
        from dataclasses import replace

        cfg = replace(self, scenario=scenario)
        _check_scenario(cfg)
        return cfg


def _line_index(text: str) -> dict:
    idx = {}
    section = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            idx[(section, None)] = n
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            idx[(section, m.group(1).strip())] = n
    return idx


def _read_layers(texts) -> tuple[dict, dict, list]:
    """Merge documents in order; later ones win.

    Returns values, line references and problems found so far.
    """
    merged: dict = {}
    where: dict = {}
    problems = []
    for label, text in texts:
        cp = configparser.ConfigParser(
            interpolation=None, default_section="__none__", inline_comment_prefixes=(";", "#")
        )
        cp.optionxform = str
        try:
            cp.read_string(text, source=label)
        except configparser.Error as exc:
            raise ConfigError([f"{label}: {exc}"]) from None
        lines = _line_index(text)
        for sec in cp.sections():
            if sec not in _SECTIONS:
                problems.append(f"{label}:{lines.get((sec, None), '?')}: unknown section [{sec}]")
                continue
            keys = dict(cp.items(sec))
            if sec == "params" and ({"beta", "R0"} & set(keys)):
                for k in ("beta", "R0"):
                    merged.get(sec, {}).pop(k, None)
            for k, v in keys.items():
                ref = f"{label}:{lines.get((sec, k), '?')}"
                if k not in _SECTIONS[sec]:
                    problems.append(f"{ref}: unknown key '{k}' in [{sec}]")
                    continue
                merged.setdefault(sec, {})[k] = v
                where[(sec, k)] = ref
    return merged, where, problems


def _num(sec, key, raw, where, problems, *, positive=False, nonneg=False, integer=False):
    ref = where.get((sec, key), "<default>")
    try:
        v = int(raw) if integer else float(raw)
    except (TypeError, ValueError):
        problems.append(f"{ref}: [{sec}] {key} = {raw!r} is not a number")
        return None
    if not math.isfinite(v):
        problems.append(f"{ref}: [{sec}] {key} must be finite")
        return None
    if positive and not v > 0:
        problems.append(f"{ref}: [{sec}] {key} must be positive, got {v}")
        return None
    if nonneg and v < 0:
        problems.append(f"{ref}: [{sec}] {key} must be non-negative, got {v}")
        return None
    return v


def _bool(sec, key, raw, where, problems):
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    problems.append(f"{where.get((sec, key), '<default>')}: [{sec}] {key} = {raw!r} is not a boolean")
    return False


def _check_scenario(cfg: RunConfig):
    if cfg.scenario is not None and cfg.scenario not in SCENARIOS:
        raise ConfigError([f"unknown scenario {cfg.scenario!r}; choose from {', '.join(SCENARIOS)}"])
    if cfg.scenario == "stability-map" and cfg.sweep is None:
        raise ConfigError(["scenario stability-map needs a [sweep] section"])


def _build(merged: dict, where: dict, problems: list) -> RunConfig:
    base = {k: dict(v) for k, v in BASELINE.items()}
    user_params = merged.get("params", {})
    if "beta" in user_params or "R0" in user_params:
        base["params"].pop("R0", None)
    params_raw = {**base["params"], **user_params}
    if "beta" in params_raw and "R0" in params_raw:
        problems.append(f"{where.get(('params', 'beta'), '<input>')}: give either beta or R0, not both")

    vals = {}
    n_before = len(problems)
    for key in list(_PARAM_KEYS) + ["R0"]:
        if key in params_raw:
            vals[key] = _num("params", key, params_raw[key], where, problems)
    params = None
    if len(problems) == n_before:
        if "R0" in vals:
            vals["beta"] = beta_from_r0(vals.pop("R0"), vals["b"], vals["mu"], vals["gamma"])
        kw = {_PARAM_KEYS[k]: v for k, v in vals.items()}
        try:
            params = ModelParams(**kw)
        except ParameterError as exc:
            name = str(exc).split()[0]
            key = next((k for k, f in _PARAM_KEYS.items() if f == name), name)
            ref = where.get(("params", key), where.get(("params", "R0"), "<default>"))
            problems.append(f"{ref}: [params] {exc}")

    kern_raw = {**base["kernel"], **merged.get("kernel", {})}
    T = _num("kernel", "T", kern_raw["T"], where, problems, nonneg=True)
    L = _num("kernel", "L", kern_raw["L"], where, problems, positive=True)

    run = merged.get("run", {})
    opts: dict = {}
    if "scenario" in run:
        opts["scenario"] = run["scenario"].strip()
    for key in ("dt", "t_end", "T_max", "x_max", "tail_fraction"):
        if key in run:
            opts[key] = _num("run", key, run[key], where, problems, positive=True)
    if "tail_fraction" in opts and opts["tail_fraction"] is not None and opts["tail_fraction"] > 1:
        problems.append(f"{where[('run', 'tail_fraction')]}: [run] tail_fraction must be <= 1")
    for key in ("stride", "workers"):
        if key in run:
            opts[key] = _num("run", key, run[key], where, problems, positive=True, integer=True)
    for key in ("track_R", "lyapunov"):
        if key in run:
            opts[key] = _bool("run", key, run[key], where, problems)
    if "out" in run:
        opts["out"] = run["out"].strip()

    init = merged.get("initial")
    if init:
        missing = {"S", "V", "Q", "I"} - set(init)
        if missing:
            ref = where.get(("initial", sorted(init)[0]), "<config>")
            problems.append(f"{ref}: [initial] needs all of S, V, Q, I (missing {', '.join(sorted(missing))})")
        else:
            comps = [_num("initial", k, init[k], where, problems, nonneg=True) for k in "SVQI"]
            if None not in comps:
                opts["initial"] = State(*comps)

    sw = merged.get("sweep")
    if sw:
        missing = {"parameter", "start", "stop", "step"} - set(sw)
        if missing:
            problems.append(f"[sweep] missing {', '.join(sorted(missing))}")
        else:
            axis = sw["parameter"].strip()
            if axis not in SWEEP_AXES:
                problems.append(
                    f"{where[('sweep', 'parameter')]}: sweep parameter must be one of {', '.join(SWEEP_AXES)}"
                )
            start = _num("sweep", "start", sw["start"], where, problems, positive=True)
            stop = _num("sweep", "stop", sw["stop"], where, problems, positive=True)
            step = _num("sweep", "step", sw["step"], where, problems, positive=True)
            if None not in (start, stop, step) and stop < start:
                problems.append(f"{where[('sweep', 'stop')]}: sweep stop must be >= start")
            if not problems:
                opts["sweep"] = SweepAxis(axis, start, stop, step)

    ms = merged.get("multistability")
    if ms and "levels" in ms:
        parts = [s for s in ms["levels"].split(",") if s.strip()]
        lv = [_num("multistability", "levels", s.strip(), where, problems, nonneg=True) for s in parts]
        if not lv:
            problems.append(f"{where[('multistability', 'levels')]}: levels is empty")
        opts["levels"] = tuple(v for v in lv if v is not None)

    if problems:
        raise ConfigError(problems)
    try:
        kernel = UniformKernel(T, L)
    except ParameterError as exc:
        raise ConfigError([f"[kernel] {exc}"]) from None
    cfg = RunConfig(params=params, kernel=kernel, **opts)
    _check_scenario(cfg)
    return cfg


def parse_config(text: str, *, preset: str | None = None, source: str = "<config>") -> RunConfig:
    """Parse and validate a configuration document.

    With ``preset`` the named preset is applied first and ``text`` overrides
    it.  Raises :class:`ConfigError` with one line per problem.
    """
    layers = []
    if preset is not None:
        layers.append((f"<preset {preset}>", preset_text(preset)))
    layers.append((source, text))
    return _build(*_read_layers(layers))


def load_config(path: str | None = None, preset: str | None = None) -> RunConfig:
    text = ""
    if path is not None:
        with open(path) as fh:
            text = fh.read()
    return parse_config(text, preset=preset, source=path or "<empty>")


def serialize_config(cfg: RunConfig) -> str:
    """Render a config so that ``parse_config(serialize_config(c)) == c``."""
    out = ["[params]"]
    for key, attr in _PARAM_KEYS.items():
        out.append(f"{key} = {getattr(cfg.params, attr)!r}")
    out += ["", "[kernel]", f"T = {cfg.kernel.T!r}", f"L = {cfg.kernel.L!r}", "", "[run]"]
    defaults = {f.name: f.default for f in fields(RunConfig) if f.name not in ("params", "kernel")}
    for key in ("scenario", "dt", "t_end", "T_max", "x_max", "tail_fraction", "stride",
                "workers", "track_R", "lyapunov", "out"):
        v = getattr(cfg, key)
        if v is None or v == defaults[key]:
            continue
        out.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
    if cfg.initial is not None:
        out += ["", "[initial]"] + [f"{k} = {float(getattr(cfg.initial, k))!r}" for k in "SVQI"]
    if cfg.sweep is not None:
        s = cfg.sweep
        out += ["", "[sweep]", f"parameter = {s.parameter}", f"start = {s.start!r}",
                f"stop = {s.stop!r}", f"step = {s.step!r}"]
    if cfg.levels:
        out += ["", "[multistability]", "levels = " + ", ".join(repr(float(v)) for v in cfg.levels)]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# presets

_EQUILIBRIUM_FIGS = {
    "fig2": dict(alpha=130, sigma=0.5, beta=0.039, mu=0.045, q1=120, q2=90,
                 **{"lambda": 0.002}, delta=140, rho=5, b=0.52, gamma=0.1),
    "fig3": dict(alpha=177.46, sigma=0.5, beta=0.04, mu=0.045, q1=509.99856, q2=30,
                 **{"lambda": 0.00200000043}, delta=140.0001, rho=0.2, b=0.52, gamma=0.1),
    "fig4": dict(alpha=270, sigma=0.5, beta=0.04, mu=0.045, q1=510, q2=30,
                 **{"lambda": 0.002}, delta=140, rho=0.2, b=0.52, gamma=0.1),
    "fig12": dict(alpha=177.46, sigma=0.5, beta=0.04, mu=0.045, q1=509.99856, q2=15,
                  **{"lambda": 0.00200000043}, delta=140.0001, rho=0.2, b=0.52, gamma=0.1),
}

PRESETS = {
    "baseline": {},
    "fig2": {"params": _EQUILIBRIUM_FIGS["fig2"]},
    "fig3": {"params": _EQUILIBRIUM_FIGS["fig3"]},
    "fig4": {"params": _EQUILIBRIUM_FIGS["fig4"]},
    "fig5": {"params": {"R0": 0.5}, "kernel": {"T": 2.0}, "run": {"t_end": 600.0, "tail_fraction": 0.1}},
    "fig6": {"kernel": {"T": 0.5}, "run": {"t_end": 400.0}},
    "fig7": {"kernel": {"T": 0.9}, "run": {"t_end": 400.0}},
    # three coexisting endemic points; delay and window use baseline-like values
    "fig12": {
        "params": _EQUILIBRIUM_FIGS["fig12"],
        "kernel": {"T": 0.5, "L": 0.25},
        # q1 C reaches ~1e3 for large initial I; the default step overshoots S
        "run": {"t_end": 500.0, "dt": 0.0005},
        "multistability": {"levels": "0.01, 2.0"},
    },
    # parameter sweeps for stability charts
    "sweep-q1": {"sweep": {"parameter": "q1", "start": 5, "stop": 200, "step": 5}},
    "sweep-q2": {"sweep": {"parameter": "q2", "start": 1, "stop": 40, "step": 1}},
    "sweep-q2-r5": {
        "params": {"R0": 5.0, "q1": 100.0},
        "sweep": {"parameter": "q2", "start": 1, "stop": 40, "step": 1},
    },
    "sweep-delta": {"sweep": {"parameter": "delta", "start": 1, "stop": 40, "step": 1}},
    # only q2 and R0 differ from the baseline in this sweep
    "sweep-delta-r5": {
        "params": {"R0": 5.0, "q2": 7.0},
        "sweep": {"parameter": "delta", "start": 0.5, "stop": 16, "step": 0.5},
    },
}


def preset_text(name: str) -> str:
    """Configuration document for a named preset."""
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; choose from {', '.join(PRESETS)}"])
    lines = []
    for sec, kv in PRESETS[name].items():
        lines.append(f"[{sec}]")
        lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in kv.items()]
        lines.append("")
    return "\n".join(lines)
