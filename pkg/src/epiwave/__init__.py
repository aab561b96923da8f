"""epiwave: SQIR-V epidemic model with distributed information delay.

Modules
-------
model
    Parameters, the uniform information kernel and the right-hand side.
equilibria
    Disease-free and endemic equilibria via the endemic cubic.
spectral
    Characteristic equation, crossing frequencies, critical delays and
    delay stability intervals at an endemic point.
simulation
    Explicit Euler integration with a rectangle-rule convolution and
    trajectory classification.
config, cli
    Run configuration, presets and the ``epiwave`` command.
"""

from .equilibria import (
    DescartesReport,
    EndemicCubic,
    EquilibriumPoint,
    back_substitute,
    descartes_table,
    disease_free_point,
    endemic_cubic,
    endemic_points,
    equilibria,
    positive_roots,
)
from .model import (
    ModelParams,
    ParameterError,
    Rates,
    State,
    UniformKernel,
    beta_from_r0,
    r0,
    rates,
    rhs,
)
from .simulation import (
    NonIntegralDelay,
    StepTooLarge,
    TabulatedKernel,
    Trajectory,
    TrajectoryVerdict,
    classify,
    lyapunov_w,
    multistability_probe,
    simulate,
)
from .spectral import (
    CharCoeffs,
    DegenerateFrequency,
    HopfSummary,
    NegativeCount,
    Tangency,
    char_coeffs,
    characteristic,
    critical_delays,
    crossing_direction,
    epsilons,
    k_eval,
    k_prime,
    k_roots,
    stability_intervals,
    undelayed_stability,
)

__version__ = "0.1.0"
