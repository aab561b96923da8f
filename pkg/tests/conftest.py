import csv
from pathlib import Path

import numpy as np
import pytest

from epiwave import ModelParams, UniformKernel, beta_from_r0, endemic_points

DATA = Path(__file__).parent / "data"


def read_table(name):
    with open(DATA / name) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def baseline_params(R0=2.5, **changes) -> ModelParams:
    b = mu = 1 / 80
    gamma = 24.0
    kw = dict(b=b, beta=beta_from_r0(R0, b, mu, gamma), gamma=gamma, lam=0.1, sigma=0.3,
              mu=mu, rho=0.1, delta=12.0, alpha=1.0, q1=75.0, q2=10.0)
    kw.update(changes)
    return ModelParams(**kw)


def random_params(rng: np.random.Generator, R0=None) -> ModelParams:
    """Parameters scattered over a few orders of magnitude around plausible values."""
    b = mu = 10 ** rng.uniform(-2, -1)
    gamma = 10 ** rng.uniform(-1, 1.5)
    if R0 is None:
        R0 = rng.uniform(0.3, 6.0)
    return ModelParams(
        b=b, beta=beta_from_r0(R0, b, mu, gamma), gamma=gamma,
        lam=10 ** rng.uniform(-3, 0), sigma=rng.uniform(0, 0.9), mu=mu,
        rho=10 ** rng.uniform(-2, 0.5), delta=10 ** rng.uniform(-0.5, 2),
        alpha=10 ** rng.uniform(-1, 2), q1=10 ** rng.uniform(-0.5, 2.5),
        q2=10 ** rng.uniform(-0.5, 2),
    )


@pytest.fixture
def baseline():
    return baseline_params()


@pytest.fixture
def baseline_eq(baseline):
    (eq,) = [e for e in endemic_points(baseline) if e.admissible]
    return eq


@pytest.fixture
def kernel():
    return UniformKernel(0.5, 0.25)
