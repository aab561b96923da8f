import math

import numpy as np
import pytest

from epiwave import (
    NonIntegralDelay,
    State,
    StepTooLarge,
    TabulatedKernel,
    Trajectory,
    UniformKernel,
    classify,
    disease_free_point,
    endemic_points,
    lyapunov_w,
    multistability_probe,
    simulate,
)
from epiwave.simulation import default_dt

from conftest import baseline_params, random_params


def test_default_dt_lands_on_kernel_grid(baseline):
    for T, L in [(0.5, 0.25), (0.9, 0.25), (0.0, 0.25), (2.0, 0.25), (0.37, 0.11)]:
        dt = default_dt(UniformKernel(T, L), baseline)
        assert dt <= min(L, 1 / baseline.gamma) / 50 + 1e-15
        for v in (T, L):
            assert abs(round(v / dt) * dt - v) < 1e-9


def test_constant_history_gives_exact_convolution(baseline, kernel):
    tr = simulate(baseline, kernel, State(0.4, 0.01, 0.001, 3e-4), 1.0, 1e-3)
    assert tr.convI[0] == pytest.approx(3e-4, rel=1e-12)
    assert tr.t[0] == 0 and tr.t[-1] == pytest.approx(1.0)


def test_convolution_of_a_varying_history(baseline):
    k = UniformKernel(0.5, 0.25)
    hist = lambda th: State(0.4, 0.0, 0.0, 1e-3 * (1.5 + math.sin(4 * th)))
    dt = 1e-3
    tr = simulate(baseline, k, hist, dt, dt)
    # exact kernel average of the history at t = 0
    exact = 1e-3 * (1.5 + (math.cos(4 * -0.75) - math.cos(4 * -0.5)) / (4 * 0.25))
    assert tr.convI[0] == pytest.approx(exact, abs=4 * dt * 1e-3)


def test_equilibrium_is_a_fixed_point_of_the_scheme(baseline, baseline_eq, kernel):
    tr = simulate(baseline, kernel, baseline_eq.state, 5.0, 1e-3)
    assert np.max(np.abs(tr.states - baseline_eq.as_array())) < 1e-12


def test_tabulated_uniform_kernel_matches_uniform(baseline, baseline_eq):
    dt = 1e-3
    phi = baseline_eq.state._replace(I=baseline_eq.I * 1.5)
    ref = simulate(baseline, UniformKernel(0.5, 0.25), phi, 20.0, dt)
    # support [0.5, 0.75) sampled so the grid weights coincide with the uniform kernel
    a = np.arange(751) * dt
    dens = np.where((a >= 0.5 - 1e-12) & (a < 0.75 - 1e-12), 4.0, 0.0)
    tab = simulate(baseline, TabulatedKernel(dens, dt), phi, 20.0, dt)
    assert np.max(np.abs(tab.I - ref.I)) < 1e-12


def test_tabulated_kernel_validation():
    with pytest.raises(ValueError):
        TabulatedKernel(np.array([0.0, 0.0]), 0.1)
    with pytest.raises(ValueError):
        TabulatedKernel(np.array([1.0, -1.0, 1.0]), 0.1)
    with pytest.raises(ValueError):
        TabulatedKernel(np.array([1.0, 1.0]), 0.0)
    w = TabulatedKernel(np.ones(11), 0.1).weights(0.05)
    assert w.sum() == pytest.approx(1.0)


def test_non_integral_delay(baseline):
    with pytest.raises(NonIntegralDelay):
        simulate(baseline, UniformKernel(0.5, 0.25), State(0.4, 0, 0, 1e-3), 1.0, 0.3)


def test_step_too_large():
    p = baseline_params(q1=500.0)
    with pytest.raises(StepTooLarge):
        simulate(p, UniformKernel(0.5, 0.25), State(0.5, 0, 0, 0.5), 5.0, 0.05)


def test_negative_history_rejected(baseline, kernel):
    with pytest.raises(ValueError):
        simulate(baseline, kernel, State(0.5, 0, 0, -0.1), 1.0, 1e-3)


def test_invariant_region_over_random_histories():
    """Non-negativity and S + V + Q + I <= b/mu are preserved."""
    rng = np.random.default_rng(2024)
    for _ in range(50):
        p = random_params(rng)
        N = p.carrying
        T = rng.choice([0.0, 0.25, 0.5, 1.0])
        k = UniformKernel(T, 0.25)
        frac = rng.dirichlet(np.ones(5))[:4] * rng.uniform(0.2, 1.0)
        amp, freq = rng.uniform(0, 1), rng.uniform(0.5, 20)
        I0 = frac[3] * N

        def hist(th, frac=frac, amp=amp, freq=freq, I0=I0):
            return State(frac[0] * N, frac[1] * N, frac[2] * N, I0 * (1 + amp * math.sin(freq * th)))

        dt = min(default_dt(k, p), 0.25 / 100)
        tr = simulate(p, k, hist, 3.0, dt)
        assert tr.states.min() >= -1e-9 * N
        assert tr.total.max() <= N * (1 + 1e-12)


@pytest.mark.parametrize("R0", [0.5, 0.9, 1.0])
def test_lyapunov_non_increasing_below_threshold(R0):
    p = baseline_params(R0=R0)
    dt = 1e-3
    for phi in (State(0.5, 0.1, 0.1, 0.3), State(0.99, 0, 0, 0.01)):
        tr = simulate(p, UniformKernel(2.0, 0.25), phi, 30.0, dt, lyapunov=True)
        assert tr.W[0] == pytest.approx(lyapunov_w(p, phi))
        # O(dt) slack per unit time; the observed increments are all negative
        assert np.diff(tr.W).max() <= 1e-3 * dt * tr.W[0]


def test_track_r_and_csv(baseline, baseline_eq, kernel):
    tr = simulate(baseline, kernel, baseline_eq.state._replace(R=0.5), 1.0, 1e-3, track_R=True, lyapunov=True)
    assert tr.R[0] == 0.5
    # R' = gamma I - mu R integrated alongside
    expected = 0.5 + 1e-3 * (baseline.gamma * tr.I[0] - baseline.mu * 0.5)
    assert tr.R[1] == pytest.approx(expected, rel=1e-12)
    text = tr.to_csv(stride=100)
    lines = text.splitlines()
    assert lines[0] == "t,S,V,Q,I,R,convI,W"
    assert len(lines) == 1 + len(range(0, len(tr.t), 100))
    plain = simulate(baseline, kernel, baseline_eq.state, 1.0, 1e-3).to_csv()
    assert plain.splitlines()[0] == "t,S,V,Q,I,convI"
    assert plain == simulate(baseline, kernel, baseline_eq.state, 1.0, 1e-3).to_csv()


def test_stride_thins_output(baseline, baseline_eq, kernel):
    full = simulate(baseline, kernel, baseline_eq.state, 1.0, 1e-3)
    thin = simulate(baseline, kernel, baseline_eq.state, 1.0, 1e-3, stride=10)
    assert np.allclose(thin.t, full.t[::10], rtol=0, atol=1e-12)
    assert np.array_equal(thin.I, full.I[::10])


def _synthetic(p, t, I, S=None):
    n = len(t)
    S = np.full(n, p.carrying) if S is None else S
    z = np.zeros(n)
    return Trajectory(p, t, S, z, z, I, I)


def test_classify_synthetic():
    p = baseline_params(R0=0.5)
    t = np.linspace(0, 100, 20001)
    dfe = _synthetic(p, t, 1e-6 * np.exp(-t))
    assert classify(dfe).label == "converged_DFE"
    wave = _synthetic(p, t, 0.05 * (1.2 + np.sin(2 * np.pi * t / 7.0)))
    v = classify(wave)
    assert v.label == "periodic"
    assert v.period == pytest.approx(7.0, rel=1e-3)
    assert v.amplitude == pytest.approx(0.1, rel=1e-3)
    decaying = _synthetic(p, t, 0.05 * (1.2 + np.exp(-t / 10) * np.sin(t)))
    assert classify(decaying).label == "undetermined"
    with pytest.raises(ValueError):
        classify(dfe, tail_fraction=0.0)


def test_euler_first_order_convergence(baseline, baseline_eq):
    """Halving dt halves the terminal error against a dt/8 reference."""
    k = UniformKernel(0.5, 0.25)
    phi = baseline_eq.state._replace(I=1.1 * baseline_eq.I)
    t_end = 20.0
    ref = simulate(baseline, k, phi, t_end, 0.0025 / 8).final_state()
    errs = []
    for dt in (0.01, 0.005, 0.0025):
        end = simulate(baseline, k, phi, t_end, dt).final_state()
        errs.append(max(abs(a - b) for a, b in zip(end[:4], ref[:4])))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    for r in ratios:
        assert 1.6 < r < 2.4, (errs, ratios)


def test_multistability_probe_parallel_matches_serial():
    p = baseline_params(R0=0.5)
    k = UniformKernel(0.5, 0.25)
    serial = multistability_probe(p, k, [0.01, 0.2], 40.0, 1e-3)
    parallel = multistability_probe(p, k, [0.01, 0.2], 40.0, 1e-3, workers=2)
    assert [v.label for v in serial] == [v.label for v in parallel]
    assert [v.deviation for v in serial] == [v.deviation for v in parallel]


def test_below_threshold_run_reaches_dfe():
    p = baseline_params(R0=0.5)
    tr = simulate(p, UniformKernel(2.0, 0.25), State(0.99, 0, 0, 0.01), 600.0, 1e-3)
    v = classify(tr, tail_fraction=0.1)
    assert v.label == "converged_DFE"
    assert v.equilibrium == disease_free_point(p)


def test_discrete_conservation_with_recovered(baseline, kernel):
    rng = np.random.default_rng(21)
    for _ in range(5):
        phi = State(*rng.uniform(0, 0.3, size=4), R=rng.uniform(0, 0.3))
        dt = default_dt(kernel, baseline)
        tr = simulate(baseline, kernel, phi, 2.0, dt, track_R=True)
        N = tr.total + tr.R
        resid = N[1:] - N[:-1] - dt * (baseline.b - baseline.mu * N[:-1])
        assert np.max(np.abs(resid)) < 1e-14


def test_starts_near_middle_point_drift_away():
    from epiwave.config import PRESETS
    from epiwave import ModelParams

    p = ModelParams(**{("lam" if k == "lambda" else k): v for k, v in PRESETS["fig12"]["params"].items()})
    eqs = sorted((e for e in endemic_points(p) if e.admissible), key=lambda e: e.I)
    assert len(eqs) == 3
    mid = eqs[1]
    kernel = UniformKernel(0.5, 0.25)
    for f in (0.98, 1.02):
        start = mid.state._replace(I=mid.I * f)
        tr = simulate(p, kernel, start, 300.0, 5e-4, stride=100)
        d0 = abs(tr.I[0] - mid.I)
        assert abs(tr.I[-1] - mid.I) > 10 * d0
        # and the departure is in the direction of the perturbation
        assert np.sign(tr.I[-1] - mid.I) == np.sign(f - 1)
