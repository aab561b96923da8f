import importlib

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from epiwave import (
    EndemicCubic,
    back_substitute,
    descartes_table,
    disease_free_point,
    endemic_cubic,
    endemic_points,
    equilibria,
    positive_roots,
    rhs,
)

from conftest import baseline_params, random_params


def svq_steady(params, I):
    """Solve the (linear) S, V, Q steady-state equations for a given constant I."""
    p = params
    g1, g2, h = p.q1 * I, p.q2 * I, p.delta / (1 + p.alpha * I)
    M = np.array([
        [-(p.beta * I + g1 + g2 + p.mu), p.rho, h],
        [g2, -(p.rho + p.mu), p.lam],
        [g1, 0.0, -(h + p.sigma * p.beta * I + p.lam + p.mu)],
    ])
    return np.linalg.solve(M, [-p.b, 0.0, 0.0])


def i_balance(params, I):
    """Per-capita growth of I on the S, V, Q steady-state manifold."""
    S, V, Q = svq_steady(params, I)
    return params.beta * (S + params.sigma * Q) - (params.gamma + params.mu)


def scan_roots(params, n=20000):
    """Independent oracle: sign changes of the I balance on a log grid."""
    xs = np.geomspace(1e-10 * params.carrying, params.carrying, n)
    fs = np.array([i_balance(params, x) for x in xs])
    idx = np.flatnonzero(np.sign(fs[:-1]) * np.sign(fs[1:]) < 0)
    return [brentq(lambda x: i_balance(params, x), xs[i], xs[i + 1], xtol=1e-14) for i in idx]


def mp_positive_roots(cubic):
    coeffs = [mpmath.mpf(c) for c in cubic.coeffs]
    with mpmath.workdps(50):
        roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)
    return sorted(float(r.real) for r in roots if abs(r.imag) < 1e-30 and r.real > 0)


def test_baseline_unique_endemic_point(baseline):
    pts = endemic_points(baseline)
    assert len(pts) == 1 and pts[0].admissible
    assert pts[0].I == pytest.approx(3.0605e-4, rel=1e-3)
    assert pts[0].residual < 1e-14


def test_dfe(baseline):
    d = disease_free_point(baseline)
    assert (d.S, d.V, d.Q, d.I) == (baseline.carrying, 0, 0, 0)
    assert d.kind == "DFE"


def test_below_threshold_only_dfe():
    p = baseline_params(R0=0.8)
    assert [e.kind for e in equilibria(p)] == ["DFE"]


def test_d0_sign_follows_r0():
    assert endemic_cubic(baseline_params(R0=0.5)).d0 < 0
    assert endemic_cubic(baseline_params(R0=1.0)).d0 == pytest.approx(0, abs=1e-15)
    assert endemic_cubic(baseline_params(R0=2.0)).d0 > 0
    assert endemic_cubic(baseline_params()).d3 < 0


def test_random_parameters_match_oracles():
    """Cubic roots against mpmath and against a direct scan of the I balance."""
    rng = np.random.default_rng(20240611)
    checked = 0
    for _ in range(200):
        p = random_params(rng)
        cubic = endemic_cubic(p)
        got = [x for x, m in positive_roots(cubic, tol=1e-12 * p.carrying) for _ in range(m)]
        ref = [x for x in mp_positive_roots(cubic) if x > 1e-12 * p.carrying]
        assert got == pytest.approx(ref, rel=1e-8, abs=1e-14)
        scanned = scan_roots(p, n=2500)
        # roots above b/mu cannot be equilibria; the scan only covers (0, b/mu]
        assert [x for x in got if x <= p.carrying] == pytest.approx(scanned, rel=1e-6)
        for e in endemic_points(p):
            scale = p.b + p.beta * e.S * e.I + p.q1 * e.I * e.S + p.delta * e.Q
            assert e.residual < 1e-9 * scale
        checked += len(got)
    assert checked > 100


def test_cubic_sign_matches_i_balance():
    """A(x) and the steady-state I balance differ by a positive factor."""
    rng = np.random.default_rng(5)
    for _ in range(30):
        p = random_params(rng)
        cubic = endemic_cubic(p)
        roots = [x for x, _ in positive_roots(cubic)]
        for x in np.geomspace(1e-6, 1.0, 5) * p.carrying:
            if any(abs(x - r) < 1e-6 * max(1.0, r) for r in roots):
                continue
            assert np.sign(cubic(x)) == np.sign(i_balance(p, x))


def test_unique_point_when_sigma_r0_below_one():
    rng = np.random.default_rng(6)
    n = 0
    while n < 100:
        p = random_params(rng, R0=rng.uniform(1.01, 8))
        if p.sigma * p.r0 >= 1:
            continue
        assert len([e for e in endemic_points(p) if e.admissible]) == 1
        n += 1


def test_weak_information_limit():
    p = baseline_params(q1=1e-10, q2=1e-10)
    (e,) = endemic_points(p)
    R0 = p.r0
    assert e.S == pytest.approx(p.b / (p.mu * R0), rel=1e-6)
    assert e.I == pytest.approx(p.mu * (R0 - 1) / p.beta, rel=1e-6)
    assert e.V < 1e-8 and e.Q < 1e-8


def test_back_substitution_matches_linear_solve():
    rng = np.random.default_rng(7)
    for p in [baseline_params()] + [random_params(rng, R0=rng.uniform(1.5, 5)) for _ in range(20)]:
        for e in endemic_points(p):
            s = back_substitute(p, e.I)
            assert s[:3] == pytest.approx(svq_steady(p, e.I), rel=1e-8, abs=1e-14 * p.carrying)


def test_double_root_is_merged():
    cubic = EndemicCubic(*np.poly([0.5, 0.5, 2.0]))
    (x1, m1), (x2, m2) = positive_roots(cubic)
    assert (x1, x2) == pytest.approx((0.5, 2.0), rel=1e-6)
    assert (m1, m2) == (2, 1)
    # a numerically split pair stays merged within the tolerance
    split = EndemicCubic(*np.poly([0.5, 0.5 + 2e-5, 2.0]))
    assert [m for _, m in positive_roots(split)] == [2, 1]
    apart = EndemicCubic(*np.poly([0.5, 0.51, 2.0]))
    assert [m for _, m in positive_roots(apart)] == [1, 1, 1]


def test_positive_roots_rejects_bad_tol():
    with pytest.raises(ValueError):
        positive_roots(EndemicCubic(1, 0, 0, -1), tol=0)


def test_degenerate_leading_coefficients():
    [(x, m)] = positive_roots(EndemicCubic(0, 0, 2, -1))
    assert (x, m) == (pytest.approx(0.5), 1)
    assert positive_roots(EndemicCubic(0, 0, 0, 1)) == []


@pytest.mark.parametrize(
    "coeffs,changes,counts",
    [((-1, 2, -3, 4), 3, (1, 2, 3)),
     ((-1, 2, 3, 4), 1, (1,)),
     ((-1, -2, -3, 4), 1, (1,)),
     ((-1, 2, 3, -4), 2, (0, 1, 2)),
     ((-1, -2, -3, -4), 0, (0,)),
     ((1, 0, -3, 4), 2, (0, 1, 2))],
)
def test_descartes_table(coeffs, changes, counts):
    rep = descartes_table(EndemicCubic(*coeffs))
    assert rep.changes == changes
    assert rep.admissible_counts == counts


@settings(max_examples=300)
@given(st.lists(st.floats(-10, 10).filter(lambda x: abs(x) > 1e-3), min_size=4, max_size=4))
def test_root_count_is_descartes_admissible(c):
    cubic = EndemicCubic(*c)
    n = len(positive_roots(cubic, merge_tol=1e-4))
    assert n in descartes_table(cubic).admissible_counts


def test_inadmissible_points_are_flagged_not_dropped(monkeypatch):
    eqm = importlib.import_module("epiwave.equilibria")

    p = baseline_params()
    real = eqm.back_substitute
    monkeypatch.setattr(eqm, "back_substitute", lambda params, I: real(params, I)._replace(V=-1.0))
    pts = eqm.endemic_points(p)
    assert len(pts) == 1 and not pts[0].admissible
    assert eqm.equilibria(p)[0].kind == "DFE" and len(eqm.equilibria(p)) == 1
