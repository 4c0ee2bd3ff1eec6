"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a PASS/FAIL line (see conftest) before asserting, so
the summary at the end of the run lists all eight.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_hamiltonian
from spinboson import ModelParams
from spinboson.dressed import (
    ResonanceSpec,
    dressed_energy_series,
    hermann_swain_coefficients,
    phase_average_ratio,
    resonance_g,
    resonance_g_limit,
)
from spinboson.dynamics import (
    ThreeStateAmplitudes,
    ThreeStateHamiltonian,
    analytic_trajectory,
    evolve_numeric,
    expectations,
    rabi_frequency,
    sz_oscillation_check,
)
from spinboson.eigensolver import eigvals_all
from spinboson.hamiltonian import build_hamiltonian
from spinboson.rotated1d import solve_rotated_level, wkb_parameters
from spinboson.spectroscopy import (
    LabeledLevel,
    find_anticrossing,
    fit_levels,
    fit_plateau,
    half_crossing,
    n_crit_estimate,
    splitting_scan,
)

DE, DN = 11.0, 15


@pytest.fixture(scope="module")
def wkb_constants():
    g = resonance_g_limit(DE, ResonanceSpec(DN))
    p = ModelParams.from_g(DE, g, 100_000, 101_200)
    t0 = time.perf_counter()
    w = wkb_parameters(p, DN)
    return g, w, time.perf_counter() - t0


def test_criterion_1_dressed_energy_series(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for g in (0.01, 0.02, 0.05):
        # dressed energy as a function of g alone, i.e. its n0 -> infinity form
        ratio = phase_average_ratio(g)
        worst = max(worst, abs(ratio - dressed_energy_series(g)) / g**6)
    elapsed = time.perf_counter() - t0
    ok = worst <= 50 and elapsed < 1
    acceptance(1, ok, f"max |dE/dE0 - series| / g^6 = {worst:.2f} (bound 50), {elapsed:.2f} s")
    assert worst <= 50
    assert elapsed < 1


def test_criterion_2_hermann_swain(acceptance):
    t0 = time.perf_counter()
    ok = True
    for k in range(1, 51):
        c2, _ = hermann_swain_coefficients(k)
        q = 4 * k * (k + 1)
        ok &= c2 / 4 == Fraction((2 * k + 1) ** 2, q)
        ok &= abs(c2 / 4 - 1) <= Fraction(1, q)
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1
    acceptance(2, ok, f"k = 1..50 exact, {elapsed:.3f} s")
    assert ok


def test_criterion_3_three_state_dynamics(acceptance):
    t0 = time.perf_counter()
    v = 0.4
    period = 2 * math.pi / rabi_frequency(v)
    t = np.linspace(0, 10 * period, 5001)
    num = evolve_numeric(ThreeStateAmplitudes.basis(-1), ThreeStateHamiltonian.degenerate(0.0, v), t)
    amp_err = float(np.max(np.abs(num.c - analytic_trajectory(t, v).c)))
    fit = sz_oscillation_check(num)
    ends = expectations(analytic_trajectory([0.0, period / 2], v), 25).dn
    elapsed = time.perf_counter() - t0
    ok = (
        amp_err <= 1e-10
        and fit.residual < 1e-10
        and fit.omega == pytest.approx(rabi_frequency(v), rel=1e-10)
        and ends[0] == pytest.approx(25, abs=1e-12)
        and ends[1] == pytest.approx(-25, abs=1e-12)
        and elapsed < 1
    )
    acceptance(3, ok, f"amplitude error {amp_err:.1e}, fit RMS {fit.residual:.1e}, "
                      f"<n-n0>: {ends[0]:+.1f} -> {ends[1]:+.1f}, {elapsed:.2f} s")
    assert ok


def test_criterion_4_small_instance_oracle(acceptance):
    t0 = time.perf_counter()
    template = ModelParams(5.0, 0.0, 400, 1200)
    res = find_anticrossing(template, 7)
    elapsed = time.perf_counter() - t0
    p = template.with_g(res.g_star)
    w = np.linalg.eigvalsh(dense_hamiltonian(p.delta_e, p.coupling_u, p.n_max, p.spin))
    lo, hi = res.pair_labels
    i = int(np.argmin(np.abs(w - lo.energy)))
    dense_gap = w[i + 1] - w[i]
    rel = abs(res.splitting - dense_gap) / dense_gap
    g_pred = resonance_g(5.0, ResonanceSpec(7), 400)
    g_rel = abs(res.g_star - g_pred) / g_pred
    ok = rel <= 1e-8 and g_rel <= 0.02 and elapsed < 120
    acceptance(4, ok, f"splitting {res.splitting:.10g} vs dense {dense_gap:.10g} (rel {rel:.1e}), "
                      f"g* {res.g_star:.6f} vs {g_pred:.6f} ({100 * g_rel:.2f}%), {elapsed:.1f} s")
    assert ok


def test_criterion_5_wkb_constants(acceptance, wkb_constants):
    _, w, elapsed = wkb_constants
    i_ok = abs(w.I_over_sqrt_n0 - 1.77e-3) <= 0.02 * 1.77e-3
    d_ok = abs(w.n0_D - 3.30) <= 0.05 * 3.30
    f_ok = -5.5 * 1.05 <= w.n0_F <= -5.2 * 0.95
    ok = i_ok and d_ok and f_ok and elapsed < 600
    acceptance(5, ok, f"I/sqrt(n0) = {w.I_over_sqrt_n0:.5e}, n0 D = {2 * w.n0_D:.3f} (hw/2), "
                      f"n0 F = {2 * w.n0_F:.3f} (hw/2), {elapsed:.2f} s")
    assert ok


def test_criterion_6_n_crit(acceptance, wkb_constants):
    g, w, _ = wkb_constants
    t0 = time.perf_counter()
    est = n_crit_estimate(w.n0_F - DN * w.n0_D, g, w.I_over_sqrt_n0)
    elapsed = time.perf_counter() - t0
    ok = abs(est - 3.26e4) <= 0.1 * 3.26e4 and elapsed < 1
    acceptance(6, ok, f"n_crit = {est:.4g}")
    assert ok


@pytest.mark.slow
def test_criterion_7_splitting_scan(acceptance):
    t0 = time.perf_counter()
    n0s = [1_000, 3_000, 10_000, 30_000, 100_000]
    res = splitting_scan(ModelParams(DE, 1.0, 1, 2), DN, n0s)
    elapsed = time.perf_counter() - t0
    assert not res.failures, res.failures
    s = np.array([p.splitting for p in res.points])
    monotone = bool(np.all(s[1:] >= 0.95 * s[:-1]))
    fit = fit_plateau(n0s, s)
    target = res.points[-1].v_predicted  # sqrt(2)|v| at the largest n0
    plateau_ok = abs(fit.plateau - target) <= 0.1 * target
    half = fit.half_point
    half_ok = 1.8e4 <= half <= 4e4
    crossing = half_crossing(n0s, s, fit.plateau)
    ok = monotone and plateau_ok and half_ok and elapsed < 7200
    acceptance(7, ok, f"plateau {fit.plateau:.4e} vs sqrt(2)|v| {target:.4e} "
                      f"({100 * (fit.plateau / target - 1):+.1f}%), half point {half:.3g} "
                      f"(interpolated {crossing:.3g}), monotone {monotone}, {elapsed:.0f} s")
    assert ok


def _unitarity():
    @given(st.tuples(*[st.floats(-3, 3)] * 3), st.floats(1e-3, 2), st.floats(1e-3, 2), st.floats(0, 1e4))
    @settings(max_examples=50)
    def check(eps, vm, vp, t_max):
        traj = evolve_numeric(ThreeStateAmplitudes.basis(-1), ThreeStateHamiltonian(eps, vm, vm, vp),
                              np.linspace(0, t_max, 101))
        assert np.max(np.abs(traj.probabilities.sum(axis=1) - 1)) < 1e-12

    check()


def _fit_recovery():
    @given(st.tuples(*[st.floats(-50, 50)] * 5), st.integers(100, 10**6))
    @settings(max_examples=50)
    def check(coef, n0):
        a, b, c, d, f = coef
        levels = [
            LabeledLevel(a + b * (n - n0) + c * m + d * m * (n - n0) + f * m * m, n, m, float(m), float(n))
            for n in range(n0 - 40, n0 + 41)
            for m in (-1, 0, 1)
        ]
        fit = fit_levels(levels, n0)
        scale = max(1.0, abs(a), 40 * abs(b), abs(c), 40 * abs(d), abs(f))
        assert np.allclose([fit.a, fit.b, fit.c, fit.d, fit.f], coef, atol=1e-12 * scale, rtol=0)

    check()


def _node_certification():
    @given(st.floats(0, 1.0), st.sampled_from([-1, 0, 1]), st.integers(0, 300), st.floats(3, 15))
    @settings(max_examples=30)
    def check(u, m, n, de):
        _, gf = solve_rotated_level(ModelParams(de, u, 1, 400), m, n)
        assert gf.node_count() == n

    check()


def _banded_vs_dense():
    @given(st.floats(0.5, 15), st.floats(0, 2), st.integers(5, 120), st.integers(1, 4))
    @settings(max_examples=50)
    def check(de, u, n_max, two_s):
        p = ModelParams(de, u, 1, n_max, two_s / 2)
        ref = np.linalg.eigvalsh(dense_hamiltonian(de, u, n_max, p.spin))
        assert np.max(np.abs(eigvals_all(build_hamiltonian(p)) - ref)) < 1e-10

    check()


def test_criterion_8_invariant_suites(acceptance):
    results = {}
    for name, check in [
        ("unitarity", _unitarity),
        ("fit recovery", _fit_recovery),
        ("node count", _node_certification),
        ("banded vs dense", _banded_vs_dense),
    ]:
        try:
            check()
            results[name] = True
        except AssertionError:
            results[name] = False
    ok = all(results.values())
    acceptance(8, ok, ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in results.items()))
    assert ok
