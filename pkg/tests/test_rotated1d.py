import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import G_STAR_LIMIT_11_15, ho_wavefunction, sqrt_average, sqrt_average_derivative
from spinboson import GridResolutionError, InvalidParameterError, ModelParams
from spinboson.hamiltonian import RotatedPotential
from spinboson.rotated1d import (
    GridFunction,
    WkbLevelModel,
    _fd_level,
    _grid,
    coupling_overlap,
    integral_I,
    integral_J,
    ladder_values,
    orbit_average,
    semiclassical_integral,
    solve_rotated_level,
)


@pytest.mark.parametrize("m", [-1, 0, 1])
def test_zero_coupling_is_oscillator(m):
    p = ModelParams(11.0, 0.0, 10, 40)
    e, u = solve_rotated_level(p, m, 7)
    # Richardson-extrapolated FD leaves an O(h^4) error of ~1e-6 here
    assert e == pytest.approx(7 + 11.0 * m, abs=1e-5)
    ref = ho_wavefunction(7, u.y)
    ref *= np.sign(ref[np.flatnonzero(np.abs(ref) > 1e-3 * np.abs(ref).max())[-1]])
    # the wavefunction is not extrapolated: O(h^2) on the finer grid
    assert np.max(np.abs(u.values - ref)) < 1e-3
    assert np.sum(u.values**2) * u.step == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.0, 3.0), st.integers(0, 200))
def test_m_zero_is_bare_oscillator(u, n):
    p = ModelParams(11.0, u, 1, 400)
    e, gf = solve_rotated_level(p, 0, n)
    assert e == pytest.approx(n, rel=1e-6, abs=1e-5)
    assert gf.node_count() == n


def test_quadratic_convergence_in_step():
    p = ModelParams(11.0, 0.0, 1, 40)
    exact = 20 + 11.0
    errs = [abs(solve_rotated_level(p, 1, 20, ppw=ppw, richardson=False)[0] - exact) for ppw in (10, 20, 40)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


@given(st.floats(0.05, 0.6), st.sampled_from([-1, 0, 1]), st.integers(100, 300))
def test_wkb_agrees_with_fd(u, m, n):
    p = ModelParams(11.0, u, 1, 400)
    e_fd, _ = solve_rotated_level(p, m, n)
    e_wkb = WkbLevelModel.from_params(p).energy(n, m)
    assert abs(e_wkb - e_fd) < 1e-3 * abs(e_fd)


@given(st.floats(0.0, 0.8), st.sampled_from([-1, 0, 1]), st.integers(0, 150))
def test_node_certification(u, m, n):
    p = ModelParams(7.0, u, 1, 200)
    _, gf = solve_rotated_level(p, m, n, n_grid=160)
    assert gf.node_count() == n
    assert max(abs(gf.values[0]), abs(gf.values[-1])) < 1e-8


def test_underresolved_grid_is_rejected():
    p = ModelParams(11.0, 0.3, 1, 400)
    half, _ = _grid(p, 300, 40)
    with pytest.raises(GridResolutionError):
        _fd_level(p, 0, 300, half, 0.9)
    with pytest.raises(GridResolutionError):
        _fd_level(p, 0, 300, 8.0, 0.01)


def test_level_argument_checks():
    p = ModelParams(11.0, 0.3, 1, 40)
    with pytest.raises(InvalidParameterError):
        solve_rotated_level(p, 0, 41)
    with pytest.raises(InvalidParameterError):
        solve_rotated_level(p, 2, 5)


def test_wavefunction_dump(tmp_path):
    _, gf = solve_rotated_level(ModelParams(11.0, 0.2, 1, 40), 1, 5)
    path = tmp_path / "u.txt"
    gf.save(path)
    data = np.loadtxt(path)
    assert data.shape == (len(gf.values), 2)
    assert np.allclose(data[:, 0], gf.y)
    assert np.allclose(data[:, 1], gf.values, rtol=1e-11, atol=1e-15)


def test_overlap_needs_common_grid():
    a = GridFunction(-5.0, 5.0, 0.1, np.ones(99))
    b = GridFunction(-5.0, 5.0, 0.05, np.ones(199))
    with pytest.raises(InvalidParameterError):
        coupling_overlap(a, b, lambda y: 1.0)
    with pytest.raises(InvalidParameterError):
        coupling_overlap(a, a, lambda y: 1.0, derivative_on="both")


def test_ladder_selection_rule_at_weak_coupling():
    p0 = ModelParams(11.0, 0.0, 50, 100)
    assert abs(integral_I(p0, 0, 50, 3)) < 1e-5
    # the (n + 3) admixture grows like U^2
    small = integral_I(p0.with_coupling(0.01), 0, 50, 3)
    large = integral_I(p0.with_coupling(0.1), 0, 50, 3)
    assert small / large == pytest.approx(0.01, rel=0.02)
    assert abs(semiclassical_integral(11.0, 0.0, 50, 3)) < 1e-12


def test_integral_argument_checks():
    p = ModelParams(11.0, 0.1, 50, 60)
    with pytest.raises(InvalidParameterError):
        integral_I(p, 0, 50, 15)
    with pytest.raises(InvalidParameterError):
        integral_I(p, 0, 40, 3, pairing="other")
    with pytest.raises(InvalidParameterError):
        integral_I(p, -1, 40, 3)
    with pytest.raises(InvalidParameterError):
        integral_I(p, 0, 40, 3, method="magic")


@pytest.fixture(scope="module")
def fd_ladder():
    out = {}
    for n in (1000, 3000):
        p = ModelParams.from_g(11.0, G_STAR_LIMIT_11_15, n, n + 100)
        out[n] = (
            integral_I(p, 0, n, 15, method="fd") / math.sqrt(n),
            integral_J(p, 0, n, 15, method="fd") / math.sqrt(n),
            integral_I(p, 0, n, 15, method="semiclassical") / math.sqrt(n),
            integral_I(p, 0, n, 15, pairing="same", method="fd") / math.sqrt(n),
        )
    return out


def test_fd_and_semiclassical_converge_together(fd_ladder):
    (i1, _, s1, _), (i3, _, s3, _) = fd_ladder[1000], fd_ladder[3000]
    # the FD-to-semiclassical gap shrinks like 1/n
    assert abs(i3 - s3) < abs(i1 - s1) / 2
    fd_limit = (3 * i3 - i1) / 2
    sc_limit = (3 * s3 - s1) / 2
    assert fd_limit == pytest.approx(sc_limit, rel=3e-3)
    assert fd_limit == pytest.approx(1.77e-3, rel=0.02)


def test_i_and_j_share_their_limit(fd_ladder):
    gaps = [abs(fd_ladder[n][1] / fd_ladder[n][0] - 1) for n in (1000, 3000)]
    assert gaps[1] < gaps[0] / 2
    assert gaps[1] < 1e-3


def test_same_projection_pairing_is_a_small_diagnostic(fd_ladder):
    i, _, _, same = fd_ladder[3000]
    assert abs(same) < 0.05 * abs(i)


def test_semiclassical_auto_switch():
    p = ModelParams.from_g(11.0, G_STAR_LIMIT_11_15, 10**5, 10**5 + 100)
    auto = integral_I(p, 0, 10**5, 15)
    assert auto == integral_I(p, 0, 10**5, 15, method="semiclassical")
    assert auto / math.sqrt(1e5) == pytest.approx(1.7786e-3, rel=1e-3)


def test_wkb_zero_coupling():
    w = WkbLevelModel(11.0, 0.0)
    assert w.derivatives(1e4) == (0.0, 0.0)
    assert w.energy(100, 1) == pytest.approx(111.0, rel=1e-14)


def test_wkb_orbit_average_of_y2():
    pot = RotatedPotential(11.0, 0.0, 0.0)
    assert orbit_average(pot, 40, lambda y: y * y) == pytest.approx(40.5, rel=1e-13)


def test_wkb_rejects_double_well():
    with pytest.raises(InvalidParameterError):
        WkbLevelModel(1.0, 2.0).energy(10, -1)


def test_wkb_derivatives_match_elliptic_closed_forms():
    # large n0 at fixed g: n0 D = de a R'(a), n0 F = -(de^2 / 2) a (1/2 - 2 R R') with a = 16 g^2
    g = G_STAR_LIMIT_11_15
    a = 16 * g * g
    d_ref = 11.0 * a * sqrt_average_derivative(a)
    f_ref = -0.5 * 121.0 * a * (0.5 - 2 * sqrt_average(a) * sqrt_average_derivative(a))
    vals = ladder_values(11.0, g, 15, 10**6)
    assert vals.n0_D == pytest.approx(d_ref, rel=1e-4)
    assert vals.n0_F == pytest.approx(f_ref, rel=1e-4)
