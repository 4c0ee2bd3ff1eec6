import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_hamiltonian
from spinboson import ModelParams
from spinboson.hamiltonian import (
    RotatedPotential,
    TruncationWarning,
    basis_labels,
    build_hamiltonian,
    check_truncation,
    spin_y_squared_factor,
    v_coupling_function,
    w_expectation,
)

small_models = st.builds(
    lambda de, u, n_max, two_s: ModelParams(de, u, 1, n_max, two_s / 2),
    st.floats(0.5, 15),
    st.floats(0, 2),
    st.integers(2, 40),
    st.integers(1, 4),
)


@given(small_models)
def test_banded_equals_kronecker_oracle(p):
    h = build_hamiltonian(p)
    assert h.bandwidth == p.spin_dim + 1
    ref = dense_hamiltonian(p.delta_e, p.coupling_u, p.n_max, p.spin)
    assert np.array_equal(h.to_dense(), ref) or np.allclose(h.to_dense(), ref, atol=1e-14, rtol=0)


@given(small_models, st.integers(0, 2**31))
def test_matvec_matches_dense(p, seed):
    h = build_hamiltonian(p)
    x = np.random.default_rng(seed).standard_normal((p.dim, 2))
    dense = h.to_dense()
    assert np.allclose(h.matvec(x[:, 0]), dense @ x[:, 0], atol=1e-13 * h.norm_bound(), rtol=0)
    assert np.allclose(h @ x, dense @ x, atol=1e-13 * h.norm_bound(), rtol=0)
    assert h.norm_bound() >= np.linalg.norm(dense, 2) - 1e-12


def test_zero_coupling_is_diagonal():
    p = ModelParams(11.0, 0.0, 5, 30)
    h = build_hamiltonian(p)
    n, m = basis_labels(p)
    assert np.all(h.bands[1:] == 0)
    assert np.array_equal(h.diagonal, 11.0 * m + n)


def test_spectrum_reflection_at_zero_coupling():
    # levels n + delta_e M: removing the M offsets leaves the bare ladder, each rung once per M
    p = ModelParams(3.7, 0.0, 5, 25)
    n, m = basis_labels(p)
    w = np.sort(build_hamiltonian(p).diagonal)
    assert np.allclose(np.sort(w - 0), np.sort(n + 3.7 * m))
    assert np.allclose(np.sort(n + 3.7 * m), np.sort(n - 3.7 * m))


def test_parity_blocks_and_dense_spectrum():
    p = ModelParams(2.3, 0.7, 5, 30)
    dense = build_hamiltonian(p).to_dense()
    n, m = basis_labels(p)
    parity = (n + m + p.spin).astype(int) % 2
    assert np.all(dense[np.ix_(parity == 0, parity == 1)] == 0)
    ref = np.linalg.eigvalsh(dense_hamiltonian(2.3, 0.7, 30))
    assert np.allclose(np.linalg.eigvalsh(dense), ref, atol=1e-12)


def test_truncation_warning():
    p = ModelParams(11.0, 0.1, 10_000, 10_100)
    with pytest.warns(TruncationWarning):
        assert not check_truncation(p, 15)
    ok = ModelParams(11.0, 0.1, 10_000, 11_100)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_truncation(ok, 15)


def test_dump_triplets(tmp_path):
    p = ModelParams(1.0, 0.5, 1, 3)
    h = build_hamiltonian(p)
    path = tmp_path / "h.txt"
    h.dump_triplets(path)
    rebuilt = np.zeros((p.dim, p.dim))
    for line in path.read_text().splitlines():
        i, j, v = line.split()
        rebuilt[int(i), int(j)] = rebuilt[int(j), int(i)] = float(v)
    assert np.array_equal(rebuilt, h.to_dense())


def test_coupling_function_examples():
    p = ModelParams(2.0, 2.0, 1, 3)
    f = v_coupling_function(p)
    assert f(1 / math.sqrt(8)) == pytest.approx(0.5)
    assert f(1e4) == pytest.approx(2.0 / (8 * 2.0 * 1e8), rel=1e-6)
    assert v_coupling_function(ModelParams(2.0, 0.0, 1, 3))(0.3) == 0.0


def test_rotated_potential():
    pot = RotatedPotential(11.0, 0.02, 0.0)
    y = np.linspace(-5, 5, 11)
    assert np.allclose(pot(y), y * y / 2)
    one = RotatedPotential(11.0, 0.0, 1.0)
    assert np.allclose(one(y), y * y / 2 + 11.0)
    assert RotatedPotential(11.0, 0.02, -1.0).stationary_minimum() == pytest.approx(-11.0)


def test_spin_y_squared_factor():
    # <(2Sy)^2> = 2 (S(S+1) - M^2)
    assert spin_y_squared_factor(1, 0) == pytest.approx(4.0)
    assert spin_y_squared_factor(1, -1) == pytest.approx(2.0)
    assert spin_y_squared_factor(0.5, 0.5) == pytest.approx(1.0)


def test_w_expectation():
    assert w_expectation(ModelParams(11.0, 0.0, 100, 200), 100, 0) == 0.0
    p = ModelParams(11.0, 0.01, 100, 200)
    w0 = w_expectation(p, 100, 0)
    # f^2 = r^2 (1 + c y^2)^-2 ~ r^2 (1 - 2c y^2), r = U/delta_e, c = 8 r^2, <y^2> = n + 1/2
    r2 = (0.01 / 11) ** 2
    assert w0 == pytest.approx(4 * r2 * (1 - 16 * r2 * 100.5), rel=1e-5)
    assert w_expectation(p, 100, 1) == pytest.approx(w0 / 2, rel=1e-3)
