"""Three-state dynamics of the resonant triple phi_-1, phi_0, phi_1."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.optimize import curve_fit

from .core import ModelParams
from .errors import InvalidParameterError

NORM_TOL = 1e-12
M_VALUES = np.array([-1.0, 0.0, 1.0])


@dataclass(frozen=True)
class ThreeStateAmplitudes:
    """Amplitudes (c_-1, c_0, c_1) at time t (units of 1/omega0)."""

    c: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex)
        if c.shape != (3,):
            raise InvalidParameterError("need exactly three amplitudes")
        if abs(np.vdot(c, c).real - 1.0) > NORM_TOL:
            raise InvalidParameterError(f"amplitudes not normalized: |c|^2 = {np.vdot(c, c).real!r}")
        object.__setattr__(self, "c", c)

    @classmethod
    def basis(cls, m: int, t: float = 0.0) -> "ThreeStateAmplitudes":
        c = np.zeros(3, dtype=complex)
        c[int(m) + 1] = 1.0
        return cls(c, t)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.c) ** 2


@dataclass(frozen=True)
class ThreeStateHamiltonian:
    """Basis energies (eps_-1, eps_0, eps_1) and nearest-neighbour couplings.

    ``v_minus`` couples phi_-1 with phi_0 and ``v_plus`` phi_0 with phi_1;
    both default to ``v``.
    """

    eps: tuple[float, float, float]
    v: float
    v_minus: float | None = None
    v_plus: float | None = None

    @classmethod
    def degenerate(cls, eps0: float, v: float) -> "ThreeStateHamiltonian":
        return cls((eps0, eps0, eps0), v)

    @classmethod
    def detuned(cls, eps0: float, mismatch: float, v: float, asymmetry: float = 0.0):
        """eps_+-1 = eps0 + mismatch -+ asymmetry."""
        return cls((eps0 + mismatch + asymmetry, eps0, eps0 + mismatch - asymmetry), v)

    @property
    def matrix(self) -> np.ndarray:
        vm = self.v if self.v_minus is None else self.v_minus
        vp = self.v if self.v_plus is None else self.v_plus
        e = self.eps
        return np.array([[e[0], vm, 0.0], [vm, e[1], vp], [0.0, vp, e[2]]], dtype=float)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    c: np.ndarray  # shape (len(t), 3)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.c) ** 2

    def at(self, i: int) -> ThreeStateAmplitudes:
        return ThreeStateAmplitudes(self.c[i], float(self.t[i]))


def coupling_v(params: ModelParams, i_integral: float) -> float:
    """v = 2 U I / delta_e (units of hbar omega0)."""
    return 2.0 * params.coupling_u * i_integral / params.delta_e


def coupling_v_large_n(g: float, i_over_sqrt_n0: float) -> float:
    """Large-n form v = 2 g [I / sqrt(n0)]."""
    return 2.0 * g * i_over_sqrt_n0


def rabi_frequency(v: float) -> float:
    """Omega = sqrt(2) v."""
    return math.sqrt(2.0) * v


def _analytic(t, v, eps0):
    t = np.asarray(t, dtype=float)
    w = math.sqrt(2.0) * v * t
    phase = np.exp(-1j * eps0 * t)
    # c_0 carries -i: this is the solution of i dc/dt = H c for the +v
    # couplings of ThreeStateHamiltonian (the opposite phase of phi_0 flips it)
    return np.stack([(np.cos(w) + 1) / 2, -1j * np.sin(w) / math.sqrt(2), (np.cos(w) - 1) / 2], axis=-1) * phase[..., None]


def evolve_analytic(t: float, v: float, eps0: float = 0.0) -> ThreeStateAmplitudes:
    """Closed-form degenerate solution starting from phi_-1."""
    return ThreeStateAmplitudes(_analytic(t, v, eps0), float(t))


def analytic_trajectory(t_grid, v: float, eps0: float = 0.0) -> Trajectory:
    t = np.asarray(t_grid, dtype=float)
    return Trajectory(t, _analytic(t, v, eps0))


def evolve_numeric(initial: ThreeStateAmplitudes, h: ThreeStateHamiltonian, t_grid) -> Trajectory:
    """Exact propagation c(t) = V exp(-i w (t - t0)) V^T c(t0)."""
    w, vecs = np.linalg.eigh(h.matrix)
    t = np.asarray(t_grid, dtype=float)
    coef = vecs.T @ initial.c
    phases = np.exp(-1j * np.outer(t - initial.t, w))
    return Trajectory(t, (phases * coef) @ vecs.T)


class Expectations(NamedTuple):
    m: np.ndarray
    dn: np.ndarray


def expectations(traj: Trajectory, delta_n: int) -> Expectations:
    """<M>(t) and <n - n0>(t) = -delta_n <M>(t)."""
    m = traj.probabilities @ M_VALUES
    return Expectations(m, -delta_n * m)


class OscillationFit(NamedTuple):
    omega: float
    residual: float
    model_violation: bool


def sz_oscillation_check(traj: Trajectory, spin: float = 1.0, tol: float = 1e-6) -> OscillationFit:
    """Least-squares fit of <M>(t) to -S cos(Omega t).

    ``model_violation`` is set when the RMS residual exceeds ``tol``, as
    happens for a detuned triple.
    """
    t = traj.t
    m = expectations(traj, 0).m
    if np.ptp(m) < 1e-12:
        raise InvalidParameterError("constant <M>(t): no oscillation to fit")
    if len(t) < 8:
        raise InvalidParameterError("need at least 8 samples")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise InvalidParameterError("sz_oscillation_check needs a uniform time grid")
    # FFT peak for the starting guess, refined by parabolic interpolation
    pad = 8 * len(t)
    spec = np.abs(np.fft.rfft(m - m.mean(), pad))
    k = int(np.argmax(spec[1:])) + 1
    if 1 <= k < len(spec) - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        denom = a - 2 * b + c
        k = k + (0.5 * (a - c) / denom if denom != 0 else 0.0)
    guess = 2 * math.pi * k / (pad * dt[0])

    def model(tt, omega):
        return -spin * np.cos(omega * (tt - t[0]))

    (omega,), _ = curve_fit(model, t, m, p0=[guess], xtol=1e-15, ftol=1e-15, gtol=1e-15, maxfev=10_000)
    resid = float(np.sqrt(np.mean((m - model(t, omega)) ** 2)))
    return OscillationFit(float(abs(omega)), resid, resid > tol)


def write_trajectory_csv(traj: Trajectory, delta_n: int, path: str | Path) -> None:
    p = traj.probabilities
    ex = expectations(traj, delta_n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_omega0", "p_m1", "p_0", "p_p1", "expect_M", "expect_dn"])
        for i, t in enumerate(traj.t):
            row = (t, p[i, 0], p[i, 1], p[i, 2], ex.m[i], ex.dn[i])
            w.writerow([f"{x:.12g}" for x in row])
