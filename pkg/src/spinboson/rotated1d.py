"""Rotated-frame one-dimensional problem.

Each rotated-frame level solves

    -u''/2 + [y^2/2 + M sqrt(delta_e^2 + 8 U^2 y^2)] u = (E + 1/2) u,

handled here three ways: finite differences on a uniform grid (moderate n),
action quantization in the WKB sense (continuous n and M, used for the
level-curvature constants D and F), and a semiclassical Fourier
evaluation of the coupling integral I for large n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .core import ModelParams, coupling_from_g
from .errors import AccuracyError, GridResolutionError, InvalidParameterError
from .hamiltonian import RotatedPotential

FD_MAX_N = 5000
POINTS_PER_WAVELENGTH = 40
EDGE_TOL = 1e-8
PAIRINGS = ("coupled", "same")


@dataclass(frozen=True)
class GridFunction:
    """Samples of a real wavefunction on a uniform symmetric grid.

    ``values`` are normalized so that sum(values**2) * step == 1; the end
    points y_min and y_max are the Dirichlet boundary and are not stored.
    """

    y_min: float
    y_max: float
    step: float
    values: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return self.y_min + self.step * np.arange(1, len(self.values) + 1)

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            len(self.values) == len(other.values)
            and math.isclose(self.y_min, other.y_min, rel_tol=0, abs_tol=1e-12)
            and math.isclose(self.step, other.step, rel_tol=1e-14)
        )

    def node_count(self) -> int:
        """Sign changes, ignoring the exponentially small tails."""
        u = self.values
        live = u[np.abs(u) > 1e-6 * np.abs(u).max()]
        return int(np.count_nonzero(np.signbit(live[1:]) != np.signbit(live[:-1])))

    def save(self, path: str | Path) -> None:
        """Two-column text dump (y, u)."""
        np.savetxt(path, np.column_stack([self.y, self.values]), fmt="%.12g", header="y u")


# ---------------------------------------------------------------------------
# finite differences

def _grid(params: ModelParams, n_hi: int, ppw: float) -> tuple[float, float]:
    """Half-width L and step h shared by every state up to index n_hi.

    The width covers the largest classical turning point (that of M = -S)
    plus 10; the step resolves the central de Broglie wavelength of the
    fastest state (M = +S) with ``ppw`` points.
    """
    pot = RotatedPotential.from_params(params, 0.0)
    a = math.sqrt(2 * n_hi + 1)
    extra = 2.0 * params.spin * (pot.phi(a) - params.delta_e)
    half_width = math.sqrt(2 * n_hi + 1 + extra) + 10.0
    k_center = math.sqrt(2 * n_hi + 1 + extra)
    return half_width, 2 * math.pi / (k_center * ppw)


def _fd_level(params: ModelParams, m: float, n: int, half_width: float, step: float):
    count = int(round(2 * half_width / step)) - 1
    step = 2 * half_width / (count + 1)
    y = -half_width + step * np.arange(1, count + 1)
    if n >= count:
        raise GridResolutionError(f"grid of {count} points cannot hold level {n}")
    pot = RotatedPotential.from_params(params, m)
    diag = 1.0 / step**2 + pot(y)
    off = np.full(count - 1, -0.5 / step**2)
    w, v = eigh_tridiagonal(diag, off, select="i", select_range=(n, n))
    u = v[:, 0] / math.sqrt(step)
    # sign convention: the outermost lobe on the right is positive
    big = np.flatnonzero(np.abs(u) > 1e-3 * np.abs(u).max())
    if u[big[-1]] < 0:
        u = -u
    gf = GridFunction(-half_width, half_width, step, u)
    edge = max(abs(u[0]), abs(u[-1]))
    if edge > EDGE_TOL:
        raise GridResolutionError(f"|u| = {edge:.1e} at the grid edge for (n={n}, M={m})")
    if gf.node_count() != n:
        raise GridResolutionError(f"level (n={n}, M={m}) has {gf.node_count()} nodes")
    return float(w[0]) - 0.5, gf


def solve_rotated_level(
    params: ModelParams,
    m: float,
    n: int,
    *,
    ppw: float = POINTS_PER_WAVELENGTH,
    n_grid: int | None = None,
    richardson: bool = True,
) -> tuple[float, GridFunction]:
    """Level E(n, M) and its wavefunction by second-order finite differences.

    With ``richardson`` the energy is the h^2 extrapolation from steps h and
    h/2 and the wavefunction comes from the finer grid. ``n_grid`` sizes the
    grid for a higher level so that several states can share it.
    """
    if n < 0 or n > params.n_max:
        raise InvalidParameterError(f"n={n} outside [0, n_max={params.n_max}]")
    if abs(m) > params.spin:
        raise InvalidParameterError(f"|M| = {abs(m)} exceeds spin {params.spin}")
    half_width, step = _grid(params, max(n, n_grid or 0), ppw)
    if not richardson:
        return _fd_level(params, m, n, half_width, step)
    e1, _ = _fd_level(params, m, n, half_width, step)
    e2, gf = _fd_level(params, m, n, half_width, step / 2)
    return (4 * e2 - e1) / 3, gf


def _kernel(params: ModelParams):
    c = 8.0 * (params.coupling_u / params.delta_e) ** 2
    return lambda y: 1.0 / (1.0 + c * np.square(y))


def coupling_overlap(bra: GridFunction, ket: GridFunction, kernel, derivative_on: str = "ket") -> float:
    """Trapezoid of bra * kernel * ket' (or -bra' * kernel * ket).

    Derivatives are centered differences; the Dirichlet zeros at both ends
    enter the stencil.
    """
    if not bra.same_grid(ket):
        raise InvalidParameterError("bra and ket live on different grids")
    k = kernel(bra.y)
    h = bra.step

    def deriv(u):
        padded = np.concatenate([[0.0], u, [0.0]])
        return (padded[2:] - padded[:-2]) / (2 * h)

    if derivative_on == "ket":
        return float(np.sum(bra.values * k * deriv(ket.values)) * h)
    if derivative_on == "bra":
        return float(-np.sum(deriv(bra.values) * k * ket.values) * h)
    raise InvalidParameterError(f"derivative_on must be 'ket' or 'bra', got {derivative_on!r}")


def _bra_m(m: float, pairing: str) -> float:
    if pairing == "coupled":
        return m - 1
    if pairing == "same":
        return m
    raise InvalidParameterError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")


def _fd_integral(params, m, n, delta_n, pairing, derivative_on, ppw):
    m_bra = _bra_m(m, pairing)
    n_bra = n + delta_n
    if n_bra > params.n_max or n_bra < 0:
        raise InvalidParameterError(f"bra index {n_bra} outside [0, n_max]")
    if abs(m_bra) > params.spin or abs(m) > params.spin:
        raise InvalidParameterError(f"no spin projection pair ({m_bra}, {m}) for spin {params.spin}")
    half_width, step = _grid(params, max(n, n_bra), ppw)
    kernel = _kernel(params)
    vals = []
    for h in (step, step / 2):
        _, bra = _fd_level(params, m_bra, n_bra, half_width, h)
        _, ket = _fd_level(params, m, n, half_width, h)
        vals.append(coupling_overlap(bra, ket, kernel, derivative_on))
    return (4 * vals[1] - vals[0]) / 3


def _integral(params, m, n, delta_n, pairing, derivative_on, method, ppw):
    if method == "auto":
        method = "fd" if max(n, n + delta_n) <= FD_MAX_N else "semiclassical"
    if method == "fd":
        return _fd_integral(params, m, n, delta_n, pairing, derivative_on, ppw)
    if method == "semiclassical":
        s = m - _bra_m(m, pairing)
        return semiclassical_integral(params.delta_e, params.coupling_u, n, delta_n, phase_weight=s)
    raise InvalidParameterError(f"unknown method {method!r}")


def integral_I(
    params: ModelParams,
    m: float,
    n: int,
    delta_n: int,
    *,
    pairing: str = "coupled",
    method: str = "auto",
    ppw: float = POINTS_PER_WAVELENGTH,
) -> float:
    """Integral of u_{n+dn, M'} k(y) d/dy u_{n, M}, k = 1/(1 + 8U^2 y^2/delta_e^2).

    ``pairing="coupled"`` takes M' = M - 1, the spin projection of the
    state actually reached by the coupling; ``"same"`` takes M' = M. FD
    values are Richardson-extrapolated in the step.
    """
    return _integral(params, m, n, delta_n, pairing, "ket", method, ppw)


def integral_J(
    params: ModelParams,
    m: float,
    n: int,
    delta_n: int,
    *,
    pairing: str = "coupled",
    method: str = "auto",
    ppw: float = POINTS_PER_WAVELENGTH,
) -> float:
    """Counterpart of :func:`integral_I` with the derivative moved onto the bra."""
    return _integral(params, m, n, delta_n, pairing, "bra", method, ppw)


def semiclassical_integral(
    delta_e: float,
    coupling_u: float,
    n: int,
    delta_n: int,
    *,
    phase_weight: float = 1.0,
    samples: int = 1 << 14,
) -> float:
    """Large-n value of the coupling integral from the classical orbit.

    Along the oscillator orbit y = A cos(theta), A^2 = 2n + 1, the two
    states' phases differ by delta_n * theta plus ``phase_weight`` times the
    accumulated deviation of Phi(y) from its orbit mean, so the integral is
    a single Fourier component:

        I = -sqrt(2) <k sin(theta) sin(delta_n theta + chi)> * A / sqrt(2).
    """
    a2 = 2 * n + 1
    theta = np.arange(samples) * (2 * np.pi / samples)
    cos2 = np.cos(theta) ** 2
    phi = np.sqrt(delta_e**2 + 8 * coupling_u**2 * a2 * cos2)
    dev = np.fft.rfft(phi - phi.mean())
    freq = np.arange(len(dev))
    dev[0] = 0.0
    dev[1:] /= 1j * freq[1:]
    chi = np.fft.irfft(dev, samples)
    k = 1.0 / (1.0 + 8 * coupling_u**2 * a2 * cos2 / delta_e**2)
    mean = np.mean(k * np.sin(theta) * np.sin(delta_n * theta + phase_weight * chi))
    return float(-math.sqrt(2) * mean * math.sqrt(a2 / 2))


# ---------------------------------------------------------------------------
# WKB level model

@dataclass(frozen=True)
class WkbLevelModel:
    """E(n, M) from action quantization, smooth in continuous n and M.

    In turning-point coordinates y = y_t sin(phi), with
    q(y) = 1/2 + M 8U^2 / (Phi(y_t) + Phi(y)), the action condition reads

        (y_t^2 / pi) * Int_{-pi/2}^{pi/2} sqrt(2 q) cos^2(phi) dphi = n + 1/2,

    which has no cancellation at large n. The integrand is smooth and
    periodic in phi, so the midpoint rule over a full period converges
    geometrically.
    """

    delta_e: float
    coupling_u: float
    samples: int = 256

    def __post_init__(self):
        if not self.delta_e > 0 or self.coupling_u < 0:
            raise InvalidParameterError("need delta_e > 0 and coupling_u >= 0")

    @classmethod
    def from_params(cls, params: ModelParams) -> "WkbLevelModel":
        return cls(params.delta_e, params.coupling_u)

    def _phi_grid(self):
        return (np.arange(self.samples) + 0.5) * (2 * np.pi / self.samples)

    def _q(self, y_t: float, m: float, s: np.ndarray) -> np.ndarray:
        c = 8 * self.coupling_u**2
        phi_t = math.sqrt(self.delta_e**2 + c * y_t**2)
        phi = np.sqrt(self.delta_e**2 + c * np.square(y_t * s))
        q = 0.5 + m * c / (phi_t + phi)
        if np.any(q <= 0):
            raise InvalidParameterError("potential is not a single well for this M; WKB model undefined")
        return q

    def action(self, y_t: float, m: float) -> float:
        """Quantized action (n + 1/2) of the orbit with turning point y_t."""
        phi = self._phi_grid()
        q = self._q(y_t, m, np.sin(phi))
        return float(y_t**2 * np.mean(np.sqrt(2 * q) * np.cos(phi) ** 2))

    def turning_point(self, n: float, m: float) -> float:
        if n + 0.5 <= 0:
            raise InvalidParameterError("need n > -1/2")
        target = n + 0.5
        hi = math.sqrt(2 * target) + 1.0
        while self.action(hi, m) < target:
            hi *= 2
        return brentq(lambda t: self.action(t, m) - target, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=300)

    def energy(self, n: float, m: float) -> float:
        y_t = self.turning_point(n, m)
        return float(RotatedPotential(self.delta_e, self.coupling_u, m)(y_t)) - 0.5

    def derivatives(self, n0: float, dn: float = 1.0, dm: float = 0.5) -> tuple[float, float]:
        """(D, F) = (d2E/dn dM, (1/2) d2E/dM^2) at (n0, M=0).

        At fixed action dE/dM is the orbit average of Phi, so both are first
        differences of <Phi>; differencing E itself loses ~n0 * eps to
        cancellation, which ruins n0 F above n0 ~ 10^6.
        """
        if self.coupling_u == 0:
            return 0.0, 0.0  # E = n + M delta_e is linear in both arguments
        c = 8 * self.coupling_u**2

        def dedm(n, m):
            return self.orbit_average(n, m, lambda y: np.sqrt(self.delta_e**2 + c * np.square(y)))

        d = (dedm(n0 + dn, 0.0) - dedm(n0 - dn, 0.0)) / (2 * dn)
        f = 0.5 * (dedm(n0, dm) - dedm(n0, -dm)) / (2 * dm)
        return d, f

    def orbit_average(self, n: float, m: float, func) -> float:
        """Classical time average of func(y) over the quantized orbit."""
        y_t = self.turning_point(n, m)
        phi = self._phi_grid()
        s = np.sin(phi)
        dt = 1.0 / np.sqrt(2 * self._q(y_t, m, s))
        return float(np.sum(func(y_t * s) * dt) / np.sum(dt))


def orbit_average(potential: RotatedPotential, n: float, func) -> float:
    """Classical orbit average of func for level n of ``potential``."""
    return WkbLevelModel(potential.delta_e, potential.coupling_u).orbit_average(n, potential.m, func)


class WkbParameters(NamedTuple):
    n0_D: float
    n0_F: float
    I_over_sqrt_n0: float


def ladder_values(delta_e: float, g: float, delta_n: int, n0: int) -> WkbParameters:
    """n0 D, n0 F and I/sqrt(n0) at one reference occupation and fixed g."""
    u = coupling_from_g(g, n0, delta_e)
    d, f = WkbLevelModel(delta_e, u).derivatives(n0)
    i = semiclassical_integral(delta_e, u, n0, delta_n)
    return WkbParameters(n0 * d, n0 * f, i / math.sqrt(n0))


def wkb_parameters(
    params: ModelParams,
    delta_n: int,
    *,
    start: int = 10_000,
    max_levels: int = 8,
    rtol: float = 1e-4,
    fail_rtol: float = 0.05,
) -> WkbParameters:
    """Large-n0 limits of n0 D, n0 F and I/sqrt(n0) at the coupling g of ``params``.

    Values on the ladder n0 = start * 2^j are extrapolated pairwise
    against 1/n0 (x_inf ~ 2 x(2 n0) - x(n0)); the ladder grows until two
    successive extrapolations agree to ``rtol``. If they still differ by
    more than ``fail_rtol`` at the top of the ladder, AccuracyError.
    """
    g = params.g
    if params.coupling_u == 0:
        return WkbParameters(0.0, 0.0, 0.0)
    raw = [ladder_values(params.delta_e, g, delta_n, start)]
    prev = None
    spread = np.inf
    for j in range(1, max_levels):
        raw.append(ladder_values(params.delta_e, g, delta_n, start * 2**j))
        est = np.array(raw[-1]) * 2 - np.array(raw[-2])
        if prev is not None:
            spread = float(np.max(np.abs(est - prev) / np.maximum(np.abs(est), 1e-300)))
            if spread <= rtol:
                break
        prev = est
    if spread > fail_rtol:
        raise AccuracyError(f"ladder extrapolation did not settle (spread {spread:.2e})")
    return WkbParameters(*map(float, est))
