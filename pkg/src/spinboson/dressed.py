"""Dressed transition energy, its small-g series, and resonance solving."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_hermite

from .core import ModelParams, coupling_from_g
from .errors import AccuracyError, InvalidParameterError, NoResonanceError

PHASE_AVERAGE_ABOVE = 10_000
QUAD_RTOL = 1e-9
G_MAX = 2.0


@dataclass(frozen=True)
class ResonanceSpec:
    """Odd number of oscillator quanta exchanged per spin-1/2 step."""

    delta_n: int

    def __post_init__(self):
        if int(self.delta_n) != self.delta_n or self.delta_n < 1 or self.delta_n % 2 == 0:
            raise InvalidParameterError(f"delta_n must be an odd positive integer, got {self.delta_n}")

    @classmethod
    def from_k(cls, k: int) -> "ResonanceSpec":
        return cls(2 * k + 1)

    @property
    def k(self) -> int:
        return (self.delta_n - 1) // 2


# ---------------------------------------------------------------------------
# oscillator-state expectation values of functions of y

@lru_cache(maxsize=32)
def _state_weights(n: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes x_i >= 0 and weights w_i h_n(x_i)^2 of an ``nodes``-point rule.

    h_k are the orthonormal Hermite polynomials. The Gauss weights obey
    w_i = 1 / (N h_{N-1}(x_i)^2), so the product is the ratio
    h_n^2 / (N h_{N-1}^2), which the rescaled recurrence below evaluates
    without overflow at any node. Weights are doubled to account for the
    mirrored nodes (the integrands used here are even).
    """
    x, _ = roots_hermite(nodes)
    x = x[x >= 0]
    h_prev = np.zeros_like(x)
    h = np.full_like(x, math.pi**-0.25)
    log_scale = np.zeros_like(x)
    hn, log_n = h.copy(), log_scale.copy()
    tmp = np.empty_like(x)
    for k in range(nodes - 1):
        # h_{k+1} = sqrt(2/(k+1)) x h_k - sqrt(k/(k+1)) h_{k-1}, overwriting h_prev
        np.multiply(x, h, out=tmp)
        tmp *= math.sqrt(2.0 / (k + 1))
        h_prev *= -math.sqrt(k / (k + 1))
        h_prev += tmp
        h_prev, h = h, h_prev
        if k + 1 == n:
            hn, log_n = h.copy(), log_scale.copy()
        # growth per step is below ~sqrt(8N), so 16 steps stay far from overflow
        if k % 16 == 15:
            s = np.abs(h)
            np.maximum(s, 1.0, out=s)
            h /= s
            h_prev /= s
            log_scale += np.log(s)
    with np.errstate(under="ignore"):
        w = (hn / h) ** 2 * np.exp(2.0 * (log_n - log_scale)) / nodes
    if x[0] == 0.0:
        w[1:] *= 2.0
    else:
        w *= 2.0
    return x, w


def _phase_average(func, amplitude: float, rtol: float = 1e-13) -> tuple[float, float]:
    """Mean of func(amplitude cos theta) over a period; returns (value, error)."""
    m = 64
    prev = None
    while m <= 1 << 20:
        theta = (np.arange(m) + 0.5) * (np.pi / m)  # half period suffices for even func
        val = float(np.mean(func(amplitude * np.cos(theta))))
        if prev is not None:
            err = abs(val - prev)
            if err <= rtol * max(abs(val), 1e-300):
                return val, err
        prev = val
        m *= 2
    return val, err


def ho_expectation(func, n: int, nodes: int | None = None) -> float:
    """<n| func(y) |n> for an even function of the oscillator coordinate.

    Gauss-Hermite with max(200, 4n) nodes up to n = 10^4, the classical
    phase average over an orbit of amplitude sqrt(2n+1) above.
    """
    if n < 0:
        raise InvalidParameterError("n must be >= 0")
    if nodes is None and n > PHASE_AVERAGE_ABOVE:
        val, err = _phase_average(func, math.sqrt(2 * n + 1))
    else:
        big = nodes or max(200, 4 * n)
        x1, w1 = _state_weights(n, big)
        x2, w2 = _state_weights(n, max(big - big // 4, n + 50))
        val = float(np.dot(w1, func(x1)))
        err = abs(val - float(np.dot(w2, func(x2))))
    if err > QUAD_RTOL * max(abs(val), 1e-300):
        raise AccuracyError(f"quadrature error estimate {err:.2e} too large at n={n}")
    return val


def _dressed_ratio(delta_e: float, coupling_u: float, n: int) -> float:
    if coupling_u == 0:
        return 1.0
    c = 8.0 * (coupling_u / delta_e) ** 2
    return ho_expectation(lambda y: np.sqrt(1.0 + c * y * y), n)


def dressed_energy(params: ModelParams, n: int | None = None) -> float:
    """Dressed two-level energy delta_e <n| sqrt(1 + 8U^2 y^2/delta_e^2) |n>."""
    n = params.n0 if n is None else n
    if n > params.n_max:
        raise InvalidParameterError(f"n={n} above n_max={params.n_max}")
    return params.delta_e * _dressed_ratio(params.delta_e, params.coupling_u, n)


def phase_average_ratio(g: float) -> float:
    """n -> infinity limit of dressed_energy / delta_e at fixed g."""
    a = 16.0 * g * g
    val, _ = _phase_average(lambda y: np.sqrt(1.0 + a * y * y), 1.0)
    return val


def dressed_energy_series(g: float) -> float:
    return 1.0 + 4.0 * g**2 - 12.0 * g**4


def hermann_swain_coefficients(k: int) -> tuple[Fraction, Fraction]:
    """Exact (c2, c4) with bracket = 1 + c2 g^2 - c4 g^4."""
    if k < 1:
        raise InvalidParameterError("k must be >= 1 (p = 1 is a pole)")
    p = 2 * k + 1
    q = 4 * k * (k + 1)  # p^2 - 1
    return Fraction(4 * p * p, q), Fraction(4 * p**4 * (3 * p * p - 7), q**3)


def hermann_swain_lhs(g: float, k: int) -> float:
    c2, c4 = hermann_swain_coefficients(k)
    return 1.0 + float(c2) * g**2 - float(c4) * g**4


def resonance_g(delta_e: float, spec: ResonanceSpec, n0: int, g_max: float = G_MAX) -> float:
    """Coupling g* at which dressed_energy(n0) equals delta_n."""
    if n0 <= 0:
        raise InvalidParameterError("resonance_g needs n0 > 0")
    target = float(spec.delta_n)

    def mismatch(g):
        u = coupling_from_g(g, n0, delta_e)
        return delta_e * _dressed_ratio(delta_e, u, n0) - target

    lo = mismatch(0.0)
    if lo == 0.0:
        return 0.0
    hi = mismatch(g_max)
    if lo > 0 or hi < 0:
        raise NoResonanceError(
            f"no resonance for delta_n={spec.delta_n} with delta_e={delta_e} in g in [0, {g_max}]"
        )
    g = brentq(mismatch, 0.0, g_max, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(mismatch(g)) > 1e-10 * target:
        raise AccuracyError(f"resonance residual {mismatch(g):.2e} too large")
    return float(g)


def resonance_g_limit(delta_e: float, spec: ResonanceSpec, g_max: float = G_MAX) -> float:
    """g* in the n0 -> infinity limit (phase-average dressed energy)."""
    target = spec.delta_n / delta_e
    if target < 1:
        raise NoResonanceError(f"delta_n={spec.delta_n} below delta_e={delta_e}")
    if target == 1:
        return 0.0
    if phase_average_ratio(g_max) < target:
        raise NoResonanceError(f"no resonance below g_max={g_max}")
    return float(brentq(lambda g: phase_average_ratio(g) - target, 0.0, g_max, xtol=1e-15))
