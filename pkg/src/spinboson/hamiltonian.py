"""Banded lab-frame Hamiltonian and the rotated-frame scalar ingredients.

Lab frame:  H = delta_e Sz + a^dag a + U (a + a^dag) 2 Sx.

Position convention used everywhere: a + a^dag = sqrt(2) y and
a - a^dag = sqrt(2) d/dy, so [2U(a + a^dag)/delta_e]^2 = 8 U^2 y^2 / delta_e^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from .core import ModelParams, spin_matrices
from .errors import CapacityError

MAX_DIM = 50_000_000


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BandedSymmetricMatrix:
    """Real symmetric band matrix, upper bands stored row-wise.

    ``bands[k, i]`` holds H[i, i+k] for i < dim - k; the last k entries of
    row k are padding and kept at zero. This is also LAPACK's lower band
    layout, so ``bands`` can be handed to ``scipy.linalg.eig_banded`` with
    ``lower=True`` unchanged.
    """

    bands: np.ndarray

    def __post_init__(self):
        self.bands.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.bands.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.bands.shape[0] - 1

    @property
    def diagonal(self) -> np.ndarray:
        return self.bands[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        y = self.bands[0] * x if x.ndim == 1 else self.bands[0][:, None] * x
        for k in range(1, self.bandwidth + 1):
            b = self.bands[k, : self.dim - k]
            if x.ndim > 1:
                b = b[:, None]
            y[:-k] += b * x[k:]
            y[k:] += b * x[:-k]
        return y

    __matmul__ = matvec

    def norm_bound(self) -> float:
        """Max absolute row sum, an upper bound on the spectral norm."""
        a = np.abs(self.bands)
        rows = a[0].copy()
        for k in range(1, self.bandwidth + 1):
            rows[:-k] += a[k, : self.dim - k]
            rows[k:] += a[k, : self.dim - k]
        return float(rows.max())

    def shifted(self, sigma: float) -> "BandedSymmetricMatrix":
        bands = self.bands.copy()
        bands[0] -= sigma
        return BandedSymmetricMatrix(bands)

    def to_sparse(self) -> sps.csr_matrix:
        offsets, data = [0], [self.bands[0]]
        for k in range(1, self.bandwidth + 1):
            b = self.bands[k, : self.dim - k]
            offsets += [k, -k]
            data += [b, b]
        return sps.diags(data, offsets, shape=(self.dim, self.dim), format="csr")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def dump_triplets(self, path: str | Path) -> None:
        """Write nonzero upper-triangle entries as ``row col value`` lines."""
        with open(path, "w") as fh:
            for k in range(self.bandwidth + 1):
                b = self.bands[k, : self.dim - k]
                for i in np.flatnonzero(b):
                    fh.write(f"{i} {i + k} {b[i]:.17g}\n")


def build_hamiltonian(params: ModelParams) -> BandedSymmetricMatrix:
    """Assemble H in the flat (n, M) product basis, hard-truncated at n_max."""
    d = params.spin_dim
    dim = params.dim
    if dim > MAX_DIM:
        raise CapacityError(f"basis dimension {dim} exceeds the limit {MAX_DIM}")
    s = params.spin
    flat = np.arange(dim)
    n, k = np.divmod(flat, d)
    m = k - s

    bands = np.zeros((d + 2, dim))
    bands[0] = params.delta_e * m + n
    u = params.coupling_u
    # (n, M) -> (n+1, M-1) at offset d-1, (n, M) -> (n+1, M+1) at offset d+1
    for dm, offset in ((-1, d - 1), (+1, d + 1)):
        rows = flat[: dim - offset]
        mm = m[rows]
        ok = (mm + dm >= -s - 1e-9) & (mm + dm <= s + 1e-9)
        two_sx = np.sqrt(np.maximum(s * (s + 1) - mm * (mm + dm), 0.0))
        bands[offset, : dim - offset] = np.where(ok, u * np.sqrt(n[rows] + 1.0) * two_sx, 0.0)
    return BandedSymmetricMatrix(bands)


def basis_labels(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Occupation n and spin projection M of every flat basis index."""
    n, k = np.divmod(np.arange(params.dim), params.spin_dim)
    return n, k - params.spin


def check_truncation(params: ModelParams, delta_n: int = 0) -> bool:
    """Warn when n_max is below n0 + delta_n + 10 sqrt(n0); return validity."""
    need = params.n0 + delta_n + 10 * math.sqrt(params.n0)
    if params.n_max < need:
        warnings.warn(
            f"n_max={params.n_max} below recommended {need:.0f}; Fock leakage may bias levels",
            TruncationWarning,
            stacklevel=2,
        )
        return False
    return True


@dataclass(frozen=True)
class RotatedPotential:
    """V_M(y) = y^2/2 + M sqrt(delta_e^2 + 8 U^2 y^2).

    Eigenvalues of -u''/2 + V_M u are E + 1/2, with E the rotated-frame
    level energy.
    """

    delta_e: float
    coupling_u: float
    m: float

    @classmethod
    def from_params(cls, params: ModelParams, m: float) -> "RotatedPotential":
        return cls(params.delta_e, params.coupling_u, m)

    def phi(self, y):
        return np.sqrt(self.delta_e**2 + 8.0 * self.coupling_u**2 * np.square(y))

    def __call__(self, y):
        return 0.5 * np.square(y) + self.m * self.phi(y)

    def stationary_minimum(self) -> float:
        if self.m >= 0 or 8 * self.coupling_u**2 * abs(self.m) <= self.delta_e:
            return self(0.0)
        # double well for strong negative M: y*^2 from V' = 0
        c = 8 * self.coupling_u**2
        y2 = ((self.m * c) ** 2 - self.delta_e**2) / c
        return float(self(math.sqrt(max(y2, 0.0))))


def v_coupling_function(params: ModelParams):
    """Return f(y) = (U/delta_e) / (1 + 8 U^2 y^2 / delta_e^2)."""
    ratio = params.coupling_u / params.delta_e
    c = 8.0 * ratio**2

    def f(y):
        return ratio / (1.0 + c * np.square(y))

    return f


def spin_y_squared_factor(spin: float, m: float) -> float:
    """<S, M| (2 Sy)^2 |S, M>."""
    ops = spin_matrices(spin)
    idx = int(round(spin - m))
    return float(((2 * ops.sy) @ (2 * ops.sy))[idx, idx].real)


def w_expectation(params: ModelParams, n: int, m: float) -> float:
    """Diagonal expectation of the neglected W term in the state (n, M).

    The M = 0 wavefunction is exactly the oscillator eigenfunction; other M
    use the rotated-frame solution (finite differences up to n = 5000, an
    orbit average above).
    """
    if params.coupling_u == 0:
        return 0.0
    f = v_coupling_function(params)
    factor = spin_y_squared_factor(params.spin, m)

    def f2(y):
        return f(y) ** 2

    if m == 0:
        from .dressed import ho_expectation

        return factor * ho_expectation(f2, n)
    from . import rotated1d

    if n <= rotated1d.FD_MAX_N:
        _, u = rotated1d.solve_rotated_level(params, m, n)
        return factor * float(np.sum(f2(u.y) * u.values**2) * u.step)
    return factor * rotated1d.orbit_average(RotatedPotential.from_params(params, m), n, f2)
