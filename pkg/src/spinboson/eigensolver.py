"""Eigenpairs of :class:`BandedSymmetricMatrix`.

Two paths: a dense banded solve (LAPACK ``dsbevd`` through
``scipy.linalg.eig_banded``) for the whole spectrum at moderate dimension,
and shift-invert Lanczos for the few eigenpairs nearest a target energy,
which is what the large-n0 anticrossing scans need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import CapacityError, ConvergenceError, InvalidParameterError
from .hamiltonian import BandedSymmetricMatrix

DENSE_CEILING = 20_000
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray


def eig_all(h: BandedSymmetricMatrix, dense_ceiling: int = DENSE_CEILING) -> list[EigenPair]:
    """Full ascending spectrum with eigenvectors."""
    if h.dim > dense_ceiling:
        raise CapacityError(f"dimension {h.dim} above dense ceiling {dense_ceiling}")
    w, v = scipy.linalg.eig_banded(h.bands, lower=True)
    return [EigenPair(float(w[i]), v[:, i]) for i in range(h.dim)]


def eigvals_all(h: BandedSymmetricMatrix, dense_ceiling: int = DENSE_CEILING) -> np.ndarray:
    if h.dim > dense_ceiling:
        raise CapacityError(f"dimension {h.dim} above dense ceiling {dense_ceiling}")
    return scipy.linalg.eig_banded(h.bands, lower=True, eigvals_only=True)


class ShiftInvert:
    """Banded LU of (H - sigma I) with repeated solves.

    LAPACK's general band LU (``dgbtrf``) with partial pivoting is used for
    the solves; it stays stable when sigma sits inside the spectrum, which
    a pivot-free LDL^T does not guarantee. Inertia is counted separately by
    :func:`inertia_count`.
    """

    def __init__(self, h: BandedSymmetricMatrix, sigma: float):
        b = h.bandwidth
        self.kl = self.ku = b
        self.sigma = float(sigma)
        for attempt in range(4):
            ab = np.zeros((3 * b + 1, h.dim))
            # LAPACK general band: A[i, j] lives at ab[kl + ku + i - j, j]
            ab[2 * b] = h.bands[0] - self.sigma
            for k in range(1, b + 1):
                vals = h.bands[k, : h.dim - k]
                ab[2 * b - k, k:] = vals  # upper: A[j-k, j]
                ab[2 * b + k, : h.dim - k] = vals  # lower: A[j+k, j]
            lu, piv, info = lapack.dgbtrf(ab, b, b)
            if info < 0:
                raise InvalidParameterError(f"dgbtrf argument error {info}")
            if info == 0:
                self._lu, self._piv = lu, piv
                return
            # exactly singular: sigma hit an eigenvalue
            self.sigma += 1e-8 * max(1.0, abs(self.sigma))
        raise ConvergenceError("shift-invert factorization stayed singular")

    def solve(self, x: np.ndarray) -> np.ndarray:
        y, info = lapack.dgbtrs(self._lu, self.kl, self.ku, x, self._piv)
        if info != 0:
            raise InvalidParameterError(f"dgbtrs failed with info={info}")
        return y


def inertia_count(h: BandedSymmetricMatrix, sigma: float) -> int:
    """Number of eigenvalues below sigma (Sylvester's law of inertia).

    Counts negative pivots of a band LDL^T of H - sigma I without pivoting;
    a zero pivot is nudged to a tiny negative value, the usual Sturm-count
    convention.
    """
    b = h.bandwidth
    dim = h.dim
    diag = (h.bands[0] - sigma).tolist()
    bands = [h.bands[k].tolist() for k in range(b + 1)]
    tiny = np.finfo(float).tiny ** 0.5 * max(1.0, h.norm_bound())
    d = [0.0] * dim
    # lcol[j][k] = L[j+k, j]; columns older than b are dropped
    lcol: list[list[float]] = []
    neg = 0
    for j in range(dim):
        # work[k] = A[j+k, j] - sum_p L[j+k, p] L[j, p] d[p]
        work = [bands[k][j] if j + k < dim else 0.0 for k in range(b + 1)]
        work[0] = diag[j]
        for q in range(1, b + 1):
            p = j - q
            if p < 0:
                break
            col = lcol[p]
            ljp = col[q]
            if ljp == 0.0:
                continue
            t = ljp * d[p]
            work[0] -= ljp * t
            for k in range(1, b + 1 - q):
                work[k] -= col[q + k] * t
        dj = work[0]
        if dj == 0.0:
            dj = -tiny
        d[j] = dj
        if dj < 0:
            neg += 1
        lcol.append([1.0] + [w / dj for w in work[1:]])
        if len(lcol) > b + 1:
            lcol[j - b - 1] = None  # type: ignore[call-overload]
    return neg


def eig_interior(
    h: BandedSymmetricMatrix,
    sigma: float,
    count: int,
    *,
    tol: float = RESIDUAL_TOL,
    max_krylov: int | None = None,
    seed: int = 0,
) -> list[EigenPair]:
    """The ``count`` eigenpairs nearest sigma, sorted by eigenvalue.

    Lanczos on (H - sigma)^-1 with full reorthogonalization and no restarts,
    followed by a Rayleigh-Ritz pass with H itself on the wanted Ritz
    vectors. Convergence means ||Hx - lambda x|| <= tol * ||H|| for every
    returned pair.
    """
    if count < 1:
        raise InvalidParameterError("count must be >= 1")
    dim = h.dim
    if count > dim:
        raise InvalidParameterError(f"count {count} exceeds dimension {dim}")
    if dim <= max(2 * count + 20, 60):
        pairs = eig_all(h)
        order = sorted(range(dim), key=lambda i: abs(pairs[i].value - sigma))[:count]
        return sorted((pairs[i] for i in order), key=lambda p: p.value)

    op = ShiftInvert(h, sigma)
    hnorm = h.norm_bound()
    m_max = min(dim, max_krylov or max(6 * count + 40, 80))
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(dim)
    basis = np.empty((m_max + 1, dim))
    basis[0] = q / np.linalg.norm(q)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    best = np.inf
    check = max(count + 4, 8)
    j = 0
    while True:
        w = op.solve(basis[j])
        alpha[j] = basis[j] @ w
        w -= alpha[j] * basis[j]
        if j > 0:
            w -= beta[j - 1] * basis[j - 1]
        for _ in range(2):
            w -= basis[: j + 1].T @ (basis[: j + 1] @ w)
        beta[j] = np.linalg.norm(w)
        j += 1
        exhausted = beta[j - 1] <= 1e-14 * np.abs(alpha[:j]).max()
        if exhausted or j == m_max or (j >= check and (j - check) % 4 == 0):
            theta, s = scipy.linalg.eigh_tridiagonal(alpha[:j], beta[: j - 1])
            take = np.argsort(-np.abs(theta))[:count]
            values, vectors, resid = _rayleigh_ritz(h, basis[:j].T @ s[:, take])
            best = min(best, float(resid.max()))
            if (resid.max() <= tol * hnorm and len(take) == count) or exhausted or j == m_max:
                break
        basis[j] = w / beta[j - 1]

    if best > tol * hnorm or len(values) < count:
        raise ConvergenceError(
            f"shift-invert Lanczos: residual {best:.3e} above {tol * hnorm:.3e} "
            f"after {j} steps",
            best_residual=best,
        )
    order = np.argsort(values)
    return [EigenPair(float(values[i]), vectors[:, i]) for i in order]


def _rayleigh_ritz(h: BandedSymmetricMatrix, x: np.ndarray):
    x, _ = np.linalg.qr(x)
    hx = h.matvec(x)
    small = x.T @ hx
    values, y = np.linalg.eigh((small + small.T) / 2)
    vectors = x @ y
    resid = np.linalg.norm(hx @ y - vectors * values, axis=0)
    return values, vectors, resid


def window_count(h: BandedSymmetricMatrix, lo: float, hi: float) -> int:
    """Eigenvalues in [lo, hi) from two inertia counts."""
    return inertia_count(h, hi) - inertia_count(h, lo)
