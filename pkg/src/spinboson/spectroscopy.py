"""Level labeling, expansion fits, anticrossing search and splitting scans."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, curve_fit, minimize_scalar

from .core import ModelParams, default_n_max
from .dressed import ResonanceSpec, dressed_energy, ho_expectation, resonance_g
from .eigensolver import EigenPair, eig_interior, window_count
from .errors import (
    AccuracyError,
    BracketError,
    InvalidParameterError,
    NoResonanceError,
    SpinBosonError,
)
from .hamiltonian import basis_labels, build_hamiltonian
from .rotated1d import WkbLevelModel, integral_I

log = logging.getLogger(__name__)

CONFIDENCE_MIN = 0.8
CLUSTER_HALF_WIDTH = 0.75
EIG_TOL = 1e-13


# ---------------------------------------------------------------------------
# labeling

@dataclass(frozen=True)
class LabeledLevel:
    """Eigenvalue with its (n, M) label.

    ``confidence`` is 1 - 2|Sz/kappa - M|, where kappa = <delta_e/Phi(y)>
    converts the lab-frame <Sz> of a rotated-frame M state back to M. It is
    1 for a product state and 0 for an even mixture of neighbouring M.
    """

    energy: float
    n_label: int
    m_label: int
    sz_expect: float
    occ_expect: float
    confidence: float = 1.0

    @property
    def mixed(self) -> bool:
        return self.confidence < CONFIDENCE_MIN


def spin_projection_scale(params: ModelParams) -> float:
    """kappa = <n0| delta_e / sqrt(delta_e^2 + 8U^2 y^2) |n0>."""
    if params.coupling_u == 0:
        return 1.0
    c = 8 * (params.coupling_u / params.delta_e) ** 2
    return ho_expectation(lambda y: 1.0 / np.sqrt(1.0 + c * y * y), params.n0)


def label_states(
    pairs: list[EigenPair],
    params: ModelParams,
    kappa: float | None = None,
    spin_gap: float | None = None,
) -> list[LabeledLevel]:
    """Attach <Sz>, <a^dag a> and (n, M) labels to eigenpairs.

    M is the nearest integer to <Sz>/kappa. The occupation label is read
    off the energy, n = round(E - M * spin_gap) with spin_gap the dressed
    transition energy at n0: <a^dag a> of a level that is partly mixed with
    a partner dn quanta away is pulled by whole units, while its energy
    stays within a fraction of a quantum of n + M * spin_gap.
    """
    n_basis, m_basis = basis_labels(params)
    if kappa is None:
        kappa = spin_projection_scale(params)
    if spin_gap is None:
        spin_gap = dressed_energy(params)
    out = []
    for p in pairs:
        w = p.vector**2
        w = w / w.sum()
        occ = float(w @ n_basis)
        sz = float(w @ m_basis)
        m = int(np.clip(round(sz / kappa), -params.spin, params.spin))
        conf = max(0.0, 1.0 - 2.0 * abs(sz / kappa - m))
        n = int(round(p.value - m * spin_gap))
        out.append(LabeledLevel(p.value, n, m, sz, occ, conf))
    return out


def parity_sign(params: ModelParams, vector: np.ndarray) -> float:
    """<(-1)^(n + M + S)>, conserved by H; +-1 for an exact eigenvector."""
    n_basis, m_basis = basis_labels(params)
    sign = 1.0 - 2.0 * ((n_basis + np.round(m_basis + params.spin)).astype(np.int64) % 2)
    return float(vector**2 @ sign / (vector @ vector))


# ---------------------------------------------------------------------------
# expansion fit

@dataclass(frozen=True)
class FitCoefficients:
    """E = A + B(n-n0) + C M + D M(n-n0) + F M^2, with the fit residual."""

    a: float
    b: float
    c: float
    d: float
    f: float
    residual_rms: float
    n0: int
    levels_used: int = 0

    def energy(self, n, m):
        x = np.asarray(n) - self.n0
        return self.a + self.b * x + self.c * m + self.d * m * x + self.f * np.square(m)


def fit_levels(levels: list[LabeledLevel], n0: int, window: int = 50, min_levels: int = 15) -> FitCoefficients:
    use = [lv for lv in levels if abs(lv.n_label - n0) <= window and not lv.mixed]
    if len(use) < min_levels:
        raise InvalidParameterError(f"only {len(use)} usable levels in the window, need {min_levels}")
    x = np.array([lv.n_label - n0 for lv in use], dtype=float)
    m = np.array([lv.m_label for lv in use], dtype=float)
    e = np.array([lv.energy for lv in use])
    design = np.column_stack([np.ones_like(x), x, m, m * x, m * m])
    if np.linalg.matrix_rank(design) < 5:
        raise InvalidParameterError("fit design is rank deficient (need several n and all three M)")
    coef, *_ = np.linalg.lstsq(design, e, rcond=None)
    resid = e - design @ coef
    return FitCoefficients(*map(float, coef), float(np.sqrt(np.mean(resid**2))), n0, len(use))


def basis_mismatch(fit: FitCoefficients, delta_n: int) -> float:
    """F - D delta_n: offset of the outer basis states below the middle one."""
    return fit.f - fit.d * delta_n


def levels_near(
    params: ModelParams, lo: float, hi: float, chunk: int = 36, tol: float = 1e-11, seed: int = 0
) -> list[EigenPair]:
    """All eigenpairs with lo <= lambda < hi, gathered from interior solves.

    The range is cut into sub-windows, each owned by one solve centred on
    it; levels come about 2S+1 per unit energy, so ``chunk`` nearest pairs
    reach past the sub-window edges (checked). The union is verified
    against an inertia count.
    """
    h = build_hamiltonian(params)
    width = chunk / params.spin_dim / 1.5
    found: list[EigenPair] = []
    left = lo
    while left < hi:
        right = min(left + width, hi)
        centre = 0.5 * (left + right)
        got = eig_interior(h, centre, chunk, tol=tol, seed=seed)
        if max(abs(p.value - centre) for p in got) < 0.5 * (right - left):
            raise AccuracyError(f"{chunk} levels do not cover [{left}, {right})")
        found += [p for p in got if left <= p.value < right]
        left = right
    pairs = sorted(found, key=lambda p: p.value)
    expected = window_count(h, lo, hi)
    if expected != len(pairs):
        raise AccuracyError(f"window [{lo}, {hi}) holds {expected} levels, solves found {len(pairs)}")
    return pairs


def direct_fit(
    params: ModelParams,
    delta_n: int,
    *,
    window: int = 50,
    detune: float = 4e-3,
    seed: int = 0,
) -> FitCoefficients:
    """Fit the level expansion around n0 with g just off resonance.

    At the resonant coupling every (n+dn, -1), (n, 0), (n-dn, +1) triple is
    nearly degenerate and mixed, which spoils labels. The fit is therefore
    done at g (1 -+ detune) and the coefficients averaged: the level
    repulsion from the resonant coupling is odd in the detuning and cancels
    in the mean. The mean still carries the curvature of the coefficients
    in g, O(detune^2), which is removed by repeating at twice the detuning
    and extrapolating.
    """

    def one(g):
        p = params.with_g(g)
        need = p.n0 + window + delta_n + 2
        if p.n_max < need:
            p = ModelParams(p.delta_e, p.coupling_u, p.n0, default_n_max(need), p.spin)
        span = window + params.spin * delta_n + 2
        pairs = levels_near(p, p.n0 - span, p.n0 + span, seed=seed)
        return fit_levels(label_states(pairs, p), p.n0, window)

    fits = {k: [one(params.g * (1 + sign * k * detune)) for sign in (-1, 1)] for k in (1, 2)}
    mean = {k: np.mean([[f.a, f.b, f.c, f.d, f.f] for f in fs], axis=0) for k, fs in fits.items()}
    coef = (4 * mean[1] - mean[2]) / 3
    every = fits[1] + fits[2]
    rms = max(f.residual_rms for f in every)
    return FitCoefficients(*map(float, coef), rms, params.n0, min(f.levels_used for f in every))


# ---------------------------------------------------------------------------
# anticrossings

@dataclass(frozen=True)
class AnticrossingResult:
    g_star: float
    splitting: float
    n0: int
    delta_n: int
    pair_labels: tuple[LabeledLevel, LabeledLevel]
    cluster: tuple[float, ...] = ()
    evaluations: int = 0


class _Cluster:
    """Three same-parity levels around the (n0, M=0) basis energy at one g."""

    def __init__(
        self, params: ModelParams, delta_n: int, kappa: float, spin_gap: float, count: int = 9, seed: int = 0
    ):
        self.params = params
        h = build_hamiltonian(params)
        sigma = float(params.n0)
        pairs = eig_interior(h, sigma, count, tol=EIG_TOL, seed=seed)
        ref = parity_sign(params, _basis_vector(params, params.n0, 0.0))
        near = [
            p for p in pairs
            if abs(p.value - sigma) < CLUSTER_HALF_WIDTH and parity_sign(params, p.vector) * ref > 0.5
        ]
        if len(near) != 3:
            raise AccuracyError(
                f"expected 3 resonant levels near {sigma}, found {len(near)} at g={params.g:.8g}"
            )
        self.h = h
        self.pairs = near
        self.values = np.array([p.value for p in near])
        self.labels = label_states(near, params, kappa, spin_gap)
        occ = np.array([lv.occ_expect for lv in self.labels])
        # trace of H (occ - n0) over the triple is 2 * detuning * delta_n
        self.detuning = float(np.sum((self.values - self.values.mean()) * (occ - occ.mean())) / (2 * delta_n))
        gaps = np.diff(self.values)
        self.gap_index = int(np.argmin(gaps))
        self.gap = float(gaps[self.gap_index])


def _basis_vector(params: ModelParams, n: int, m: float) -> np.ndarray:
    v = np.zeros(params.dim)
    v[n * params.spin_dim + int(round(m + params.spin))] = 1.0
    return v


def find_anticrossing(
    template: ModelParams,
    delta_n: int,
    g_bracket: tuple[float, float] | None = None,
    *,
    g_seed: float | None = None,
    rel_width: float = 0.02,
    xtol_rel: float = 1e-7,
    verify: bool = True,
    seed: int = 0,
) -> AnticrossingResult:
    """Minimum gap between the two levels carrying the outer basis states.

    The triple (n0+dn, -1), (n0, 0), (n0-dn, +1) is tracked through the
    same-parity eigenvalues within 0.75 of n0. The diabatic detuning of the
    outer pair is linear in g and is zeroed first (Brent root); the minimum
    adjacent gap is then polished by bounded Brent minimization in a window
    a few widths of the anticrossing wide.
    """
    spec = ResonanceSpec(delta_n)
    n0 = template.n0
    if g_bracket is None:
        g0 = g_seed if g_seed is not None else resonance_g(template.delta_e, spec, n0)
        g_bracket = (g0 * (1 - rel_width), g0 * (1 + rel_width))
    g_lo, g_hi = map(float, g_bracket)
    if not 0 < g_lo < g_hi:
        raise InvalidParameterError(f"bad g bracket {g_bracket}")
    mid = template.with_g(0.5 * (g_lo + g_hi))
    kappa = spin_projection_scale(mid)
    spin_gap = dressed_energy(mid)
    cache: dict[float, _Cluster] = {}

    def cluster(g: float) -> _Cluster:
        if g not in cache:
            cache[g] = _Cluster(template.with_g(g), delta_n, kappa, spin_gap, seed=seed)
        return cache[g]

    d_lo, d_hi = cluster(g_lo).detuning, cluster(g_hi).detuning
    if d_lo * d_hi > 0:
        raise BracketError(f"outer levels do not cross in g in [{g_lo:.6g}, {g_hi:.6g}]")
    g_c = brentq(lambda g: cluster(g).detuning, g_lo, g_hi, xtol=1e-12 * g_hi)
    slope = abs(d_hi - d_lo) / (g_hi - g_lo)
    half = max(4.0 * cluster(g_c).gap / slope, 1e-9 * g_c)
    for _ in range(6):
        a, b = max(g_lo, g_c - half), min(g_hi, g_c + half)
        res = minimize_scalar(
            lambda g: cluster(g).gap, bounds=(a, b), method="bounded",
            options={"xatol": xtol_rel * g_c, "maxiter": 200},
        )
        g_star = float(res.x)
        edge = 0.02 * (b - a)
        at_lo, at_hi = g_star - a < edge, b - g_star < edge
        if not (at_lo and a > g_lo) and not (at_hi and b < g_hi):
            break
        g_c, half = g_star, half * 4
    if g_star - g_lo < 1e-3 * (g_hi - g_lo) or g_hi - g_star < 1e-3 * (g_hi - g_lo):
        raise BracketError(f"gap minimum at the bracket edge (g = {g_star:.8g})")
    best = cluster(g_star)
    if verify:
        lo = best.values.min() - 1e-6
        hi = best.values.max() + 1e-6
        all_near = eig_interior(best.h, float(n0), 9, tol=EIG_TOL, seed=seed)
        inside = sum(1 for p in all_near if lo <= p.value < hi)
        if window_count(best.h, lo, hi) != inside:
            raise AccuracyError("inertia count disagrees with the levels found near the anticrossing")
    i = best.gap_index
    return AnticrossingResult(
        g_star=g_star,
        splitting=best.gap,
        n0=n0,
        delta_n=delta_n,
        pair_labels=(best.labels[i], best.labels[i + 1]),
        cluster=tuple(float(v) for v in best.values),
        evaluations=len(cache),
    )


# ---------------------------------------------------------------------------
# n_crit and the splitting scan

def coupling_from_integral(g: float, i_over_sqrt_n0: float) -> float:
    """v = 2 g [I / sqrt(n0)] in units of hbar omega0."""
    return 2.0 * g * i_over_sqrt_n0


def n_crit_estimate(n0_mismatch_const: float, g_star: float, i_over_sqrt_n0: float) -> float:
    """|n0 (F - D dn)| / (2 sqrt(2) g [I/sqrt(n0)])."""
    denom = 2 * math.sqrt(2) * g_star * i_over_sqrt_n0
    if denom == 0:
        raise InvalidParameterError("zero coupling: n_crit undefined")
    return abs(n0_mismatch_const) / abs(denom)


def three_state_splitting(detuning: float, v: float) -> float:
    """Smallest gap of the outer pair for basis offset ``detuning`` and coupling v."""
    root = math.sqrt(detuning**2 / 4 + 2 * v * v)
    # rationalized form of root - |detuning|/2, no cancellation at large detuning
    return 2 * v * v / (root + abs(detuning) / 2) if root > 0 else 0.0


@dataclass
class ScanPoint:
    n0: int
    g_star: float = float("nan")
    splitting: float = float("nan")
    v_predicted: float = float("nan")
    mismatch: float = float("nan")
    error: str | None = None


@dataclass
class ScanResult:
    points: list[ScanPoint]
    failures: list[ScanPoint] = field(default_factory=list)

    @property
    def ok(self) -> list[ScanPoint]:
        return [p for p in self.points if p.error is None]


def _scan_point(template: ModelParams, delta_n: int, n0: int, seed: int = 0) -> ScanPoint:
    pt = ScanPoint(n0)
    try:
        p = ModelParams(template.delta_e, 0.0, n0, default_n_max(n0, delta_n), template.spin)
        g0 = resonance_g(p.delta_e, ResonanceSpec(delta_n), n0)
        res = find_anticrossing(p, delta_n, g_seed=g0, seed=seed)
        pg = p.with_g(res.g_star)
        i = integral_I(pg, 0, n0, delta_n)
        pt.g_star = res.g_star
        pt.splitting = res.splitting
        pt.v_predicted = math.sqrt(2) * abs(coupling_from_integral(res.g_star, i / math.sqrt(n0)))
        d, f = WkbLevelModel.from_params(pg).derivatives(n0)
        pt.mismatch = f - d * delta_n
    except SpinBosonError as exc:
        log.warning("scan point n0=%d failed: %s", n0, exc)
        pt.error = f"{type(exc).__name__}: {exc}"
    return pt


def splitting_scan(
    template: ModelParams, delta_n: int, n0_list, *, threads: int = 1, seed: int = 0
) -> ScanResult:
    """find_anticrossing at each n0; failures are recorded and skipped.

    ``template`` supplies delta_e and the spin, and must have the coupling
    switched on (its value is replaced by the resonant one at each n0);
    n_max follows the default truncation policy per point. Output is
    ordered by n0.
    """
    if template.coupling_u == 0:
        raise NoResonanceError("coupling switched off in the template: no anticrossing to scan")
    n0s = sorted(int(n) for n in n0_list)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda n: _scan_point(template, delta_n, n, seed), n0s))
    else:
        points = [_scan_point(template, delta_n, n, seed) for n in n0s]
    return ScanResult(points, [p for p in points if p.error is not None])


def write_scan_csv(result: ScanResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n0", "g_star", "splitting", "v_predicted", "mismatch"])
        for p in result.points:
            w.writerow([p.n0] + [f"{x:.12g}" for x in (p.g_star, p.splitting, p.v_predicted, p.mismatch)])


@dataclass(frozen=True)
class PlateauFit:
    """Three-state saturation law s = P (sqrt(x^2/4 + 1) - x/2), x = n_c / n0.

    P is the large-n0 splitting (sqrt(2) |v|) and n_c = |n0 delta| / P is
    where the basis offset equals it; s reaches P/2 at n0 = n_c / 1.5.
    """

    plateau: float
    n_c: float

    @property
    def half_point(self) -> float:
        return self.n_c / 1.5

    def __call__(self, n0):
        x = self.n_c / np.asarray(n0, dtype=float)
        return self.plateau * (np.sqrt(x * x / 4 + 1) - x / 2)


def fit_plateau(n0, splitting) -> PlateauFit:
    n0 = np.asarray(n0, dtype=float)
    s = np.asarray(splitting, dtype=float)
    if len(n0) < 3:
        raise InvalidParameterError("plateau fit needs at least 3 points")

    def model(n, p, lognc):
        x = np.exp(lognc) / n
        return p * (np.sqrt(x * x / 4 + 1) - x / 2)

    p0 = (s.max() * 1.2, math.log(np.median(n0)))
    (p, lognc), _ = curve_fit(model, n0, s, p0=p0, sigma=s, maxfev=20000)
    return PlateauFit(float(p), float(math.exp(lognc)))


def half_crossing(n0, splitting, plateau: float) -> float:
    """n0 where the measured curve passes plateau/2, log-linear interpolation."""
    n0 = np.asarray(n0, dtype=float)
    s = np.asarray(splitting, dtype=float)
    half = plateau / 2
    for i in range(len(n0) - 1):
        if (s[i] - half) * (s[i + 1] - half) <= 0 and s[i] != s[i + 1]:
            t = (half - s[i]) / (s[i + 1] - s[i])
            return float(math.exp(math.log(n0[i]) + t * (math.log(n0[i + 1]) - math.log(n0[i]))))
    raise AccuracyError("measured curve never crosses half the plateau")
