"""Units, model parameters, spin matrices and product-basis indexing.

Natural units throughout: hbar = 1 and omega0 = 1, so every energy is in
units of hbar*omega0 and every time in units of 1/omega0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidParameterError

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib


def _two_s(spin: float) -> int:
    two_s = 2 * float(spin)
    if two_s < 1 or abs(two_s - round(two_s)) > 1e-12:
        raise InvalidParameterError(f"spin must be a positive half-integer, got {spin!r}")
    return int(round(two_s))


@dataclass(frozen=True)
class ModelParams:
    """Physical configuration of the spin-boson model.

    Attributes:
        delta_e: bare transition energy of the spin system.
        coupling_u: oscillator-spin coupling U.
        spin: spin quantum number S (positive half-integer).
        n0: reference oscillator occupation.
        n_max: Fock-space truncation (inclusive).
        omega0: oscillator quantum, fixed to 1.
    """

    delta_e: float
    coupling_u: float
    n0: int
    n_max: int
    spin: float = 1.0
    omega0: float = field(default=1.0)

    def __post_init__(self):
        if not self.delta_e > 0:
            raise InvalidParameterError(f"delta_e must be > 0, got {self.delta_e}")
        if not self.coupling_u >= 0:
            raise InvalidParameterError(f"coupling_u must be >= 0, got {self.coupling_u}")
        if self.omega0 != 1.0:
            raise InvalidParameterError("omega0 is fixed to 1 (natural units)")
        if int(self.n0) != self.n0 or self.n0 < 0:
            raise InvalidParameterError(f"n0 must be a non-negative integer, got {self.n0}")
        if int(self.n_max) != self.n_max or self.n_max <= self.n0:
            raise InvalidParameterError(f"n_max must be an integer > n0, got {self.n_max}")
        _two_s(self.spin)
        object.__setattr__(self, "n0", int(self.n0))
        object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "spin", float(self.spin))

    @classmethod
    def from_g(cls, delta_e: float, g: float, n0: int, n_max: int, spin: float = 1.0):
        return cls(delta_e=delta_e, coupling_u=coupling_from_g(g, n0, delta_e),
                   n0=n0, n_max=n_max, spin=spin)

    @property
    def g(self) -> float:
        return dimensionless_g(self.coupling_u, self.n0, self.delta_e)

    @property
    def spin_dim(self) -> int:
        return _two_s(self.spin) + 1

    @property
    def dim(self) -> int:
        return (self.n_max + 1) * self.spin_dim

    @property
    def large_mismatch(self) -> bool:
        # advisory regime flag only; nothing is allowed to depend on it
        return self.delta_e >= 5.0

    def m_values(self) -> np.ndarray:
        """Spin projections S, S-1, ..., -S (the Sz diagonal order)."""
        return self.spin - np.arange(self.spin_dim)

    def with_g(self, g: float) -> "ModelParams":
        return replace(self, coupling_u=coupling_from_g(g, self.n0, self.delta_e))

    def with_coupling(self, coupling_u: float) -> "ModelParams":
        return replace(self, coupling_u=coupling_u)


def dimensionless_g(coupling_u: float, n0: int, delta_e: float) -> float:
    """g = U sqrt(n0) / delta_e."""
    if delta_e == 0:
        raise InvalidParameterError("delta_e must be non-zero")
    return coupling_u * math.sqrt(n0) / delta_e


def coupling_from_g(g: float, n0: int, delta_e: float) -> float:
    """Inverse of :func:`dimensionless_g`."""
    if n0 <= 0:
        raise InvalidParameterError("g is undefined for n0 = 0")
    return g * delta_e / math.sqrt(n0)


@dataclass(frozen=True)
class SpinOperators:
    """Spin matrices in the |S, M> basis ordered M = S, S-1, ..., -S."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @property
    def spin(self) -> float:
        return (self.sz.shape[0] - 1) / 2


def spin_matrices(spin: float) -> SpinOperators:
    two_s = _two_s(spin)
    s = two_s / 2
    m = s - np.arange(two_s + 1)
    # <M+1|S+|M> sits one row above the diagonal in this ordering
    ladder = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    s_plus = np.diag(ladder, k=1)
    s_minus = s_plus.T
    sx = (s_plus + s_minus) / 2
    sy = (s_plus - s_minus) / 2j
    sz = np.diag(m)
    for mat in (sx, sy, sz):
        mat.setflags(write=False)
    return SpinOperators(sx=sx, sy=sy, sz=sz)


@dataclass(frozen=True)
class BasisIndex:
    """(n, M) label of a product basis state and its flat position.

    The flat index is ``n * (2S+1) + (M + S)``; with this ordering the
    coupling (n, M) <-> (n+1, M+-1) stays within 2S+2 of the diagonal.
    """

    n: int
    m: float
    spin: float = 1.0

    @property
    def flat(self) -> int:
        return flatten(self.n, self.m, self.spin)

    @classmethod
    def from_flat(cls, flat: int, spin: float = 1.0) -> "BasisIndex":
        n, m = unflatten(flat, spin)
        return cls(n=n, m=m, spin=spin)


def flatten(n: int, m: float, spin: float = 1.0) -> int:
    two_s = _two_s(spin)
    k = m + two_s / 2
    if n < 0 or k < 0 or k > two_s or abs(k - round(k)) > 1e-12:
        raise InvalidParameterError(f"no basis state (n={n}, M={m}) for spin {spin}")
    return int(n) * (two_s + 1) + int(round(k))


def unflatten(flat: int, spin: float = 1.0) -> tuple[int, float]:
    two_s = _two_s(spin)
    if flat < 0:
        raise InvalidParameterError(f"negative flat index {flat}")
    n, k = divmod(int(flat), two_s + 1)
    return n, k - two_s / 2


# ---------------------------------------------------------------------------
# configuration files

def load_config(path: str | Path) -> dict[str, Any]:
    """Read a flat ``key = value`` file (TOML syntax) or a JSON map.

    Nested tables are flattened one level: ``[model] delta_e = 11`` and a
    top-level ``delta_e = 11`` are equivalent.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidParameterError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise InvalidParameterError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidParameterError("config must be a key/value map")
    flat: dict[str, Any] = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def default_n_max(n0: int, delta_n: int = 0) -> int:
    """Truncation policy: n0 + delta_n + 10 sqrt(n0), plus a small pad."""
    return int(n0 + delta_n + math.ceil(10 * math.sqrt(n0)) + 10)


def params_from_config(cfg: dict[str, Any]) -> ModelParams:
    """Build :class:`ModelParams` from a config map.

    Exactly one of ``coupling_u`` and ``g`` may be given; a missing ``n_max``
    falls back to :func:`default_n_max`.
    """

    def need(key):
        if key not in cfg:
            raise InvalidParameterError(f"missing config key: {key}")
        return cfg[key]

    try:
        delta_e = float(need("delta_e"))
        n0 = int(need("n0"))
        spin = float(cfg.get("spin", 1.0))
        n_max = int(cfg.get("n_max", default_n_max(n0, int(cfg.get("delta_n", 0)))))
        if "coupling_u" in cfg and "g" in cfg:
            raise InvalidParameterError("config key conflict: give coupling_u or g, not both")
        if "coupling_u" in cfg:
            u = float(cfg["coupling_u"])
        elif "g" in cfg:
            u = coupling_from_g(float(cfg["g"]), n0, delta_e)
        else:
            u = 0.0
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(f"bad config value: {exc}") from exc
    return ModelParams(delta_e=delta_e, coupling_u=u, n0=n0, n_max=n_max, spin=spin)
