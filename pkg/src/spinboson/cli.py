"""Command-line front end.

Every subcommand reads a TOML or JSON config, writes its CSV/JSON result to
--out, and records a manifest_<command>.json next to it.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .core import ModelParams, default_n_max, load_config, params_from_config
from .dressed import (
    ResonanceSpec,
    dressed_energy,
    dressed_energy_series,
    hermann_swain_lhs,
    resonance_g,
    resonance_g_limit,
)
from .dynamics import (
    ThreeStateAmplitudes,
    ThreeStateHamiltonian,
    analytic_trajectory,
    coupling_v,
    evolve_numeric,
    expectations,
    write_trajectory_csv,
)
from .errors import InvalidParameterError, NoResonanceError, SpinBosonError
from .rotated1d import integral_I, wkb_parameters
from .spectroscopy import (
    basis_mismatch,
    direct_fit,
    fit_plateau,
    half_crossing,
    label_states,
    levels_near,
    n_crit_estimate,
    splitting_scan,
    write_scan_csv,
)

TOLERANCES = {
    "quadrature_rtol": 1e-9,
    "eig_residual_rel": 1e-13,
    "resonance_residual_rel": 1e-10,
    "wkb_ladder_fail_rtol": 0.05,
}


class Run:
    """Collects outputs and diagnostics for the manifest."""

    def __init__(self, command: str, args, cfg: dict):
        self.command = command
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.args = args
        self.outputs: list[str] = []
        self.diagnostics: dict = {}
        self.params: ModelParams | None = None
        self.start = time.perf_counter()

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(str(p))
        return p

    def write_json(self, name: str, data: dict) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def finish(self, status: str = "ok") -> None:
        manifest = {
            "command": self.command,
            "status": status,
            "config": self.cfg,
            "params": asdict(self.params) if self.params else None,
            "outputs": self.outputs,
            "wall_seconds": time.perf_counter() - self.start,
            "diagnostics": self.diagnostics,
            "tolerances": TOLERANCES,
            "seed": self.args.seed,
            "threads": self.args.threads,
            "versions": {
                "spinboson": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        }
        with open(self.out / f"manifest_{self.command}.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _spec(cfg) -> ResonanceSpec:
    if "delta_n" in cfg:
        return ResonanceSpec(int(cfg["delta_n"]))
    if "k" in cfg:
        return ResonanceSpec.from_k(int(cfg["k"]))
    raise InvalidParameterError("missing config key: delta_n (or k)")


def _resonant_params(cfg, spec: ResonanceSpec) -> ModelParams:
    """Config params; without a coupling, g is set to the resonant value."""
    if "coupling_u" in cfg or "g" in cfg:
        return params_from_config(cfg)
    p = params_from_config({**cfg, "coupling_u": 0.0})  # placeholder coupling, replaced below
    return p.with_g(resonance_g(p.delta_e, spec, p.n0))


# ---------------------------------------------------------------------------
# subcommands

def cmd_dressed(run: Run) -> int:
    cfg = run.cfg
    delta_e = float(cfg.get("delta_e", 11.0))
    n0 = int(cfg.get("n0", 100_000))
    k = int(cfg.get("k", (int(cfg["delta_n"]) - 1) // 2 if "delta_n" in cfg else 1))
    g_values = cfg.get("g_values")
    if g_values is None:
        g_values = np.linspace(0.0, float(cfg.get("g_max", 0.3)), int(cfg.get("g_steps", 31)))
    run.params = ModelParams(delta_e, 0.0, n0, n0 + 1)
    with open(run.path("dressed.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["g", "dressed_ratio", "series_ratio", f"hs_ratio_k{k}"])
        for g in map(float, g_values):
            ratio = dressed_energy(run.params.with_g(g)) / delta_e
            w.writerow([f"{x:.12g}" for x in (g, ratio, dressed_energy_series(g), hermann_swain_lhs(g, k))])
    return 0


def cmd_resonance(run: Run) -> int:
    cfg = run.cfg
    spec = _spec(cfg)
    base = {k: v for k, v in cfg.items() if k not in ("coupling_u", "g")}
    p = params_from_config({**base, "coupling_u": 0.0})
    g = resonance_g(p.delta_e, spec, p.n0)
    run.params = p.with_g(g)
    run.write_json("resonance.json", {
        "delta_n": spec.delta_n,
        "g_star": g,
        "g_star_limit": resonance_g_limit(p.delta_e, spec),
        "coupling_u": run.params.coupling_u,
        "dressed_energy": dressed_energy(run.params),
    })
    return 0


def cmd_spectrum(run: Run) -> int:
    cfg = run.cfg
    p = params_from_config(cfg)
    run.params = p
    half = float(cfg.get("window", 5))
    pairs = levels_near(p, p.n0 - half, p.n0 + half, seed=run.args.seed)
    with open(run.path("spectrum.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["energy", "n_label", "m_label", "sz_expect", "occ_expect", "confidence"])
        for lv in label_states(pairs, p):
            w.writerow([f"{lv.energy:.12g}", lv.n_label, lv.m_label,
                        f"{lv.sz_expect:.12g}", f"{lv.occ_expect:.12g}", f"{lv.confidence:.12g}"])
    run.diagnostics["levels"] = len(pairs)
    return 0


def cmd_fit(run: Run) -> int:
    cfg = run.cfg
    spec = _spec(cfg)
    p = _resonant_params(cfg, spec)
    run.params = p
    fit = direct_fit(p, spec.delta_n, window=int(cfg.get("window", 50)), seed=run.args.seed)
    mismatch = basis_mismatch(fit, spec.delta_n)
    run.write_json("fit.json", {
        **{k: getattr(fit, k) for k in ("a", "b", "c", "d", "f", "residual_rms", "levels_used")},
        "n0": p.n0,
        "g": p.g,
        "n0_D": p.n0 * fit.d,
        "n0_F": p.n0 * fit.f,
        "mismatch": mismatch,
        "n0_mismatch": p.n0 * mismatch,
    })
    return 0


def _scan(run: Run, spec: ResonanceSpec):
    cfg = run.cfg
    delta_e = float(cfg.get("delta_e", 11.0))
    if float(cfg.get("coupling_u", 1.0)) == 0 or float(cfg.get("g", 1.0)) == 0:
        raise NoResonanceError("zero coupling in the config: there is no anticrossing to scan")
    n0_list = [int(float(x)) for x in cfg.get("n0_list", [1e3, 3e3, 1e4, 3e4, 1e5])]
    # the template only carries delta_e, spin and a switched-on coupling
    template = ModelParams(delta_e, 1.0, 1, 2, float(cfg.get("spin", 1.0)))
    result = splitting_scan(template, spec.delta_n, n0_list, threads=run.args.threads, seed=run.args.seed)
    run.diagnostics["failures"] = [{"n0": p.n0, "error": p.error} for p in result.failures]
    if len(result.failures) > len(result.points) / 2:
        return result, 3
    return result, 0


def cmd_splitting_scan(run: Run) -> int:
    spec = _spec(run.cfg)
    result, code = _scan(run, spec)
    write_scan_csv(result, run.path("splitting_scan.csv"))
    return code


def _wkb(cfg, spec):
    delta_e = float(cfg.get("delta_e", 11.0))
    g = resonance_g_limit(delta_e, spec)
    n_ref = 100_000
    params = ModelParams.from_g(delta_e, g, n_ref, default_n_max(n_ref, spec.delta_n))
    return params, wkb_parameters(params, spec.delta_n)


def cmd_wkb(run: Run) -> int:
    spec = _spec(run.cfg)
    p, w = _wkb(run.cfg, spec)
    run.params = p
    run.write_json("wkb.json", {
        "g_star": p.g,
        "n0_D": w.n0_D,
        "n0_F": w.n0_F,
        "I_over_sqrt_n0": w.I_over_sqrt_n0,
        "n0_D_half_quanta": 2 * w.n0_D,
        "n0_F_half_quanta": 2 * w.n0_F,
        "n0_mismatch": w.n0_F - spec.delta_n * w.n0_D,
    })
    return 0


def cmd_ncrit(run: Run) -> int:
    spec = _spec(run.cfg)
    p, w = _wkb(run.cfg, spec)
    run.params = p
    c = w.n0_F - spec.delta_n * w.n0_D
    estimate = n_crit_estimate(c, p.g, w.I_over_sqrt_n0)
    out = {
        "n_crit_estimate": estimate,
        "inputs": {"n0_mismatch": c, "g_star": p.g, "I_over_sqrt_n0": w.I_over_sqrt_n0,
                   "n0_D": w.n0_D, "n0_F": w.n0_F},
    }
    code = 0
    if not run.cfg.get("skip_scan", False):
        result, code = _scan(run, spec)
        ok = result.ok
        if len(ok) >= 3:
            n0s = [q.n0 for q in ok]
            s = [q.splitting for q in ok]
            fit = fit_plateau(n0s, s)
            out["n_crit_measured"] = fit.half_point
            out["plateau"] = fit.plateau
            out["plateau_over_sqrt2_v"] = fit.plateau / (math.sqrt(2) * 2 * p.g * w.I_over_sqrt_n0)
            try:
                out["half_crossing_interpolated"] = half_crossing(n0s, s, fit.plateau)
            except SpinBosonError as exc:
                out["half_crossing_interpolated"] = None
                run.diagnostics["interpolation"] = str(exc)
            out["scan"] = [{"n0": q.n0, "g_star": q.g_star, "splitting": q.splitting} for q in ok]
        else:
            out["n_crit_measured"] = None
    run.write_json("ncrit.json", out)
    return code


def cmd_dynamics(run: Run) -> int:
    cfg = run.cfg
    delta_n = int(cfg.get("delta_n", 25))
    if "v" in cfg:
        v = float(cfg["v"])
    elif "coupling_u" in cfg or "g" in cfg:
        p = params_from_config(cfg)
        run.params = p
        v = coupling_v(p, integral_I(p, 0, p.n0, delta_n)) if p.coupling_u else 0.0
    else:
        v = 1 / math.sqrt(2)  # time axis in units of 1/(sqrt(2) v)
    eps0 = float(cfg.get("eps0", 0.0))
    mismatch = float(cfg.get("mismatch", 0.0))
    omega = math.sqrt(2) * abs(v)
    t_max = float(cfg.get("t_max", 2 * (2 * math.pi / omega) if omega else 10.0))
    t = np.linspace(0.0, t_max, int(cfg.get("t_steps", 401)))
    if mismatch == 0 and "v_minus" not in cfg and "v_plus" not in cfg:
        traj = analytic_trajectory(t, v, eps0)
    else:
        h = ThreeStateHamiltonian((eps0 + mismatch, eps0, eps0 + mismatch), v,
                                  cfg.get("v_minus"), cfg.get("v_plus"))
        traj = evolve_numeric(ThreeStateAmplitudes.basis(-1), h, t)
    write_trajectory_csv(traj, delta_n, run.path("dynamics.csv"))
    ex = expectations(traj, delta_n)
    run.diagnostics.update({"v": v, "norm_drift": float(np.abs(traj.probabilities.sum(1) - 1).max()),
                            "expect_dn_range": [float(ex.dn.min()), float(ex.dn.max())]})
    return 0


COMMANDS = {
    "dressed": cmd_dressed,
    "resonance": cmd_resonance,
    "spectrum": cmd_spectrum,
    "fit": cmd_fit,
    "splitting-scan": cmd_splitting_scan,
    "ncrit": cmd_ncrit,
    "dynamics": cmd_dynamics,
    "wkb": cmd_wkb,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinboson", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="TOML or JSON configuration file")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0, help="Lanczos start-vector seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run = None
    try:
        if args.threads < 1:
            raise InvalidParameterError("--threads must be >= 1")
        cfg = load_config(args.config) if args.config else {}
        run = Run(args.command, args, cfg)
        code = COMMANDS[args.command](run)
        run.finish("ok" if code == 0 else "partial-failure")
        return code
    except SpinBosonError as exc:
        print(f"spinboson {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        if run is not None:
            run.diagnostics["error"] = f"{type(exc).__name__}: {exc}"
            run.finish("error")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
