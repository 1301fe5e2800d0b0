"""Command line interface: every command writes ``<command>.csv`` plus a JSON sidecar.

Settings come from built-in defaults, then an optional flat TOML file
(``--config``), then command-line flags. The output directory is ``--out``,
else ``$ULTRAINDEX_OUT``, else ``./ultraindex_out``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__, band3d, chemistry, lattice2d, multiscatter, optimize, slab, validation
from .greens import HYDROGEN
from .lattice2d import LatticeGeometry, gamma0_collective, omega0

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_ACCEPTANCE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Opt:
    name: str
    kind: str  # float, int, str, bool, floats
    default: object
    help: str = ""
    choices: tuple = ()


SWEEP_OPTS = [
    Opt("d_min_a0", "float", 6.0, "smallest lattice constant (a0)"),
    Opt("d_max_a0", "float", 360.0, "largest lattice constant (a0)"),
    Opt("n_d", "int", 48, "number of log-spaced lattice constants"),
    Opt("aspect", "float", 2.5, "dz/d"),
    Opt("n_delta", "int", 512, "detuning grid size per lattice constant"),
    Opt("window", "float", 4.0, "detuning half-window in units of Gamma(0)"),
    Opt("chi_mode", "str", "anchored", "solve | anchored | none", ("solve", "anchored", "none")),
    Opt("chi_anchors", "floats", [6.0, 8.0, 11.0, 15.0, 22.0], "anchor lattice constants (a0)"),
    Opt("chi_max_sites", "int", 100_000, "site budget of the finite-array solver"),
    Opt("chi_r_cutoff", "float", 0.5, "absorbing-layer onset radius (lambda0)"),
    Opt("hd_combine", "str", "sum", "holon-doublon orientation combination: sum | mean", ("sum", "mean")),
    Opt("hopping_table", "str", "", "CSV with d_over_a0,t_s_ry,t_p_ry (empty: shipped table)"),
    Opt("guard", "float", 1e-3, "gap guard band relative to the gap-edge detuning"),
    Opt("workers", "int", 1, "worker threads"),
]

COMMANDS = {
    "spectrum2d": [
        Opt("d", "float", 0.01, "lattice constant (lambda0)"),
        Opt("window", "float", 5.0, "half-window in units of Gamma(0)"),
        Opt("points", "int", 1001, "number of detunings"),
        Opt("sigma_re", "float", 0.0, "Re Sigma_QC (Gamma0)"),
        Opt("sigma_im", "float", 0.0, "Im Sigma_QC (Gamma0)"),
    ],
    "band3d": [
        Opt("d", "float", 0.01, "lattice constant (lambda0)"),
        Opt("aspect", "float", 2.5, "dz/d"),
        Opt("n_points", "int", 400, "kz samples on (0, pi/dz]"),
        Opt("mn_cutoff", "int", 12, "evanescent shell cutoff"),
    ],
    "invert-map": [
        Opt("aspect_min", "float", 1.0), Opt("aspect_max", "float", 3.0), Opt("n_aspect", "int", 50),
        Opt("d_min", "float", 1 / 500), Opt("d_max", "float", 1 / 15), Opt("n_d", "int", 50),
        Opt("n_scan", "int", 1001, "slope samples per branch"),
    ],
    "chi": [
        Opt("d", "floats", list(validation.SCALING_D), "lattice constants (lambda0)"),
        Opt("aspect", "float", 2.5, "dz/d"),
        Opt("offsets", "floats", [0.0], "(delta - omega(0)) / Gamma(0)"),
        Opt("max_sites", "int", 100_000), Opt("r_cutoff", "float", 0.5),
    ],
    "chem-params": [
        Opt("d_a0", "floats", [6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 30.0, 40.0], "lattice constants (a0)"),
        Opt("with_chi", "bool", True, "evaluate Gamma_d and Sigma_QC at omega(0)"),
    ] + [o for o in SWEEP_OPTS if o.name in ("aspect", "chi_mode", "chi_anchors", "chi_max_sites",
                                              "chi_r_cutoff", "hd_combine", "hopping_table")],
    "figure6a": SWEEP_OPTS + [Opt("gamma_prime", "float", 0.0, "extra loss rate (Gamma0)")],
    "figure6b": SWEEP_OPTS + [
        Opt("targets", "floats", [5.0, 10.0, 15.0, 20.0, 25.0, 30.0], "target Re n"),
        Opt("gamma_primes", "floats", [1.0, 10.0, 100.0], "extra loss rates (Gamma0)"),
    ],
    "slab-check": [
        Opt("n_re", "float", 5.0), Opt("n_im", "float", 0.1),
        Opt("k0L", "float", 4.0, "slab length times k0"),
        Opt("k0dz", "floats", [0.04, 0.02, 0.01, 0.005], "layer spacings times k0"),
    ],
    "validate": [
        Opt("profile", "str", "full", "full | smoke", ("full", "smoke")),
        Opt("only", "str", "", "comma-separated check ids"),
    ],
}


def _parse_value(opt: Opt, raw):
    if opt.kind == "float":
        return float(raw)
    if opt.kind == "int":
        if isinstance(raw, float) and not raw.is_integer():
            raise ValueError("not an integer")
        return int(raw)
    if opt.kind == "bool":
        if isinstance(raw, bool):
            return raw
        s = str(raw).lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError("not a boolean")
    if opt.kind == "floats":
        if isinstance(raw, str):
            raw = [x for x in raw.split(",") if x.strip()]
        return [float(x) for x in raw]
    return str(raw)


def resolve_settings(command: str, config: dict, flags: dict) -> dict:
    """Defaults, then config keys, then flags; all problems reported together."""
    opts = {o.name: o for o in COMMANDS[command]}
    errs = []
    known = {o.name for specs in COMMANDS.values() for o in specs}
    for k in config:
        if k not in known:
            errs.append(f"unknown config key {k!r}")
    out = {}
    for name, opt in opts.items():
        raw = opt.default
        if name in config:
            raw = config[name]
        if flags.get(name) is not None:
            raw = flags[name]
        try:
            out[name] = _parse_value(opt, raw)
        except (TypeError, ValueError) as exc:
            errs.append(f"{name}: {exc}")
            continue
        if opt.choices and out[name] not in opt.choices:
            errs.append(f"{name}: {out[name]!r} not in {list(opt.choices)}")
    if errs:
        raise ConfigError("; ".join(errs))
    return out


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    nested = [k for k, v in doc.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; found tables {nested}")
    return doc


def config_hash(command: str, settings: dict) -> str:
    doc = json.dumps({"command": command, "settings": settings}, sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return "%.12e" % x
    return "" if x is None else str(x)


def write_outputs(out_dir: Path, command: str, header, rows, settings: dict, budgets: dict,
                  provenance: dict | None = None):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{command}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    meta = {"schema_version": SCHEMA_VERSION, "command": command, "settings": settings,
            "config_hash": config_hash(command, settings), "library_version": __version__,
            "budgets": budgets,
            "provenance": {"numpy": np.__version__, "scipy": scipy.__version__,
                           "constants": HYDROGEN.to_dict(), **(provenance or {})}}
    (out_dir / f"{command}.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")


def _sweep_config(s: dict, **extra) -> optimize.SweepConfig:
    if not 0 < s["d_min_a0"] <= s["d_max_a0"]:
        raise ConfigError("need 0 < d_min_a0 <= d_max_a0")
    d = np.geomspace(s["d_min_a0"], s["d_max_a0"], s["n_d"]) if s["n_d"] > 1 else [s["d_min_a0"]]
    try:
        return optimize.SweepConfig(
            d_over_a0=tuple(float(x) for x in d), aspect=s["aspect"], n_delta=s["n_delta"],
            window=s["window"], chi_mode=s["chi_mode"], chi_anchors=tuple(s["chi_anchors"]),
            chi_max_sites=s["chi_max_sites"], chi_r_cutoff=s["chi_r_cutoff"],
            hd_combine=s["hd_combine"], hopping_table=s["hopping_table"] or None, guard=s["guard"],
            workers=s["workers"], **extra)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _chi_budgets(source: optimize.ChemistrySource) -> dict:
    cfg = source.config
    if cfg.chi_mode == "none":
        return {"chi_mode": "none"}
    anchors = cfg.chi_anchors if cfg.chi_mode == "anchored" else ()
    out = {"chi_mode": cfg.chi_mode, "chi_max_sites": cfg.chi_max_sites}
    if anchors:
        tabs = source._anchors()[2]
        out["anchors"] = [{"d_over_a0": a, "achieved_r_cutoff": t.achieved_r_cutoff, "n_sites": t.n_sites}
                          for a, t in zip(sorted(anchors), tabs)]
    return out


def cmd_spectrum2d(s, out):
    geom = LatticeGeometry(s["d"], s["d"])
    g = gamma0_collective(s["d"])
    w0 = omega0(geom)
    x = np.linspace(-s["window"], s["window"], s["points"])
    delta = w0 + x * g
    r, t = lattice2d.layer_r_t(delta, geom, complex(s["sigma_re"], s["sigma_im"]))
    R, T = np.abs(r) ** 2, np.abs(t) ** 2
    rows = zip(delta, x, r.real, r.imag, t.real, t.imag, R, T, R + T, lattice2d.transmission_phase(delta, geom))
    write_outputs(out, "spectrum2d", ["delta_over_gamma0", "delta_tilde_over_gamma_collective", "re_r", "im_r",
                                      "re_t", "im_t", "R", "T", "R_plus_T", "phase_t"],
                  rows, s, {"omega0_tol": 1e-9})


def cmd_band3d(s, out):
    geom = LatticeGeometry.from_aspect(s["d"], s["aspect"])
    bs = band3d.band_structure(geom, s["n_points"], s["mn_cutoff"])
    scale = s["d"] ** 3
    rows = zip(bs.kz * geom.dz / np.pi, scale * bs.j_total, scale * bs.j_radiative, scale * bs.j_evanescent)
    rep = band3d.invertibility(geom, s["mn_cutoff"])
    write_outputs(out, "band3d", ["kz_dz_over_pi", "j_total_scaled", "j_radiative_scaled", "j_evanescent_scaled"],
                  rows, s, {"mn_cutoff": s["mn_cutoff"]},
                  {"is_invertible": rep.is_invertible, "analytic_invertible": rep.analytic_invertible})


def cmd_invert_map(s, out):
    rows = []
    for a in np.linspace(s["aspect_min"], s["aspect_max"], s["n_aspect"]):
        for d in np.geomspace(s["d_min"], s["d_max"], s["n_d"]):
            rep = band3d.invertibility(LatticeGeometry.from_aspect(d, a), n_scan=s["n_scan"])
            rows.append((a, d, rep.is_invertible, rep.analytic_invertible, rep.ev_ratio_max,
                         rep.threshold_d_over_lambda))
    write_outputs(out, "invert-map", ["aspect", "d_over_lambda0", "is_invertible", "analytic_invertible",
                                      "ev_ratio", "analytic_threshold_d_over_lambda0"],
                  rows, s, {"n_scan": s["n_scan"], "mn_cutoff": 12})


def cmd_chi(s, out):
    rows, budgets = [], []
    for d in s["d"]:
        geom = LatticeGeometry.from_aspect(d, s["aspect"])
        w0, g = omega0(geom), gamma0_collective(d)
        for x in s["offsets"]:
            vals, sol = multiscatter.susceptibility_point(geom, w0 + x * g, s["r_cutoff"], s["max_sites"])
            c0, cx, cy = vals["0"], vals["dx"], vals["dy"]
            rows.append((d, w0 + x * g, c0.real, c0.imag, cx.real, cx.imag, cy.real, cy.imag,
                         multiscatter.gamma_d_from_chi(c0), sol.problem.r_cutoff))
            budgets.append({"d_over_lambda0": d, "offset": x, "n_sites": sol.problem.n_sites,
                            "iterations": sol.iterations, "residual": sol.residual_norm})
    write_outputs(out, "chi", ["d_over_lambda0", "delta_over_gamma0", "re_chi0", "im_chi0", "re_chi_dx",
                               "im_chi_dx", "re_chi_dy", "im_chi_dy", "gamma_d", "achieved_r_cutoff"],
                  rows, s, {"solves": budgets})


def cmd_chem_params(s, out):
    table = chemistry.load_hopping_table(s["hopping_table"] or None)
    full = dict(s, d_min_a0=min(s["d_a0"]), d_max_a0=max(s["d_a0"]), n_d=1, n_delta=512, window=4.0,
                guard=1e-3, workers=1)
    cfg = _sweep_config(full)
    source = optimize.ChemistrySource(cfg, table=table)
    ry = HYDROGEN.ry_over_gamma0
    rows = []
    for d_a0 in s["d_a0"]:
        cp = chemistry.ChemistryParams.at(d_a0, table)
        d = float(HYDROGEN.d_over_lambda(d_a0))
        g = gamma0_collective(d)
        gd = sig = np.nan
        if s["with_chi"] and cfg.chi_mode != "none":
            tab = source.chi_table(d_a0)
            gd = float(tab.gamma_d(tab.omega0)) / ry
            model = chemistry.SelfEnergyModel.for_lattice(d_a0, tab, table, HYDROGEN, cfg.hd_combine)
            sig = -2 * float(np.imag(model(tab.omega0))) / ry
        rows.append((d_a0, cp.t_s, cp.t_p, cp.u_ss, cp.u_sp, cp.j_heisenberg, cp.t_eff, g / ry, 1 / ry, gd, sig))
    budgets = _chi_budgets(source) if s["with_chi"] else {"chi_mode": "off"}
    write_outputs(out, "chem-params", ["d_over_a0", "t_s_ry", "t_p_ry", "u_ss_ry", "u_sp_ry", "j_ry", "t_eff_ry",
                                       "gamma_collective_ry", "gamma0_ry", "gamma_d_ry", "minus_2_im_sigma_qc_ry"],
                  rows, s, budgets, {"hopping_table": table.provenance})


def _record_row(r: optimize.OptimumRecord):
    row = r.row()
    return [row[k] for k in ("d_over_a0", "d_over_lambda0", "delta", "delta_tilde", "n_re", "n_im",
                             "sigma_re", "sigma_im", "gamma_prime")] + [r.error or ""]


RECORD_HEADER = ["d_over_a0", "d_over_lambda0", "delta", "delta_tilde", "n_re", "n_im", "sigma_re",
                 "sigma_im", "gamma_prime", "error"]


def cmd_figure6a(s, out):
    cfg = _sweep_config(s, gamma_primes=(s["gamma_prime"],))
    source = optimize.ChemistrySource(cfg)
    recs = optimize.max_real_index_vs_d(cfg, s["gamma_prime"], source)
    geoms = [LatticeGeometry.from_a0(r.d_over_a0, cfg.aspect) for r in recs]
    rows = [_record_row(r) + [1 / (2 * g.dz)] for r, g in zip(recs, geoms)]
    write_outputs(out, "figure6a", RECORD_HEADER + ["n_quantum_optics"], rows, s,
                  {**_chi_budgets(source), "n_delta": cfg.n_delta, "golden_tol": cfg.golden_tol},
                  {"hopping_table": source.hopping.provenance})


def cmd_figure6b(s, out):
    cfg = _sweep_config(s, gamma_primes=tuple(s["gamma_primes"]), targets=tuple(s["targets"]))
    source = optimize.ChemistrySource(cfg)
    rows = []
    for gp in s["gamma_primes"]:
        for t in s["targets"]:
            try:
                r = optimize.min_imag_index(t, gp, cfg, source)
                rows.append([gp, t] + _record_row(r))
            except ValueError as exc:
                rows.append([gp, t] + [np.nan] * 8 + [gp, str(exc)])
    write_outputs(out, "figure6b", ["gamma_prime_requested", "target_n_re"] + RECORD_HEADER, rows, s,
                  {**_chi_budgets(source), "n_delta": cfg.n_delta}, {"hopping_table": source.hopping.provenance})


def cmd_slab_check(s, out):
    n = complex(s["n_re"], s["n_im"])
    rows = []
    for k in s["k0dz"]:
        dz = k / (2 * np.pi)
        M = max(1, int(round(s["k0L"] / k)))
        geom = LatticeGeometry(dz / 2.5, dz)
        tm, rm = slab.stack_t_r(n, M, geom)
        tf, rf = slab.fresnel_t_r(n, M * dz)
        rows.append((k, M, n.real, n.imag, abs(tm - tf) / abs(tf), abs(rm - rf) / abs(rf)))
    write_outputs(out, "slab-check", ["k0dz", "M", "n_re", "n_im", "err_t", "err_r"], rows, s, {})


def cmd_validate(s, out):
    try:
        only = [int(x) for x in s["only"].split(",") if x.strip()] or None
    except ValueError as exc:
        raise ConfigError(f"only: {exc}") from exc
    if only and any(i not in validation.CHECKS for i in only):
        raise ConfigError("only: check ids are 1-17")
    results = validation.run_all(s["profile"], only)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.id:2d} {r.name}: {r.detail}")
    rows = [(r.id, r.name, bool(r.passed), r.detail) for r in results]
    write_outputs(out, "validate", ["id", "name", "passed", "detail"], rows, s,
                  {"profile": validation.PROFILES[s["profile"]].__dict__})
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


HANDLERS = {"spectrum2d": cmd_spectrum2d, "band3d": cmd_band3d, "invert-map": cmd_invert_map, "chi": cmd_chi,
            "chem-params": cmd_chem_params, "figure6a": cmd_figure6a, "figure6b": cmd_figure6b,
            "slab-check": cmd_slab_check, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ultraindex", description="Refractive index of dense atomic lattices.")
    p.add_argument("--config", help="flat TOML file of settings")
    p.add_argument("--out", help="output directory (default $ULTRAINDEX_OUT or ./ultraindex_out)")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        sp = sub.add_parser(name)
        for o in opts:
            flag = "--" + o.name.replace("_", "-")
            sp.add_argument(flag, dest=o.name, default=None, help=f"{o.help} (default {o.default})")
    return p


def _origin(exc: BaseException) -> str:
    """Innermost package module in the traceback."""
    mods = [Path(f.filename).stem for f in traceback.extract_tb(exc.__traceback__)
            if Path(f.filename).parent.name == "ultraindex"]
    return f"ultraindex.{mods[-1]}" if mods else "ultraindex"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out or os.environ.get("ULTRAINDEX_OUT") or "ultraindex_out")
    try:
        flags = {o.name: getattr(args, o.name) for o in COMMANDS[args.command]}
        settings = resolve_settings(args.command, load_config(args.config), flags)
        code = HANDLERS[args.command](settings, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError, OSError) as exc:
        print(f"compute error in {_origin(exc)}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
