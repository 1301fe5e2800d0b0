"""Acceptance checks for the whole pipeline.

Each check returns a :class:`CheckResult`. Profiles change numerical budgets
(grid sizes, site counts, sweep grids), never the pass tolerances.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import band3d, chemistry, lattice2d, multiscatter, optimize, slab
from .greens import HYDROGEN
from .lattice2d import LatticeGeometry, gamma0_collective, omega0


@dataclass(frozen=True)
class CheckResult:
    id: int
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class Budget:
    name: str
    roundtrip_samples: int = 1000
    map_size: int = 50
    map_scan: int = 1001
    chi_max_sites: int = 100_000
    solver_cases: int = 20
    sweep_d: tuple = tuple(np.geomspace(6.0, 360.0, 48))
    sweep_n_delta: int = 512
    chi_anchors: tuple = (6.0, 8.0, 11.0, 15.0, 22.0)
    sweep_max_sites: int = 100_000
    loss_d: tuple = tuple(np.geomspace(6.0, 360.0, 48))
    loss_targets: tuple = (10.0, 14.0, 18.0, 22.0, 26.0, 30.0)

    def sweep_config(self, d_grid=None, **kw) -> optimize.SweepConfig:
        return optimize.SweepConfig(d_over_a0=tuple(self.sweep_d if d_grid is None else d_grid),
                                    n_delta=self.sweep_n_delta, chi_anchors=self.chi_anchors,
                                    chi_max_sites=self.sweep_max_sites, **kw)


PROFILES = {
    "full": Budget("full"),
    "smoke": Budget("smoke", sweep_d=tuple(np.geomspace(6.0, 40.0, 12)), sweep_n_delta=256,
                    chi_anchors=(6.0, 8.0, 11.0, 15.0), sweep_max_sites=20_000,
                    loss_d=tuple(np.geomspace(8.0, 40.0, 12))),
}

# geometries named in the invertibility discussion: (d/lambda0, dz/d, invertible)
NAMED_GEOMETRIES = ((1 / 10, 1.0, True), (1 / 60, 1.6, True), (1 / 60, 1.0, False))


def _fmt(x) -> str:
    return "%.6g" % x


def check_lossless_layer(b: Budget) -> CheckResult:
    worst = 0.0
    exact = True
    for d in (1 / 200, 1 / 50, 1 / 10, 0.3):
        geom = LatticeGeometry.from_aspect(d)
        g = gamma0_collective(d)
        delta = omega0(geom) + np.linspace(-50, 50, 1000) * g
        r, t = lattice2d.layer_r_t(delta, geom)
        worst = max(worst, float(np.max(np.abs(np.abs(r) ** 2 + np.abs(t) ** 2 - 1))))
        r0, _ = lattice2d.layer_r_t(omega0(geom), geom)
        exact &= complex(r0) == -1
    return CheckResult(1, "lossless layer", worst <= 1e-12 and exact,
                       f"max||r|^2+|t|^2-1|={_fmt(worst)} r(omega0)=-1 exact:{exact}")


def check_collective_linewidth(b: Budget) -> CheckResult:
    d = np.geomspace(1 / 500, 0.45, 40)
    formula = 3 / (4 * np.pi * d * d)
    direct = np.array([lattice2d.collective_gamma(0.0, 0.0, LatticeGeometry(x, x)) for x in d])
    err = float(np.max(np.abs(direct - formula) / formula))
    # independent route through the imaginary part of the lattice sum
    small = d[d <= 1 / 50]
    lsum = np.array([1 + 2 * lattice2d.lattice_sum_spectral(0, 0, LatticeGeometry(x, x)).imag for x in small])
    err_sum = float(np.max(np.abs(lsum / (3 / (4 * np.pi * small**2)) - 1)))
    return CheckResult(2, "collective linewidth", err <= 4 * np.finfo(float).eps,
                       f"rel err={_fmt(err)} lattice-sum route={_fmt(err_sum)}")


def check_band_edge_index(b: Budget) -> CheckResult:
    worst_edge, worst_im = 0.0, 0.0
    for d in (1 / 360, 1 / 100, 1 / 30, 1 / 10):
        geom = LatticeGeometry.from_aspect(d, 2.5)
        edge = band3d.band_edge_detuning(geom)
        n = band3d.refractive_index(np.array([edge]), geom)
        worst_edge = max(worst_edge, abs(n.n_re[0] - 1 / (2 * geom.dz)), abs(n.n_im[0]))
        g = gamma0_collective(d)
        delta = omega0(geom) + np.linspace(-20, 20, 2001) * g
        res = band3d.refractive_index(delta, geom)
        out = ~res.in_bandgap
        worst_im = max(worst_im, float(np.max(np.abs(res.n_im[out]))))
    return CheckResult(3, "band-edge index", worst_edge <= 1e-9 and worst_im < 1e-12,
                       f"|n_edge-lambda0/2dz|={_fmt(worst_edge)} max Im n outside gap={_fmt(worst_im)}")


def check_round_trip(b: Budget) -> CheckResult:
    rng = np.random.default_rng(20240)
    worst = 0.0
    for d, aspect in ((1 / 100, 2.5), (1 / 10, 1.0), (1 / 60, 1.6), (1 / 360, 2.5)):
        geom = LatticeGeometry.from_aspect(d, aspect)
        kz = rng.uniform(0, np.pi / geom.dz, b.roundtrip_samples)
        kz = kz[np.abs(kz - 2 * np.pi) > 1e-6]
        n = band3d.index_from_kz(kz, geom)
        worst = max(worst, float(np.max(np.abs(n.n - kz / (2 * np.pi)) / (kz / (2 * np.pi)))))
    return CheckResult(4, "band round trip", worst <= 1e-9, f"max rel err={_fmt(worst)}")


def check_invertibility_map(b: Budget) -> CheckResult:
    named_ok = all(band3d.invertibility(LatticeGeometry.from_aspect(d, a)).is_invertible == inv
                   for d, a, inv in NAMED_GEOMETRIES)
    aspects = np.linspace(1.0, 3.0, b.map_size)
    # dz stays below lambda0/5, inside the dz << lambda0 regime of the analytic bound
    ds = np.geomspace(1 / 500, 1 / 15, b.map_size)
    worst = 0
    for a in aspects:
        reps = [band3d.invertibility(LatticeGeometry.from_aspect(d, a), n_scan=b.map_scan) for d in ds]
        num = np.array([r.is_invertible for r in reps])
        ana = np.array([r.analytic_invertible for r in reps])
        # boundary index: first invertible d; both maps must be monotone in d
        i_num = int(np.argmax(num)) if num.any() else len(ds)
        i_ana = int(np.argmax(ana)) if ana.any() else len(ds)
        monotone = bool(np.all(num[i_num:]))
        worst = max(worst, abs(i_num - i_ana) if monotone else len(ds))
    return CheckResult(5, "invertibility map", named_ok and worst <= 1,
                       f"named cases ok:{named_ok} max boundary offset={worst} cells")


def check_evanescent_ratio(b: Budget) -> CheckResult:
    # dz = 2.5 d stays well below lambda0/2
    ds = np.geomspace(1 / 360, 1 / 10, 40)
    ratios = [band3d.evanescent_ratio_max(LatticeGeometry.from_aspect(d, 2.5)) for d in ds]
    worst = float(max(ratios))
    return CheckResult(6, "evanescent negligibility", worst < 1e-2, f"max|J_ev/J_1D|={_fmt(worst)}")


SCALING_D = (1 / 200, 1 / 141, 1 / 100, 1 / 71, 1 / 50)


def _scaling_points(b: Budget):
    out = []
    for d in SCALING_D:
        geom = LatticeGeometry.from_aspect(d, 2.5)
        vals, sol = multiscatter.susceptibility_point(geom, omega0(geom), 0.5, b.chi_max_sites)
        out.append((d, vals["0"], sol.problem.n_sites))
    return out


_SCALING_CACHE: dict = {}


def scaling_points(b: Budget):
    if b.chi_max_sites not in _SCALING_CACHE:
        _SCALING_CACHE[b.chi_max_sites] = _scaling_points(b)
    return _SCALING_CACHE[b.chi_max_sites]


def check_susceptibility_scaling(b: Budget) -> CheckResult:
    pts = scaling_points(b)
    d = np.array([p[0] for p in pts])
    chi = np.array([p[1] for p in pts])
    slope = float(np.polyfit(np.log(d), np.log(chi.imag), 1)[0])
    k = int(np.argmin(np.abs(d - 1 / 100)))
    c_im, c_re = chi[k].imag / d[k] ** 3, chi[k].real / d[k] ** 3
    ok = abs(slope - 3) <= 0.15 and abs(c_im / 187 - 1) <= 0.2 and abs(c_re / 24 - 1) <= 0.3
    n_max = max(p[2] for p in pts)
    return CheckResult(7, "susceptibility scaling", ok,
                       f"slope={_fmt(slope)} Im coef={_fmt(c_im)} Re coef={_fmt(c_re)} N<={n_max}")


def check_solver_oracle(b: Budget) -> CheckResult:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(b.solver_cases):
        d = float(np.exp(rng.uniform(np.log(1 / 200), np.log(1 / 5))))
        h = int(rng.integers(3, 10))
        geom = LatticeGeometry.from_aspect(d, 2.5)
        delta = omega0(geom) + rng.uniform(-3, 3) * gamma0_collective(d)
        prob = multiscatter.FiniteArrayProblem(geom, h, delta, enforce_min_cutoff=False)
        a = multiscatter.solve_steady_state(prob, method="dense").amplitudes
        it = multiscatter.solve_steady_state(prob, tol=1e-13).amplitudes
        worst = max(worst, float(np.linalg.norm(it - a) / np.linalg.norm(a)))
    return CheckResult(8, "solver oracle", worst <= 1e-9, f"max rel diff={_fmt(worst)} over {b.solver_cases} cases")


def check_hole_cross_section(b: Budget) -> CheckResult:
    pts = scaling_points(b)
    d = np.array([p[0] for p in pts])
    nh = np.array([multiscatter.gamma_d_from_chi(p[1]) / gamma0_collective(p[0]) for p in pts])
    slope = float(np.polyfit(np.log(d), np.log(nh), 1)[0])
    return CheckResult(9, "hole cross section", abs(slope + 1) <= 0.15, f"slope={_fmt(slope)}")


def check_chemistry_constants(b: Budget) -> CheckResult:
    const = float(chemistry.p_hd(1.0, u_ss=1.0))
    ok = chemistry.U_SS == 1.25 and chemistry.U_SP == 118 / 243 and abs(const - 2.58) <= 0.01
    return CheckResult(10, "chemistry constants", ok,
                       f"U_ss={chemistry.U_SS} U_sp={_fmt(chemistry.U_SP)} P_hd const={_fmt(const)}")


def check_golden_rule(b: Budget) -> CheckResult:
    val = chemistry.bethe_golden_rule(1.0)
    return CheckResult(11, "Bethe golden rule", abs(val - 8) <= 1e-4, f"rate/t_eff={val:.10f}")


def check_sigma_t_limits(b: Budget) -> CheckResult:
    chi = (24 + 187j) * 1e-6
    worst = 0.0
    for scale in (1e-4, 1e-3):
        t = scale / abs(chi)
        s = chemistry.sigma_t(t, chi)
        worst = max(worst, abs(s / (-4 * t * t * chi) - 1))
    for scale in (1e3, 1e4):
        t = scale / abs(chi)
        s = chemistry.sigma_t(t, chi)
        worst = max(worst, abs(s / (-4j * t) - 1))
    return CheckResult(12, "Sigma_t limits", worst <= 5e-3, f"max rel dev={_fmt(worst)}")


def check_fresnel(b: Budget) -> CheckResult:
    n = 5 + 0.1j
    k0dz = np.array([0.04, 0.02, 0.01, 0.005])
    L = 200 * 0.02 / (2 * np.pi)
    errs = []
    for k in k0dz:
        dz = k / (2 * np.pi)
        M = int(round(L / dz))
        errs.append(slab.fresnel_agreement(n, M, LatticeGeometry(dz / 2.5, dz)))
    errs = np.array(errs)
    slope = float(np.polyfit(np.log(k0dz), np.log(errs), 1)[0])
    e02 = float(errs[1])
    return CheckResult(13, "transfer matrix vs Fresnel", e02 < 0.05 and abs(slope - 1) <= 0.1,
                       f"err(k0dz=0.02)={_fmt(e02)} slope={_fmt(slope)}")


def check_drude_lorentz(b: Budget) -> CheckResult:
    f = slab.oscillator_strength()
    geom = LatticeGeometry.from_aspect(0.01, 2.5)
    g = gamma0_collective(geom.d)
    sigma = -2j * g
    delta = omega0(geom) + np.linspace(-10, 10, 201) * g
    n21 = band3d.refractive_index(delta, geom, sigma).n
    params = slab.drude_lorentz_map(geom, sigma)
    w_bare = 2 * np.pi * slab.C_LIGHT / HYDROGEN.lambda0 / HYDROGEN.gamma0
    ndl = slab.drude_lorentz_index(delta, params, w_bare)
    dev = float(np.max(np.abs(n21 - ndl) / np.abs(ndl)))
    return CheckResult(14, "Drude-Lorentz", abs(f - 0.21) <= 0.01 and dev < 0.1,
                       f"f_res={_fmt(f)} max|n-n_DL|/|n_DL|={_fmt(dev)}")


def check_headline(b: Budget) -> CheckResult:
    cfg = b.sweep_config()
    recs = [r for r in optimize.max_real_index_vs_d(cfg) if r.error is None]
    best = max(recs, key=lambda r: r.n_re)
    ok = abs(best.n_re / 30 - 1) <= 0.3 and abs(best.d_over_a0 - 15) <= 5 and best.n_im < 2
    return CheckResult(15, "headline curve", ok,
                       f"max Re n={_fmt(best.n_re)} at d={_fmt(best.d_over_a0)}a0 Im n={_fmt(best.n_im)}")


def check_loss_scaling(b: Budget) -> CheckResult:
    cfg = replace(b.sweep_config(b.loss_d), refine_d=True)
    src = optimize.ChemistrySource(cfg)
    t = np.array(b.loss_targets)

    def mins(gp):
        out = []
        for x in t:
            try:
                out.append(optimize.min_imag_index(float(x), gp, cfg, src).n_im)
            except ValueError:
                out.append(np.nan)
        return np.array(out)
    n10, n20 = mins(10.0), mins(20.0)
    ok10 = np.isfinite(n10)
    slope = float(np.polyfit(np.log(t[ok10]), np.log(n10[ok10]), 1)[0]) if ok10.sum() > 1 else np.nan
    both = ok10 & np.isfinite(n20)
    lin = float(np.max(np.abs(n20[both] / (2 * n10[both]) - 1))) if both.any() else np.nan
    ok = bool(ok10.all() and abs(slope - 3) <= 0.2 and lin <= 0.05)
    return CheckResult(16, "loss scaling", ok,
                       f"slope={_fmt(slope)} reachable={int(ok10.sum())}/{t.size} "
                       f"linearity dev={_fmt(lin)} over {int(both.sum())} targets")


DETERMINISM_IDS = (1, 2, 3, 10, 11, 12, 13, 14)


def check_determinism(b: Budget) -> CheckResult:
    from . import cli
    outs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(2):
            out = Path(tmp) / f"run{k}"
            argv = ["--out", str(out), "validate", "--profile", b.name,
                    "--only", ",".join(map(str, DETERMINISM_IDS))]
            cli.main(argv)
            cli.main(["--out", str(out), "spectrum2d"])
            cli.main(["--out", str(out), "band3d"])
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = outs[0] == outs[1] and len(outs[0]) > 0
    return CheckResult(17, "determinism", same, f"{len(outs[0])} files byte-identical:{same}")


CHECKS = {
    1: check_lossless_layer, 2: check_collective_linewidth, 3: check_band_edge_index,
    4: check_round_trip, 5: check_invertibility_map, 6: check_evanescent_ratio,
    7: check_susceptibility_scaling, 8: check_solver_oracle, 9: check_hole_cross_section,
    10: check_chemistry_constants, 11: check_golden_rule, 12: check_sigma_t_limits,
    13: check_fresnel, 14: check_drude_lorentz, 15: check_headline, 16: check_loss_scaling,
    17: check_determinism,
}


def run_check(cid: int, profile: str = "full") -> CheckResult:
    b = PROFILES[profile]
    try:
        return CHECKS[cid](b)
    except Exception as exc:  # a crashing check is a failed check
        return CheckResult(cid, CHECKS[cid].__name__.removeprefix("check_"), False,
                           f"error: {type(exc).__name__}: {exc}")


def run_all(profile: str = "full", only=None) -> list:
    ids = sorted(CHECKS) if only is None else sorted(only)
    return [run_check(i, profile) for i in ids]
