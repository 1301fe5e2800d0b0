"""Sweeps over lattice constant and detuning: maximum index, minimum loss, loss scaling."""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .band3d import band_edge_detuning, refractive_index
from .chemistry import ChemistryParams, HoppingTable, SelfEnergyModel, load_hopping_table
from .greens import HYDROGEN, PhysicalConstants
from .lattice2d import LatticeGeometry, gamma0_collective, omega0
from .multiscatter import (ComplexSpectrum, SusceptibilityTable, build_susceptibility_table,
                           default_offsets)


@dataclass(frozen=True)
class SweepConfig:
    """Grids and numerical settings for the index optimisations.

    ``chi_mode`` selects how susceptibility tables are obtained: ``solve``
    runs the finite-array solver at every lattice constant, ``anchored``
    solves at ``chi_anchors`` and interpolates the scaled table chi/d^3 in
    log d, ``none`` switches the chemistry self-energy off.
    """

    d_over_a0: tuple = tuple(np.geomspace(6.0, 360.0, 48))
    aspect: float = 2.5
    n_delta: int = 512
    window: float = 4.0
    gamma_primes: tuple = (0.0,)
    targets: tuple = ()
    chi_mode: str = "anchored"
    chi_anchors: tuple = (6.0, 8.0, 11.0, 15.0, 22.0)
    chi_r_cutoff: float = 0.5
    chi_max_sites: int = 100_000
    chi_offsets: tuple | None = None
    hd_combine: str = "sum"
    hopping_table: str | None = None
    chem_tol: float = 1e-6
    guard: float = 1e-3
    evanescent: bool = True
    refine_d: bool = True
    workers: int = 1
    golden_tol: float = 1e-12

    def __post_init__(self):
        errs = []
        if len(self.d_over_a0) == 0:
            errs.append("d_over_a0 grid is empty")
        if any(d <= 0 for d in self.d_over_a0):
            errs.append("d_over_a0 must be positive")
        if self.n_delta < 16:
            errs.append("n_delta must be >= 16")
        if not 0 < self.window <= 5:
            errs.append("window must be in (0, 5] Gamma(0)")
        if any(g < 0 for g in self.gamma_primes):
            errs.append("gamma_primes must be >= 0")
        if self.chi_mode not in ("solve", "anchored", "none"):
            errs.append(f"unknown chi_mode {self.chi_mode!r}")
        if self.chi_mode == "anchored" and len(self.chi_anchors) == 0:
            errs.append("anchored chi_mode needs chi_anchors")
        if self.hd_combine not in ("sum", "mean"):
            errs.append("hd_combine must be 'sum' or 'mean'")
        if self.workers < 1:
            errs.append("workers must be >= 1")
        if errs:
            raise ValueError("; ".join(errs))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d_over_a0"] = [float(d) for d in self.d_over_a0]
        return out


@dataclass(frozen=True)
class OptimumRecord:
    d_over_a0: float
    d: float
    delta: float
    delta_tilde: float
    n_re: float
    n_im: float
    sigma_qc: complex
    gamma_prime: float
    in_bandgap: bool = False
    target_n_re: float | None = None
    error: str | None = None

    def row(self) -> dict:
        return {"d_over_a0": self.d_over_a0, "d_over_lambda0": self.d, "delta": self.delta,
                "delta_tilde": self.delta_tilde, "n_re": self.n_re, "n_im": self.n_im,
                "sigma_re": float(np.real(self.sigma_qc)), "sigma_im": float(np.imag(self.sigma_qc)),
                "gamma_prime": self.gamma_prime}


def _scaled(table: SusceptibilityTable):
    x = (table.delta - table.omega0) / table.gamma_collective
    s = table.geom_d ** -3
    return x, s * table.chi0.values, s * table.chi_dx.values, s * table.chi_dy.values


class Lattice:
    """Everything needed to evaluate the index at one lattice constant."""

    def __init__(self, d_over_a0: float, config: SweepConfig, source: "ChemistrySource"):
        self.d_over_a0 = float(d_over_a0)
        self.geom = LatticeGeometry.from_a0(self.d_over_a0, config.aspect, source.consts)
        self.config = config
        self.omega0 = omega0(self.geom)
        self.gamma = gamma0_collective(self.geom.d)
        self.model = source.self_energy(self.d_over_a0)
        self.edge = band_edge_detuning(self.geom, config.evanescent)

    def sigma(self, delta):
        return self.model(delta) if self.model is not None else np.zeros(np.shape(delta), complex)

    def index(self, delta, gamma_prime: float):
        return refractive_index(delta, self.geom, self.sigma(delta), gamma_prime, self.config.evanescent)

    def delta_grid(self):
        """Uniform coverage of the window plus geometric clustering at the lossless gap edge."""
        n = self.config.n_delta
        w = self.config.window * self.gamma
        e = self.edge - self.omega0
        span = np.geomspace(1e-4 * abs(e), w, n // 4)
        x = np.concatenate([np.linspace(-w, w, n - 2 * (n // 4)), e - span, e + span])
        x = np.unique(x[(x >= -w) & (x <= w)])
        return self.omega0 + x

    def admissible(self, delta, res):
        """Outside the gap and at least the guard band away from any sampled gap point."""
        ok = ~res.in_bandgap & np.isfinite(res.n_re)
        gap = delta[res.in_bandgap]
        if gap.size:
            guard = self.config.guard * abs(self.edge - self.omega0)
            dist = np.min(np.abs(delta[:, None] - gap[None, :]), axis=1)
            ok &= dist >= guard
        return ok

    def record(self, delta, gamma_prime, target=None) -> OptimumRecord:
        r = self.index(np.array([delta]), gamma_prime)
        return OptimumRecord(self.d_over_a0, self.geom.d, float(delta), float(delta - self.omega0),
                             float(r.n_re[0]), float(r.n_im[0]), complex(r.sigma_qc_used[0]),
                             gamma_prime, bool(r.in_bandgap[0]), target)


class ChemistrySource:
    """Hopping table plus susceptibility tables, shared by all sweep workers."""

    def __init__(self, config: SweepConfig, consts: PhysicalConstants = HYDROGEN,
                 table: HoppingTable | None = None):
        self.config = config
        self.consts = consts
        self.hopping = table if table is not None else load_hopping_table(config.hopping_table)
        self._lock = threading.Lock()
        self._tables: dict = {}
        self._anchor_cache = None

    def negligible(self, d_over_a0: float) -> bool:
        """|Sigma_QC| bound below chem_tol * Gamma(0).

        |Sigma_t| <= 8 t_eff^2 since |chi| <= 2 and Im chi >= 0; the
        holon-doublon part is estimated as P_hd * 10 Gamma(0) lambda0/d.
        """
        cp = ChemistryParams.at(d_over_a0, self.hopping)
        d = float(self.consts.d_over_lambda(d_over_a0))
        g = gamma0_collective(d)
        bound = 8 * cp.t_eff_gamma0(self.consts) ** 2 + cp.p_hd * 10 * g / d
        return bound < self.config.chem_tol * g

    def _solve_table(self, d_over_a0):
        geom = LatticeGeometry.from_a0(d_over_a0, self.config.aspect, self.consts)
        offs = None if self.config.chi_offsets is None else np.asarray(self.config.chi_offsets)
        return build_susceptibility_table(geom, offs, self.config.chi_r_cutoff, self.config.chi_max_sites)

    def _anchors(self):
        if self._anchor_cache is None:
            tabs = [self._solve_table(a) for a in sorted(self.config.chi_anchors)]
            logd = np.log([t.geom_d for t in tabs])
            scaled = [_scaled(t) for t in tabs]
            self._anchor_cache = (logd, scaled, tabs)
        return self._anchor_cache

    def chi_table(self, d_over_a0: float) -> SusceptibilityTable:
        key = round(float(d_over_a0), 12)
        with self._lock:
            if key in self._tables:
                return self._tables[key]
            if self.config.chi_mode == "solve":
                tab = self._solve_table(d_over_a0)
            else:
                tab = self._interpolated(d_over_a0)
            self._tables[key] = tab
            return tab

    def _interpolated(self, d_over_a0):
        logd, scaled, tabs = self._anchors()
        d = float(self.consts.d_over_lambda(d_over_a0))
        x = scaled[0][0]
        ld = np.clip(np.log(d), logd[0], logd[-1])
        i = int(np.clip(np.searchsorted(logd, ld) - 1, 0, max(len(logd) - 2, 0)))
        if len(logd) == 1:
            w, j = 0.0, 0
        else:
            j = i + 1
            w = (ld - logd[i]) / (logd[j] - logd[i])
        vals = [(1 - w) * scaled[i][k] + w * scaled[j][k] for k in (1, 2, 3)]
        geom = LatticeGeometry.from_a0(d_over_a0, self.config.aspect, self.consts)
        w0, g = omega0(geom), gamma0_collective(geom.d)
        delta = w0 + x * g
        spectra = [ComplexSpectrum(delta, v * d**3) for v in vals]
        near = tabs[i] if w < 0.5 else tabs[j]
        return SusceptibilityTable(d, w0, g, *spectra, near.achieved_r_cutoff, near.n_sites)

    def self_energy(self, d_over_a0: float) -> SelfEnergyModel | None:
        if self.config.chi_mode == "none" or self.negligible(d_over_a0):
            return None
        return SelfEnergyModel.for_lattice(d_over_a0, self.chi_table(d_over_a0), self.hopping,
                                           self.consts, self.config.hd_combine)


def _golden_max(f, a, b, tol):
    res = minimize_scalar(lambda x: -f(x), bounds=(a, b), method="bounded",
                          options={"xatol": tol, "maxiter": 200})
    return res.x


def _best_delta(lat: Lattice, gamma_prime: float) -> OptimumRecord:
    delta = lat.delta_grid()
    res = lat.index(delta, gamma_prime)
    ok = lat.admissible(delta, res)
    if not ok.any():
        return OptimumRecord(lat.d_over_a0, lat.geom.d, np.nan, np.nan, np.nan, np.nan, 0j,
                             gamma_prime, error="no admissible detuning")
    nre = np.where(ok, res.n_re, -np.inf)
    k = int(np.argmax(nre))
    best = lat.record(delta[k], gamma_prime)
    lo = delta[k - 1] if k > 0 and ok[k - 1] else delta[k]
    hi = delta[k + 1] if k + 1 < delta.size and ok[k + 1] else delta[k]
    if hi > lo:
        x = _golden_max(lambda t: float(lat.index(np.array([t]), gamma_prime).n_re[0]), lo, hi,
                        lat.config.golden_tol * max(abs(hi - lo), 1.0))
        cand = lat.record(x, gamma_prime)
        if not cand.in_bandgap and cand.n_re > best.n_re:
            best = cand
    return best


def _map(fn, items, workers):
    if workers == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def max_real_index_vs_d(config: SweepConfig, gamma_prime: float | None = None,
                        source: ChemistrySource | None = None) -> list:
    """Per lattice constant, the admissible detuning that maximises Re n."""
    source = source or ChemistrySource(config)
    gp = config.gamma_primes[0] if gamma_prime is None else gamma_prime
    return _map(lambda d: _best_delta(Lattice(d, config, source), gp), list(config.d_over_a0),
                config.workers)


def _crossings(lat: Lattice, target: float, gamma_prime: float):
    delta = lat.delta_grid()
    res = lat.index(delta, gamma_prime)
    ok = lat.admissible(delta, res)
    f = res.n_re - target
    out = []
    for i in range(delta.size - 1):
        if ok[i] and ok[i + 1] and np.sign(f[i]) != np.sign(f[i + 1]):
            g = lambda t: float(lat.index(np.array([t]), gamma_prime).n_re[0]) - target
            x = brentq(g, delta[i], delta[i + 1], xtol=1e-14 * max(abs(delta[i]), 1.0), rtol=1e-15)
            rec = lat.record(x, gamma_prime, target)
            if not rec.in_bandgap:
                out.append(rec)
    return out, float(np.max(np.where(ok, res.n_re, -np.inf))) if ok.any() else -np.inf


def _min_at_d(d_over_a0, target, gamma_prime, config, source):
    lat = Lattice(d_over_a0, config, source)
    recs, best = _crossings(lat, target, gamma_prime)
    if not recs:
        return None, best
    return min(recs, key=lambda r: r.n_im), best


def min_imag_index(target_n_re: float, gamma_prime: float, config: SweepConfig,
                   source: ChemistrySource | None = None) -> OptimumRecord:
    """Smallest Im n with Re n = target over the (d, delta) grid, refined in d."""
    source = source or ChemistrySource(config)
    ds = list(config.d_over_a0)
    found = _map(lambda d: _min_at_d(d, target_n_re, gamma_prime, config, source), ds, config.workers)
    recs = [(i, r) for i, (r, _) in enumerate(found) if r is not None]
    if not recs:
        best = max(b for _, b in found)
        raise ValueError(f"target Re n = {target_n_re} unreachable; max achievable {best:.6g}")
    i, best = min(recs, key=lambda ir: ir[1].n_im)
    refine = config.refine_d and config.chi_mode != "solve" and 0 < i < len(ds) - 1
    if refine:
        cache = {}

        def obj(logd):
            r, _ = _min_at_d(float(np.exp(logd)), target_n_re, gamma_prime, config, source)
            cache[logd] = r
            return 1e300 if r is None else r.n_im
        res = minimize_scalar(obj, bounds=(np.log(ds[i - 1]), np.log(ds[i + 1])), method="bounded",
                              options={"xatol": 1e-4, "maxiter": 30})
        cand = cache.get(res.x)
        if cand is not None and cand.n_im < best.n_im:
            best = cand
    return best


def asymptotic_loss(n_re, gamma_prime: float, d_qc: float, aspect: float = 2.5):
    """Asymptotic minimum Im n at lattice constant d_qc (lambda0 units)."""
    n = np.asarray(n_re, float)
    k0d = 2 * np.pi * d_qc
    return gamma_prime * aspect * k0d**3 / (12 * np.pi) * (1 / n - 2 * n + n**3)


@dataclass(frozen=True)
class LossScalingReport:
    gamma_prime: float
    d_qc_over_a0: float
    targets: np.ndarray
    n_im: np.ndarray
    n_im_formula: np.ndarray
    max_rel_deviation: float
    loglog_slope: float
    records: list = field(default_factory=list)


def measured_d_qc(records) -> float:
    """Median optimal lattice constant over a family of min-loss records (units of a0)."""
    return float(np.median([r.d_over_a0 for r in records]))


def loss_scaling_check(gamma_prime: float, config: SweepConfig, targets=None,
                       d_qc_over_a0: float | None = None,
                       source: ChemistrySource | None = None) -> LossScalingReport:
    """Compare optimised min Im n with the asymptotic cubic-law formula."""
    source = source or ChemistrySource(config)
    targets = np.asarray(config.targets if targets is None else targets, float)
    recs = [min_imag_index(t, gamma_prime, config, source) for t in targets]
    nim = np.array([r.n_im for r in recs])
    dqc = measured_d_qc(recs) if d_qc_over_a0 is None else d_qc_over_a0
    formula = asymptotic_loss(targets, gamma_prime, float(source.consts.d_over_lambda(dqc)), config.aspect)
    dev = float(np.max(np.abs(nim - formula) / formula))
    slope = float(np.polyfit(np.log(targets), np.log(nim), 1)[0]) if targets.size > 1 else np.nan
    return LossScalingReport(gamma_prime, dqc, targets, nim, formula, dev, slope, recs)
