"""Hubbard-type parameters of a hydrogen lattice and the chemistry self-energy.

Energies are in Rydberg (|epsilon_s|) unless a name says otherwise; the
optical self-energies are in units of Gamma0 like the rest of the optics code.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from . import h2plus
from .greens import HYDROGEN, PhysicalConstants
from .multiscatter import SusceptibilityTable, holon_doublon_self_energy

U_SS = 5.0 / 4.0
U_SP = 118.0 / 243.0
S0_SQ = 0.803

# correction to the leading p-pair splitting, fitted to exact energies on R in [36, 66]
_P_CORR = (-4.07301937, -53.77610043, -611.87935608)
_P_NUMERIC_MAX = 66.0
_S_NUMERIC_MAX = 22.0


@dataclass(frozen=True)
class HoppingTable:
    d_over_a0: np.ndarray
    t_s: np.ndarray
    t_p: np.ndarray
    provenance: str

    def __post_init__(self):
        d, ts, tp = (np.asarray(a, float) for a in (self.d_over_a0, self.t_s, self.t_p))
        if not (d.shape == ts.shape == tp.shape) or d.size < 2:
            raise ValueError("hopping table columns must have equal length >= 2")
        if np.any(np.diff(d) <= 0):
            raise ValueError("d_over_a0 must be strictly increasing")
        if np.any(ts <= 0) or np.any(tp <= 0):
            raise ValueError("hopping rates must be positive")
        if np.any(np.diff(ts) >= 0) or np.any(np.diff(tp) >= 0):
            raise ValueError("hopping rates must decrease with d")
        if d[0] > 6 or d[-1] < 60:
            raise ValueError("hopping table must cover d/a0 in [6, 60]")
        object.__setattr__(self, "_ls", PchipInterpolator(d, np.log(ts)))
        object.__setattr__(self, "_lp", PchipInterpolator(d, np.log(tp)))

    def __call__(self, d_over_a0):
        d = np.asarray(d_over_a0, float)
        if np.any(d < self.d_over_a0[0]) or np.any(d > self.d_over_a0[-1]):
            raise ValueError(f"d/a0 outside table domain [{self.d_over_a0[0]}, {self.d_over_a0[-1]}]")
        return np.exp(self._ls(d)), np.exp(self._lp(d))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("d_over_a0,t_s_ry,t_p_ry\n")
        for row in zip(self.d_over_a0, self.t_s, self.t_p):
            buf.write("%.12e,%.12e,%.12e\n" % row)
        return buf.getvalue()


def _read_csv(text: str, provenance: str) -> HoppingTable:
    rows = list(csv.DictReader(io.StringIO(text)))
    need = {"d_over_a0", "t_s_ry", "t_p_ry"}
    if not rows or not need <= set(rows[0]):
        raise ValueError(f"hopping CSV needs header {','.join(sorted(need))}")
    col = lambda k: np.array([float(r[k]) for r in rows])
    return HoppingTable(col("d_over_a0"), col("t_s_ry"), col("t_p_ry"), provenance)


def load_hopping_table(path=None) -> HoppingTable:
    """Shipped H2+ table, or a user CSV with header d_over_a0,t_s_ry,t_p_ry."""
    if path is None:
        text = resources.files("ultraindex").joinpath("data/hopping_h2plus.csv").read_text()
        return _read_csv(text, "h2plus")
    return _read_csv(Path(path).read_text(), str(path))


def s_hopping_asymptotic(d_over_a0):
    """t_s in Ry from the large-separation 1s splitting (2 t_s = splitting)."""
    return h2plus.s_splitting_asymptotic(d_over_a0)


def p_hopping_asymptotic(d_over_a0, corrected: bool = True):
    """t_p in Ry from the leading p-pair splitting.

    ``corrected`` multiplies by a 1/R series fitted to exact energies; it is
    meant for R > 36 and turns negative below R ~ 12.
    """
    R = np.asarray(d_over_a0, float)
    lead = h2plus.p_splitting_leading(R)
    if not corrected:
        return lead
    return lead * (1 + sum(c * R ** -(k + 1) for k, c in enumerate(_P_CORR)))


def asymptotic_hopping_table(d_over_a0=None) -> HoppingTable:
    """Leading large-separation forms only; approximate below d ~ 20 a0."""
    d = np.geomspace(6, 400, 200) if d_over_a0 is None else np.asarray(d_over_a0, float)
    return HoppingTable(d, s_hopping_asymptotic(d), p_hopping_asymptotic(d, corrected=False), "asymptotic")


def h2plus_hopping_table(d_over_a0=None) -> HoppingTable:
    """Hopping table from exact H2+ energies, continued by asymptotics where the
    splitting drops below double-precision resolution."""
    if d_over_a0 is None:
        d_over_a0 = np.unique(np.concatenate([np.arange(6.0, 30.0, 0.5), np.arange(30.0, 80.0, 2.0),
                                              np.geomspace(80.0, 400.0, 25)]))
    d = np.asarray(d_over_a0, float)
    ts, tp = [], []
    for R in d:
        if R <= _S_NUMERIC_MAX:
            eg, eu = h2plus.ground_pair(R)
            ts.append(eu - eg)  # Hartree splitting = 2 t_s in Hartree = t_s in Ry
        else:
            ts.append(float(s_hopping_asymptotic(R)))
        if R <= _P_NUMERIC_MAX:
            eg, eu = h2plus.excited_sigma_pair(R)
            tp.append(eu - eg)
        else:
            tp.append(float(p_hopping_asymptotic(R)))
    return HoppingTable(d, np.array(ts), np.array(tp), "h2plus")


def hopping_rates(d_over_a0, table: HoppingTable | None = None):
    """(t_s, t_p) in Ry by monotone cubic interpolation of log t."""
    table = load_hopping_table() if table is None else table
    return table(d_over_a0)


def bz_gamma_sq_mean(n: int = 64) -> float:
    """<gamma_k^2> over an n x n midpoint grid of the first Brillouin zone."""
    if n < 2:
        raise ValueError("grid too small")
    k = -np.pi + (np.arange(n) + 0.5) * 2 * np.pi / n
    g = 0.5 * (np.cos(k)[:, None] + np.cos(k)[None, :])
    return float(np.mean(g * g))


def p_hd(t_s, u_ss: float = U_SS, bz_grid: int = 64, s0_sq: float = S0_SQ):
    """Holon-doublon pair probability (t_s/U_ss)^2 <(4 s0^2 gamma_k)^2>."""
    if bz_grid < 64:
        raise ValueError("bz_grid must be at least 64")
    return (np.asarray(t_s) / u_ss) ** 2 * (4 * s0_sq) ** 2 * bz_gamma_sq_mean(bz_grid)


@dataclass(frozen=True)
class ChemistryParams:
    """Microscopic parameters at one lattice constant, energies in Ry."""

    d_over_a0: float
    t_s: float
    t_p: float
    u_ss: float = U_SS
    u_sp: float = U_SP
    s0_sq: float = S0_SQ

    @classmethod
    def at(cls, d_over_a0: float, table: HoppingTable | None = None, **kw) -> "ChemistryParams":
        ts, tp = hopping_rates(d_over_a0, table)
        return cls(float(d_over_a0), float(ts), float(tp), **kw)

    @property
    def j_heisenberg(self) -> float:
        return 4 * self.t_s**2 / self.u_ss

    @property
    def t_eff(self) -> float:
        return 2 * self.t_s * self.t_p / self.u_sp

    @property
    def p_hd(self) -> float:
        return float(p_hd(self.t_s, self.u_ss, s0_sq=self.s0_sq))

    def t_eff_gamma0(self, consts: PhysicalConstants = HYDROGEN) -> float:
        return self.t_eff * consts.ry_over_gamma0


def bethe_dos(E, t_eff: float):
    """Local density of states at the root of the Bethe lattice (coordination 4)."""
    x = np.asarray(E, float) / t_eff
    inside = x * x <= 12.0
    xi = np.where(inside, x, 0.0)
    out = np.where(inside, 2 / (np.pi * t_eff) * np.sqrt(np.clip(12.0 - xi * xi, 0, None)) / (16.0 - xi * xi), 0.0)
    return float(out) if out.ndim == 0 else out


def _bethe_angles(E, t_eff):
    theta = np.arccos(np.clip(-np.asarray(E) / (2 * np.sqrt(3) * t_eff), -1, 1))
    gamma = np.arctan2(2 * np.sin(theta), np.cos(theta))
    return theta, gamma


def bethe_coupling_sq(E, t_eff: float):
    """|<psi(E)|H|0>|^2 for angle-normalised eigenstates."""
    theta, gamma = _bethe_angles(E, t_eff)
    return 8 * t_eff**2 / np.pi * np.sin(theta + gamma) ** 2


def bethe_golden_rule(t_eff: float, quad_tol: float = 1e-12) -> float:
    """Decay rate out of the root site, 2 pi int rho |M|^2 dE / t_eff."""
    edge = 2 * np.sqrt(3) * t_eff
    val, _ = quad(lambda E: bethe_dos(E, t_eff) * bethe_coupling_sq(E, t_eff), -edge, edge,
                  epsabs=quad_tol * t_eff, epsrel=quad_tol, limit=200)
    return 2 * np.pi * val / t_eff


def bethe_u_integral(quad_tol: float = 1e-12) -> float:
    """(864/pi) int_0^1 sqrt(u^3 (1-u)) / (1+3u)^2 du."""
    val, _ = quad(lambda u: np.sqrt(u**3 * (1 - u)) / (1 + 3 * u) ** 2, 0, 1,
                  epsabs=quad_tol, epsrel=quad_tol)
    return 864 / np.pi * val


def sigma_t(t_eff, chi0):
    """Interpolated hopping self-energy 4 t^2 chi / (i t chi - 1); Gamma0 units."""
    w = np.asarray(t_eff) * np.asarray(chi0)
    den = 1j * w - 1
    if np.any(den == 0):
        raise ZeroDivisionError("i t chi = 1")
    return 4 * np.asarray(t_eff) ** 2 * np.asarray(chi0) / den


@dataclass(frozen=True)
class SelfEnergyModel:
    """Sigma_QC(delta) at one lattice constant.

    ``t_eff`` is in Gamma0 units, ``p_hd`` a probability and ``chi`` the
    susceptibility table of the same lattice (None means chemistry off).
    """

    t_eff: float
    p_hd: float
    chi: SusceptibilityTable | None
    hd_combine: str = "sum"

    @classmethod
    def for_lattice(cls, d_over_a0: float, chi: SusceptibilityTable | None,
                    table: HoppingTable | None = None, consts: PhysicalConstants = HYDROGEN,
                    hd_combine: str = "sum") -> "SelfEnergyModel":
        cp = ChemistryParams.at(d_over_a0, table)
        return cls(cp.t_eff_gamma0(consts), cp.p_hd, chi, hd_combine)

    def sigma_t(self, delta):
        if self.chi is None or self.t_eff == 0:
            return np.zeros(np.shape(delta), complex)
        return sigma_t(self.t_eff, self.chi.chi0(delta))

    def sigma_hd(self, delta):
        if self.chi is None:
            return np.zeros(np.shape(delta), complex)
        return holon_doublon_self_energy(self.chi.chi0(delta), self.chi.chi_dx(delta),
                                         self.chi.chi_dy(delta), self.hd_combine)

    def sigma_qc(self, delta):
        if self.p_hd == 0:
            return self.sigma_t(delta)
        return self.sigma_t(delta) + self.p_hd * self.sigma_hd(delta)

    def __call__(self, delta):
        return self.sigma_qc(delta)


def sigma_qc(delta, t_eff, p_hd_value, chi0, chi_dx, chi_dy, hd_combine: str = "sum"):
    """Sigma_t + P_hd * Sigma_hd from explicit susceptibility values."""
    return sigma_t(t_eff, chi0) + p_hd_value * holon_doublon_self_energy(chi0, chi_dx, chi_dy, hd_combine)
