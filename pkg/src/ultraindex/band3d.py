"""Optical band of stacked square arrays at normal incidence and the complex index.

Everything is expressed through c = cos(kz dz). With s0 = sin(k0 dz) and
c0 = cos(k0 dz) the band reads

    J = omega(0) + Gamma(0)/2 * [s0 / (c - c0) + E(c)]

where E(c) is the evanescent interlayer coupling. Inverting for c at a
complex detuning gives the index n = arccos(c) / (k0 dz).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice2d import LatticeGeometry, gamma0_collective, omega0


class NonInvertibleBand(ValueError):
    pass


@dataclass(frozen=True)
class _EvanescentTerms:
    f: np.ndarray      # ((g_x/k0)^2 - 1) / sqrt(|g/k0|^2 - 1)
    one_m_tanh: np.ndarray
    tanh: np.ndarray
    sech: np.ndarray

    def value(self, c):
        c = np.asarray(c)[..., None]
        den = 1 - c * self.sech
        return -np.sum(self.f * (self.one_m_tanh - c * self.sech) / den, axis=-1)

    def derivative(self, c):
        c = np.asarray(c)[..., None]
        den = 1 - c * self.sech
        return np.sum(self.f * self.tanh * self.sech / den**2, axis=-1)


@lru_cache(maxsize=256)
def _evanescent_terms(d: float, dz: float, cutoff: int) -> _EvanescentTerms:
    m = np.arange(-cutoff, cutoff + 1, dtype=float)
    M, N = np.meshgrid(m, m, indexing="ij")
    keep = (M != 0) | (N != 0)
    gx, gy = M[keep] / d, N[keep] / d  # g/k0 with g = 2 pi (m, n)/d and k0 = 2 pi
    q = np.sqrt(gx * gx + gy * gy - 1.0)
    x = 2 * np.pi * dz * q
    e2 = np.exp(-2 * x)
    return _EvanescentTerms(f=(gx * gx - 1) / q, one_m_tanh=2 * e2 / (1 + e2),
                            tanh=(1 - e2) / (1 + e2), sech=2 * np.exp(-x) / (1 + e2))


def evanescent_bracket(c, geom: LatticeGeometry, mn_cutoff: int = 12, rtol: float = 1e-12):
    """Dimensionless evanescent coupling E(cos kz dz), certified by doubling the cutoff."""
    if geom.d >= 1:
        raise ValueError("evanescent sum requires d < lambda0")
    if mn_cutoff < 1:
        raise ValueError("mn_cutoff must be >= 1")
    cut = mn_cutoff
    cur = _evanescent_terms(geom.d, geom.dz, cut).value(c)
    for _ in range(4):
        cut *= 2
        nxt = _evanescent_terms(geom.d, geom.dz, cut).value(c)
        scale = np.maximum(np.abs(nxt), 1e-300)
        if np.all(np.abs(nxt - cur) <= rtol * scale + 1e-300):
            return cur
        cur = nxt
    raise RuntimeError("evanescent sum did not converge")


def _trig(geom):
    k = geom.k0dz
    return np.sin(k), np.cos(k)


def radiative_bracket(kz, geom: LatticeGeometry):
    s0, _ = _trig(geom)
    a, k = np.asarray(kz, float) * geom.dz, geom.k0dz
    # cos(a) - cos(k) as a product, free of cancellation near a = 0
    den = -2 * np.sin(0.5 * (a + k)) * np.sin(0.5 * (a - k))
    if np.any(den == 0):
        raise ValueError("kz on the light line |kz| = k0")
    return s0 / den


def j_radiative(kz, geom: LatticeGeometry, w0: float | None = None):
    """omega(0) + Gamma(0)/2 * sin(k0 dz)/(cos(kz dz) - cos(k0 dz)).

    kz is in radians per lambda0, so the light line sits at kz = 2 pi.
    """
    w0 = omega0(geom) if w0 is None else w0
    return w0 + 0.5 * gamma0_collective(geom.d) * radiative_bracket(kz, geom)


def j_evanescent(kz, geom: LatticeGeometry, mn_cutoff: int = 12):
    """Evanescent contribution Gamma(0)/2 * E(kz) to the band."""
    c = np.cos(np.asarray(kz, float) * geom.dz)
    return 0.5 * gamma0_collective(geom.d) * evanescent_bracket(c, geom, mn_cutoff)


def j_total(kz, geom: LatticeGeometry, mn_cutoff: int = 12, w0: float | None = None):
    return j_radiative(kz, geom, w0) + j_evanescent(kz, geom, mn_cutoff)


def coefficient_a(aspect: float, cutoff: int = 40) -> float:
    m = np.arange(-cutoff, cutoff + 1, dtype=float)
    M, N = np.meshgrid(m, m, indexing="ij")
    r = np.hypot(M, N)
    r[cutoff, cutoff] = 1.0
    x = 2 * np.pi * aspect * r
    e2 = np.exp(-2 * x)
    t = M * M / r * 2 * e2 / (1 + e2)
    t[cutoff, cutoff] = 0.0
    return float(aspect * t.sum())


def coefficient_b(aspect: float, cutoff: int = 40) -> float:
    m = np.arange(-cutoff, cutoff + 1, dtype=float)
    M, N = np.meshgrid(m, m, indexing="ij")
    r = np.hypot(M, N)
    r[cutoff, cutoff] = 1.0
    x = 2 * np.pi * aspect * r
    e = np.exp(-x)
    t = M * M / r * (1 - e * e) / (1 + e * e) * 2 * e / (1 + e * e)
    t[cutoff, cutoff] = 0.0
    return float(aspect * t.sum())


def simplified_evanescent_bracket(kz, geom: LatticeGeometry):
    """(lambda0/dz) [-A + B cos(kz dz)], the large-cosh limit of E."""
    a, b = coefficient_a(geom.aspect), coefficient_b(geom.aspect)
    return (-a + b * np.cos(np.asarray(kz, float) * geom.dz)) / geom.dz


@dataclass(frozen=True)
class InvertibilityReport:
    coeff_a: float
    coeff_b: float
    threshold_d_over_lambda: float
    analytic_invertible: bool
    is_invertible: bool
    ev_ratio_max: float
    ev_ratio_estimate: float


def _slope_factor(c, geom, terms):
    # dJ/dkz = Gamma(0)/2 * dz sin(kz dz) * [s0/(c-c0)^2 - dE/dc]
    s0, c0 = _trig(geom)
    return s0 / (c - c0) ** 2 - terms.derivative(c)


@lru_cache(maxsize=4096)
def _invertibility(d: float, dz: float, mn_cutoff: int, n_scan: int) -> InvertibilityReport:
    geom = LatticeGeometry(d, dz)
    a, b = coefficient_a(geom.aspect), coefficient_b(geom.aspect)
    thr = np.sqrt(2 * b / np.pi) / geom.aspect
    s0, c0 = _trig(geom)
    terms = _evanescent_terms(d, dz, mn_cutoff)
    # dense in c near the band edge c = -1 where the extremum appears first
    u = np.linspace(0, 1, n_scan)
    c_up = -1 + (c0 + 1) * u**2 * (1 - 1e-9)
    c_lo = 1 - (1 - c0) * u**2 * (1 - 1e-9)
    ok = True
    for cs in (c_up[:-1], c_lo[:-1]):
        if cs.size and np.any(_slope_factor(cs, geom, terms) <= 0):
            ok = False
    c = np.cos(np.pi)  # band edge
    ev = abs(terms.value(c) / (s0 / (c - c0)))
    return InvertibilityReport(a, b, float(thr), bool(d > thr), ok, float(ev), float(b / (np.pi * dz * dz)))


def invertibility(geom: LatticeGeometry, mn_cutoff: int = 12, n_scan: int = 4001) -> InvertibilityReport:
    """Analytic and numerical invertibility of the band on both branches."""
    if geom.dz > 1:
        raise ValueError("invertibility analysis requires dz <= lambda0")
    return _invertibility(float(geom.d), float(geom.dz), int(mn_cutoff), int(n_scan))


def evanescent_ratio_max(geom: LatticeGeometry, mn_cutoff: int = 12, n_kz: int = 2001) -> float:
    """max over kz in (0, pi/dz] of |J_ev / J_1D| (both without omega(0))."""
    s0, c0 = _trig(geom)
    c = np.cos(np.linspace(0, np.pi, n_kz)[1:])
    c = c[c != c0]
    return float(np.max(np.abs(evanescent_bracket(c, geom, mn_cutoff) * (c - c0) / s0)))


@dataclass(frozen=True)
class BandStructure:
    kz: np.ndarray
    j_radiative: np.ndarray
    j_evanescent: np.ndarray
    j_total: np.ndarray
    geom: LatticeGeometry
    omega0: float
    gamma_collective: float


def band_structure(geom: LatticeGeometry, n_points: int = 400, mn_cutoff: int = 12) -> BandStructure:
    """Sample J(kz) on (0, pi/dz], skipping the light-line pole."""
    kz = np.linspace(0, np.pi / geom.dz, n_points + 1)[1:]
    kz = kz[np.abs(kz - 2 * np.pi) > 1e-9 * 2 * np.pi]
    w0 = omega0(geom)
    jr = j_radiative(kz, geom, w0)
    je = j_evanescent(kz, geom, mn_cutoff)
    return BandStructure(kz, jr, je, jr + je, geom, w0, gamma0_collective(geom.d))


def _require_invertible(geom, mn_cutoff):
    rep = invertibility(geom, mn_cutoff)
    if not rep.is_invertible:
        raise NonInvertibleBand(f"band not invertible at d/lambda0={geom.d:.4g}, dz/d={geom.aspect:.3g}")
    return rep


def band_edge_detuning(geom: LatticeGeometry, evanescent: bool = True, mn_cutoff: int = 12) -> float:
    """Detuning of the band edge kz = pi/dz (lower edge of the gap)."""
    _require_invertible(geom, mn_cutoff)
    kz = np.pi / geom.dz
    return float(j_total(kz, geom, mn_cutoff) if evanescent else j_radiative(kz, geom))


def _newton_v(v, target, s0, c0, terms, maxiter):
    live = np.isfinite(v)
    for _ in range(maxiter):
        if not live.any():
            break
        vl = v[live]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            c = c0 + 1 / vl
            h = s0 * vl + terms.value(c) - target[live]
            dh = np.where(vl == 0, s0, s0 - terms.derivative(c) / vl**2)
        step = h / dh
        v[live] = vl - step
        done = np.abs(step) <= 4e-16 * np.abs(vl) + 1e-300
        idx = np.flatnonzero(live)
        live[idx[done]] = False
    ok = ~live
    if live.any():
        vl = v[live]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            resid = np.abs(s0 * vl + terms.value(c0 + 1 / vl) - target[live])
        ok[live] = resid <= 1e-12 * (np.abs(target[live]) + s0 * np.abs(vl))
    return v, ok


def _solve_u(target, geom, evanescent, mn_cutoff, maxiter=60):
    """u = c - c0 solving s0/u + E(c0 + u) = target, and a convergence mask.

    Newton runs in v = 1/u. Deep in the gap a real target can have only
    complex roots, so failed entries are restarted off the real axis.
    """
    s0, c0 = _trig(geom)
    target = np.array(target, dtype=complex, ndmin=1)
    if not evanescent:
        with np.errstate(divide="ignore"):
            return s0 / target, np.ones(target.shape, bool)
    terms = _evanescent_terms(geom.d, geom.dz, mn_cutoff)
    v0 = (target - terms.value(c0)) / s0
    v, ok = _newton_v(v0.copy(), target, s0, c0, terms, maxiter)
    for kick in (0.1j, -0.1j, 1j):
        if ok.all():
            break
        bad = ~ok
        vb, okb = _newton_v(v0[bad] + kick * np.abs(v0[bad]), target[bad], s0, c0, terms, maxiter)
        v[bad] = vb
        ok[bad] = okb
    with np.errstate(divide="ignore"):
        return 1 / v, ok


def _index_from_u(u, noise, k0dz):
    """arccos(c0 + u) / k0dz without cancellation near c = +-1.

    Values of 1 -+ c below the rounding noise of u are snapped to the band
    edge (kz = 0 or pi/dz) where arccos has its square-root singularity.
    """
    half = 0.5 * k0dz
    one_p = 2 * np.cos(half) ** 2 + u   # 1 + c
    one_m = 2 * np.sin(half) ** 2 - u   # 1 - c
    one_p = np.where(np.abs(one_p) <= noise, 0.0, one_p)
    one_m = np.where(np.abs(one_m) <= noise, 0.0, one_m)
    right = (one_m.real <= one_p.real)
    w = np.where(right, 2 * np.arcsin(np.sqrt(one_m / 2)), np.pi - 2 * np.arcsin(np.sqrt(one_p / 2)))
    # real arguments (the lossless gap) keep Re w in [0, pi]; otherwise reflect through 0
    w = np.where(w.imag < 0, np.where(np.imag(u) == 0, np.conj(w), -w), w)
    return w / k0dz, np.where(right, 1 - one_m, one_p - 1)


@dataclass(frozen=True)
class IndexResult:
    d: float
    dz: float
    delta: np.ndarray
    n_re: np.ndarray
    n_im: np.ndarray
    in_bandgap: np.ndarray
    sigma_qc_used: np.ndarray
    gamma_prime: float

    @property
    def n(self):
        return self.n_re + 1j * self.n_im


def refractive_index(delta, geom: LatticeGeometry, sigma_qc=0.0, gamma_prime: float = 0.0,
                     evanescent: bool = True, mn_cutoff: int = 12) -> IndexResult:
    """Complex index at detuning(s) ``delta`` (Gamma0 units, rotating frame).

    ``sigma_qc`` is a value, an array matching ``delta`` or a callable of delta.
    With ``evanescent=False`` this is the closed-form arccos expression.
    """
    if gamma_prime < 0:
        raise ValueError("gamma_prime must be >= 0")
    _require_invertible(geom, mn_cutoff)
    delta = np.asarray(delta, float)
    sig = np.asarray(sigma_qc(delta) if callable(sigma_qc) else sigma_qc, complex) * np.ones_like(delta)
    g = gamma0_collective(geom.d)
    # the gap is a property of the bare lattice: flag it with sigma = gamma' = 0
    base = 2 * (delta - omega0(geom))
    den = base - 2 * sig.real + 1j * (gamma_prime - 2 * sig.imag)
    # relative rounding of the detuning difference, carried into u
    scale = 8 * np.finfo(float).eps * (np.abs(delta) + abs(omega0(geom)) + 1.0)
    tiny = np.finfo(float).tiny
    rel = (scale + 8 * np.finfo(float).eps * np.abs(sig.real)) / np.maximum(np.abs(den), tiny)
    rel0 = scale / np.maximum(np.abs(base), tiny)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u, ok = _solve_u(den / g, geom, evanescent, mn_cutoff)
        u0, ok0 = _solve_u(base / g, geom, evanescent, mn_cutoff)
        lossless_real = ok0 & (np.abs(u0.imag) <= 1e-12 * np.abs(u0))
        u0 = np.where(lossless_real, u0.real, u0)
        n, _ = _index_from_u(u, rel * np.abs(u), geom.k0dz)
        _, c_lossless = _index_from_u(u0, rel0 * np.abs(u0), geom.k0dz)
    gap = ~lossless_real | (np.abs(c_lossless) > 1) | ~np.isfinite(u0)
    if np.any(~ok & ~gap):
        raise RuntimeError("band inversion did not converge outside the gap")
    n = np.where(ok, n, np.nan)
    shape = delta.shape
    n, gap = n.reshape(shape), gap.reshape(shape)
    return IndexResult(geom.d, geom.dz, delta, n.real, n.imag, gap, sig, gamma_prime)


def index_from_kz(kz, geom: LatticeGeometry, evanescent: bool = True, mn_cutoff: int = 12):
    """Round trip helper: index recovered from the band value at kz."""
    J = j_total(kz, geom, mn_cutoff) if evanescent else j_radiative(kz, geom)
    return refractive_index(J, geom, evanescent=evanescent, mn_cutoff=mn_cutoff)
