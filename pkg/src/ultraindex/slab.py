"""Finite stacks of layers, the Fresnel slab, and the Drude-Lorentz limit.

Layer coefficients are written as functions of the Bloch index n through
X = (cos(n k0 dz) - cos(k0 dz)) / sin(k0 dz), which gives r = -iX/(1 + iX)
and t = 1/(1 + iX) without reference to the detuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .greens import HYDROGEN, PhysicalConstants
from .lattice2d import LatticeGeometry, gamma0_collective, omega0

# SI constants for the plasma frequency
Q_E = 1.602176634e-19
M_E = 9.1093837015e-31
EPS0 = 8.8541878128e-12
C_LIGHT = 299792458.0


class ResonancePole(ZeroDivisionError):
    pass


def layer_r_t_from_index(n, k0dz: float):
    """Single-layer (r, t) expressed through the Bloch index."""
    x = (np.cos(np.asarray(n) * k0dz) - np.cos(k0dz)) / np.sin(k0dz)
    t = 1 / (1 + 1j * x)
    return -1j * x * t, t


def u_chebyshev(M: int, n, k0dz: float):
    """sin(M n k0dz) / sin(n k0dz), with the removable singularity filled in."""
    phi = np.asarray(n, complex) * k0dz
    s = np.sin(phi)
    # near phi = j pi the ratio tends to M cos(j pi)^(M-1)
    j = np.round(phi.real / np.pi)
    near = np.abs(phi - j * np.pi) < 1e-7
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(M * phi) / s
    lim = M * np.cos(j * np.pi) ** (M - 1) * (1 - (M * M - 1) * (phi - j * np.pi) ** 2 / 6)
    out = np.where(near, lim, val)
    return out if out.ndim else out[()]


def stack_t_r(n, M: int, geom: LatticeGeometry):
    """(t_M, r_M) of M equally spaced layers with input and output planes a distance dz away."""
    if M < 1:
        raise ValueError("M must be >= 1")
    k = geom.k0dz
    r, t = layer_r_t_from_index(n, k)
    ph = np.exp(1j * k)
    um = u_chebyshev(M, n, k)
    um1 = u_chebyshev(M - 1, n, k) if M > 1 else np.zeros_like(um)
    den = um - ph * t * um1
    if np.any(den == 0):
        raise ResonancePole("stack denominator vanishes")
    return ph * t / den, ph * ph * r * um / den


def transfer_matrix_t_r(layers, spacing_phase):
    """Brute-force stack: free propagation then a sheet, for each (r, t) in ``layers``.

    ``spacing_phase`` is k0 dz. Returns (t, r) referenced to the first and last sheet planes
    with one extra spacing in front.
    """
    T = np.eye(2, dtype=complex)
    P = np.diag([np.exp(1j * spacing_phase), np.exp(-1j * spacing_phase)])
    for r, t in layers:
        S = np.array([[t * t - r * r, r], [-r, 1]], dtype=complex) / t
        T = S @ P @ T
    r_tot = -T[1, 0] / T[1, 1]
    t_tot = np.linalg.det(T) / T[1, 1]
    return t_tot, r_tot


def fresnel_t_r(n, L: float, k0: float = 2 * np.pi):
    """Slab of index n and length L (lambda0 units by default, k0 = 2 pi)."""
    if not L > 0:
        raise ValueError("L must be positive")
    n = np.asarray(n, complex)
    e2 = np.exp(2j * n * k0 * L)
    den = (1 + n) ** 2 - e2 * (n - 1) ** 2
    if np.any(den == 0):
        raise ResonancePole("Fresnel denominator vanishes")
    t = 4 * n * np.exp(1j * n * k0 * L) / den
    r = (n * n - 1) * (e2 - 1) / den
    return t, r


def fresnel_agreement(n_target, M: int, geom: LatticeGeometry) -> float:
    """max(|t_M - t_Fr|/|t_Fr|, |r_M - r_Fr|/|r_Fr|) with L = M dz."""
    tm, rm = stack_t_r(n_target, M, geom)
    tf, rf = fresnel_t_r(n_target, M * geom.dz)
    return float(max(abs(tm - tf) / abs(tf), abs(rm - rf) / abs(rf)))


@dataclass(frozen=True)
class DrudeLorentzParams:
    """Single-resonance parameters in Gamma0 units; ``omega_res`` is absolute."""

    omega_res: float
    gamma_damp: float
    f_res: float
    omega_p: float

    @property
    def strength(self) -> float:
        """f_res * omega_p^2 / omega_res."""
        return self.f_res * self.omega_p**2 / self.omega_res


def drude_lorentz_index(delta, params: DrudeLorentzParams, omega0_abs: float):
    """sqrt(1 + f wp^2 / (w_res^2 - w^2 - i gamma w)) at w = omega0_abs + delta."""
    w = omega0_abs + np.asarray(delta, float)
    n = np.sqrt(1 + params.f_res * params.omega_p**2
                / (params.omega_res**2 - w * w - 1j * params.gamma_damp * w))
    return np.where(n.imag < 0, -n, n)


def plasma_frequency(geom: LatticeGeometry, consts: PhysicalConstants = HYDROGEN) -> float:
    """sqrt(N q^2 / (m eps0 V)) for one atom per cell d^2 dz, in Gamma0 units."""
    vol = geom.d**2 * geom.dz * consts.lambda0**3
    return float(np.sqrt(Q_E**2 / (M_E * EPS0 * vol)) / consts.gamma0)


def drude_lorentz_map(geom: LatticeGeometry, sigma_qc_at_delta: complex = 0.0,
                      gamma_prime: float = 0.0, consts: PhysicalConstants = HYDROGEN,
                      bare_resonance: bool = False) -> DrudeLorentzParams:
    """Drude-Lorentz parameters matching the layered index at strong loss.

    f_res follows from f wp^2 / w_res = 2 Gamma(0)/(k0 dz); with
    ``bare_resonance`` the bare transition frequency is used for w_res there.
    """
    w_bare = 2 * np.pi * C_LIGHT / consts.lambda0 / consts.gamma0
    w_res = w_bare + omega0(geom) + float(np.real(sigma_qc_at_delta))
    gamma = gamma_prime - 2 * float(np.imag(sigma_qc_at_delta))
    wp = plasma_frequency(geom, consts)
    strength = 2 * gamma0_collective(geom.d) / geom.k0dz
    f = strength * (w_bare if bare_resonance else w_res) / wp**2
    return DrudeLorentzParams(w_res, gamma, f, wp)


def oscillator_strength(consts: PhysicalConstants = HYDROGEN, aspect: float = 2.5) -> float:
    """f_res implied by the layered index with hydrogen constants (density independent)."""
    geom = LatticeGeometry.from_aspect(0.01, aspect)
    return drude_lorentz_map(geom, consts=consts, bare_resonance=True).f_res
