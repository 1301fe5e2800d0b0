"""Bloch modes of an infinite square array and the single-layer response.

Geometry lengths are stored in units of lambda0. Rates are in units of Gamma0
and detunings are measured from the bare transition (rotating frame).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .greens import HYDROGEN, PhysicalConstants, gxx


@dataclass(frozen=True)
class LatticeGeometry:
    """In-plane constant ``d`` and interlayer constant ``dz``, both in units of lambda0."""

    d: float
    dz: float

    def __post_init__(self):
        if not 0 < self.d < 1:
            raise ValueError(f"need 0 < d/lambda0 < 1, got {self.d}")
        if not self.dz > 0:
            raise ValueError(f"need dz > 0, got {self.dz}")

    @classmethod
    def from_aspect(cls, d: float, aspect: float = 2.5) -> "LatticeGeometry":
        return cls(d=d, dz=aspect * d)

    @classmethod
    def from_a0(cls, d_over_a0: float, aspect: float = 2.5,
                consts: PhysicalConstants = HYDROGEN) -> "LatticeGeometry":
        return cls.from_aspect(float(consts.d_over_lambda(d_over_a0)), aspect)

    @property
    def aspect(self) -> float:
        return self.dz / self.d

    @property
    def k0d(self) -> float:
        return 2 * np.pi * self.d

    @property
    def k0dz(self) -> float:
        return 2 * np.pi * self.dz


@dataclass(frozen=True)
class BlochEigenvalue:
    omega: float
    gamma: float


class LatticeSumError(RuntimeError):
    def __init__(self, msg, partial_sums):
        super().__init__(msg)
        self.partial_sums = partial_sums


def gamma0_collective(d: float) -> float:
    """Gamma(0)/Gamma0 = 3 lambda0^2 / (4 pi d^2)."""
    return 3.0 / (4 * np.pi * d * d)


def collective_gamma(kx, ky, geom: LatticeGeometry):
    """Collective decay rate Gamma(k)/Gamma0; k in units of k0.

    Exactly zero outside the light cone. Points on the cone are rejected.
    """
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    k2 = kx * kx + ky * ky
    if np.any(k2 == 1.0):
        raise ValueError("collective_gamma is singular on the light cone |k| = k0")
    inside = k2 < 1.0
    root = np.sqrt(np.where(inside, 1.0 - k2, 1.0))
    g = np.where(inside, gamma0_collective(geom.d) * (1.0 - kx * kx) / root, 0.0)
    return float(g) if g.ndim == 0 else g


def _spectral_sum(kx, ky, k0d, z, gcut):
    # Weyl expansion of sum_R G(R + z zhat) e^{ik.R}, valid for z > 0
    nmax = int(gcut / z * k0d / (2 * np.pi)) + 2
    m = np.arange(-nmax, nmax + 1)
    qx = kx + 2 * np.pi * m[:, None] / k0d
    qy = ky + 2 * np.pi * m[None, :] / k0d
    kz = np.sqrt((1.0 - qx * qx - qy * qy).astype(complex))
    kz = np.where(kz.imag < 0, -kz, kz)
    terms = 1.5j * np.pi * (1.0 - qx * qx) * np.exp(1j * kz * z) / kz
    return terms.sum() / (k0d * k0d)


def _on_axis(z):
    return 0.75 * np.exp(1j * z) * (1 / z + 1j / z**2 - 1 / z**3)


def lattice_sum_spectral(kx, ky, geom: LatticeGeometry, shells: int = 6,
                         gcut: float = 40.0):
    """sum_{R != 0} G(R) e^{ik.R} via the plane-wave expansion at small height.

    The sum is evaluated a short distance z above the plane where the
    reciprocal series converges exponentially, the near shells are swapped
    back to their in-plane values, and the residual smooth z dependence is
    removed by Richardson extrapolation in z^2.
    """
    k0d = geom.k0d
    if abs(np.hypot(kx, ky) - 1.0) < 1e-9:
        raise ValueError("lattice sum is singular on the light cone")
    i = np.arange(-shells, shells + 1) * k0d
    X, Y = np.meshgrid(i, i, indexing="ij")
    keep = (X != 0) | (Y != 0)
    X, Y = X[keep], Y[keep]
    phase = np.exp(1j * (kx * X + ky * Y))
    g_plane = gxx(X, Y)
    zs = k0d / np.array([6.0, 8.0, 12.0])
    vals = []
    for z in zs:
        s = _spectral_sum(kx, ky, k0d, z, gcut) - _on_axis(z)
        vals.append(s - np.sum((gxx(X, Y, z) - g_plane) * phase))
    # quadratic in z^2 through the three heights, evaluated at z = 0
    u = zs**2
    w = [u[1] * u[2] / ((u[0] - u[1]) * (u[0] - u[2])),
         u[0] * u[2] / ((u[1] - u[0]) * (u[1] - u[2])),
         u[0] * u[1] / ((u[2] - u[0]) * (u[2] - u[1]))]
    return sum(wi * vi for wi, vi in zip(w, vals))


def lattice_sum_windowed(kx, ky, geom: LatticeGeometry, r_max: float,
                         width_ratio: float = 3.0):
    """Real-space sum with Gaussian window exp(-R^2/2W^2), W = r_max/width_ratio.

    ``r_max`` is in units of lambda0. Used as an independent check of the
    spectral evaluation; converges slowly in the real part.
    """
    k0d = geom.k0d
    rm = 2 * np.pi * r_max
    w = rm / width_ratio
    n = int(rm / k0d) + 1
    i = np.arange(-n, n + 1) * k0d
    X, Y = np.meshgrid(i, i, indexing="ij")
    R2 = X * X + Y * Y
    m = (R2 > 0) & (R2 <= rm * rm)
    X, Y, R2 = X[m], Y[m], R2[m]
    terms = gxx(X, Y) * np.exp(-R2 / (2 * w * w)) * np.exp(1j * (kx * X + ky * Y))
    return terms.sum()


def windowed_omega_sequence(geom: LatticeGeometry, radii, kx=0.0, ky=0.0,
                            width_ratio: float = 3.0):
    """omega(k) from the windowed sum at each truncation radius (lambda0 units)."""
    return np.array([-lattice_sum_windowed(kx, ky, geom, r, width_ratio).real for r in radii])


def collective_omega(kx, ky, geom: LatticeGeometry, tol: float = 1e-6,
                     max_shells: int = 24):
    """Collective shift omega(k)/Gamma0 = -Re sum_{R != 0} G(R) e^{ik.R}.

    Convergence is certified by increasing the number of exactly summed near
    shells until successive values agree to ``tol`` relative.
    """
    shells = 4
    prev = -lattice_sum_spectral(kx, ky, geom, shells).real
    history = [prev]
    while shells < max_shells:
        shells *= 2
        cur = -lattice_sum_spectral(kx, ky, geom, shells).real
        history.append(cur)
        if abs(cur - prev) <= tol * max(abs(cur), 1.0):
            return float(cur)
        prev = cur
    raise LatticeSumError("collective_omega did not converge", history[-2:])


def bloch_eigenvalue(kx, ky, geom: LatticeGeometry, tol: float = 1e-6) -> BlochEigenvalue:
    return BlochEigenvalue(collective_omega(kx, ky, geom, tol), collective_gamma(kx, ky, geom))


_omega0_lock = threading.Lock()


@lru_cache(maxsize=4096)
def _omega0_cached(d: float, tol: float) -> float:
    return collective_omega(0.0, 0.0, LatticeGeometry(d, d), tol)


def omega0(geom_or_d, tol: float = 1e-9) -> float:
    """Memoised omega(0)/Gamma0 for a lattice constant (lambda0 units)."""
    d = geom_or_d.d if isinstance(geom_or_d, LatticeGeometry) else float(geom_or_d)
    with _omega0_lock:
        return _omega0_cached(d, tol)


def layer_r_t(delta, geom: LatticeGeometry, sigma_qc=0.0):
    """Single-layer reflection and transmission at normal incidence."""
    g = gamma0_collective(geom.d)
    w0 = omega0(geom)
    # iG/(2x - iG) written so that r = -1 exactly at x = 0
    r = -1 / (1 + 2j * (w0 - np.asarray(delta) + np.asarray(sigma_qc)) / g)
    return r, 1 + r


def transmission_phase(delta, geom: LatticeGeometry):
    """arg t(delta); NaN where t vanishes exactly."""
    _, t = layer_r_t(delta, geom)
    t = np.asarray(t)
    ph = np.where(t == 0, np.nan, np.angle(t))
    return float(ph) if ph.ndim == 0 else ph
