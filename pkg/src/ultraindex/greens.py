"""Dipole-dipole Green's function and the physical constants shared by all modules.

Lengths handed to the Green's function are dimensionless (pre-multiplied by k0).
Rates in the optics modules are in units of Gamma0; chemistry energies are in
Rydberg (|epsilon_s|) and converted with ``PhysicalConstants.ry_over_gamma0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HBAR_EV_S = 6.582119569e-16


@dataclass(frozen=True)
class PhysicalConstants:
    """Atomic species data. Defaults describe the hydrogen 1s-2p line."""

    lambda0: float = 121.567e-9
    gamma0: float = 2 * np.pi * 1.0e8
    epsilon_s: float = -13.6057
    a0: float = 52.9177e-12
    k0: float = field(init=False)

    def __post_init__(self):
        bad = []
        if not self.lambda0 > 0:
            bad.append("lambda0 must be positive")
        if not self.gamma0 > 0:
            bad.append("gamma0 must be positive")
        if not self.a0 > 0:
            bad.append("a0 must be positive")
        if not self.epsilon_s < 0:
            bad.append("epsilon_s must be negative")
        if bad:
            raise ValueError("; ".join(bad))
        object.__setattr__(self, "k0", 2 * np.pi / self.lambda0)

    @property
    def a0_over_lambda0(self) -> float:
        return self.a0 / self.lambda0

    @property
    def ry_over_gamma0(self) -> float:
        """|epsilon_s| expressed in units of hbar*Gamma0."""
        return abs(self.epsilon_s) / (HBAR_EV_S * self.gamma0)

    def d_over_lambda(self, d_over_a0):
        return np.asarray(d_over_a0) * self.a0_over_lambda0

    def d_over_a0(self, d_over_lambda):
        return np.asarray(d_over_lambda) / self.a0_over_lambda0

    def to_dict(self) -> dict:
        return {"lambda0": self.lambda0, "gamma0": self.gamma0,
                "epsilon_s": self.epsilon_s, "a0": self.a0}


HYDROGEN = PhysicalConstants()


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise ValueError("Vec3 components must be finite")

    def __neg__(self):
        return Vec3(-self.x, -self.y, -self.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(s * self.x, s * self.y, s * self.z)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))


def _components(r, k0):
    if isinstance(r, Vec3):
        x, y, z = r.x, r.y, r.z
    else:
        a = np.asarray(r, dtype=float)
        x, y, z = a[..., 0], a[..., 1], a[..., 2]
    x, y, z = (np.asarray(c, dtype=float) * k0 for c in (x, y, z))
    r2 = x * x + y * y + z * z
    if np.any(r2 == 0):
        raise ValueError("Green's function is singular at |r| = 0; inject the i/2 self term instead")
    return x, y, z, r2


def gxx(x, y, z=0.0):
    """x-x Green's function element for dimensionless coordinates (k0 = 1).

    Vectorised and unchecked; the caller guarantees r != 0.
    """
    r2 = x * x + y * y + z * z
    r = np.sqrt(r2)
    c2 = x * x / r2
    ir = 1.0 / r
    ir2 = ir * ir
    ir3 = ir2 * ir
    return 0.75 * np.exp(1j * r) * ((ir + 1j * ir2 - ir3) + (-ir - 3j * ir2 + 3 * ir3) * c2)


def gxx_longitudinal(x, y, z=0.0):
    """Quasi-static (curl-free) part of gxx; real."""
    r2 = x * x + y * y + z * z
    r = np.sqrt(r2)
    return 0.75 * (-1.0 / (r2 * r) + 3 * x * x / (r2 * r2 * r))


def green_xx(r, k0: float = 1.0):
    """x.G(r).x with r a Vec3 or an (..., 3) array of lengths; k0 sets the scale."""
    x, y, z, _ = _components(r, k0)
    out = gxx(x, y, z)
    return complex(out) if np.ndim(out) == 0 else out


def green_xx_longitudinal(r, k0: float = 1.0):
    x, y, z, _ = _components(r, k0)
    out = gxx_longitudinal(x, y, z).astype(complex)
    return complex(out) if np.ndim(out) == 0 else out


def green_xx_transverse(r, k0: float = 1.0):
    x, y, z, _ = _components(r, k0)
    out = gxx(x, y, z) - gxx_longitudinal(x, y, z)
    return complex(out) if np.ndim(out) == 0 else out
