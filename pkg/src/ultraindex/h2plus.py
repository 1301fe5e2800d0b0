"""Clamped-nuclei H2+ energies in prolate spheroidal coordinates.

With xi = (r_a + r_b)/R, eta = (r_a - r_b)/R and m = 0 the electronic problem
separates into

    d/d eta[(1 - eta^2) L'] + (A + p^2 eta^2) L = 0
    d/d xi [(xi^2 - 1) X'] + (-A + 2 R xi - p^2 xi^2) X = 0

with p^2 = -E R^2 / 2 (atomic units). The angular equation is diagonalised in
normalised Legendre polynomials, the radial one by a Galerkin method in the
basis exp(-p s) L_n(2 p s), s = xi - 1, with Gauss-Laguerre quadrature exact
for every matrix element. A state is labelled by the angular index j (number
of eta nodes) and the radial node count k; E(R) solves A_xi_k(p) = A_eta_j(p).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.special as ss
from scipy.optimize import brentq


def eta_eigenvalues(p: float, n_basis: int = 80) -> np.ndarray:
    """Separation constants A_j of the angular equation, ascending in j."""
    l = np.arange(n_basis + 2, dtype=float)
    a = (l[:-1] + 1) / np.sqrt((2 * l[:-1] + 1) * (2 * l[:-1] + 3))
    E = np.diag(a, 1) + np.diag(a, -1)
    eta2 = (E @ E)[:n_basis, :n_basis]
    ll = l[:n_basis]
    return np.linalg.eigvalsh(np.diag(ll * (ll + 1)) - p * p * eta2)


@lru_cache(maxsize=8)
def _laguerre_nodes(n: int):
    return ss.roots_laguerre(n)


def xi_eigenvalues(p: float, R: float, n_basis: int = 60) -> np.ndarray:
    """Separation constants of the radial equation; index k has k nodes."""
    x, w = _laguerre_nodes(2 * n_basis + 6)
    s = x / (2 * p)
    L = np.array([ss.eval_laguerre(n, x) for n in range(n_basis)])
    Lm = np.vstack([np.zeros_like(x), L[:-1]])
    n = np.arange(n_basis)[:, None]
    dphi = 2 * p * (n * (L - Lm) / x - 0.5 * L)
    ws = w / (2 * p)
    K = (-(dphi * (s * (s + 2) * ws)) @ dphi.T
         + (L * ((2 * R * (1 + s) - p * p * (1 + s) ** 2) * ws)) @ L.T)
    B = (L * ws) @ L.T
    return sla.eigh(K, B, eigvals_only=True)[::-1]


def electronic_energy(R: float, j: int, k: int, e_guess: float) -> float:
    """Electronic energy (Hartree, without 1/R) of state (j, k) near ``e_guess``."""
    pg = R * np.sqrt(-e_guess / 2)
    n_eta = int(2 * pg) + 60

    def f(p):
        return xi_eigenvalues(p, R)[k] - eta_eigenvalues(p, n_eta)[j]

    lo, hi = pg * 0.995, pg * 1.005
    for _ in range(200):
        if np.sign(f(lo)) != np.sign(f(hi)):
            break
        lo, hi = lo * 0.99, hi * 1.01
    else:
        raise RuntimeError(f"no root bracket for state {(j, k)} at R = {R}")
    p = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return -2 * p * p / R**2


def ground_pair(R: float):
    """(1s sigma_g, 2p sigma_u) electronic energies in Hartree."""
    eg = electronic_energy(R, 0, 0, -0.5 - 1 / R)
    eu = electronic_energy(R, 1, 0, eg)
    return eg, eu


def excited_sigma_pair(R: float):
    """(3d sigma_g, 4f sigma_u) energies: the sigma_g 2p / sigma_u 2p pair at large R."""
    eg = electronic_energy(R, 2, 0, -0.125 - 1 / R - 3 / R**2)
    eu = electronic_energy(R, 3, 0, eg)
    return eg, eu


def s_splitting_asymptotic(R):
    """Large-R gerade/ungerade splitting of the 1s pair in Hartree."""
    R = np.asarray(R, dtype=float)
    return 4 / np.e * R * np.exp(-R) * (1 + 1 / (2 * R) - 25 / (8 * R * R))


def p_splitting_leading(R):
    """Leading large-R splitting of the downfield n = 2 sigma pair in Hartree."""
    R = np.asarray(R, dtype=float)
    return R**3 * np.exp(-R / 2 - 2) / 4
