"""Finite-array coupled-dipole solver and the susceptibility of a driven site.

The array is a (2h+1) x (2h+1) square grid centred on the driven atom. The
interaction matrix is block Toeplitz, so products with it are done by
zero-padded 2D FFTs. The system is complex symmetric, which lets us use COCG
(conjugate orthogonal CG) with a circulant preconditioner built from the same
kernel. All rates are in units of Gamma0, lengths in units of lambda0.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, gmres

from .greens import gxx
from .lattice2d import LatticeGeometry, gamma0_collective, omega0


class SolverError(RuntimeError):
    def __init__(self, msg, residuals=()):
        super().__init__(msg)
        self.residuals = list(residuals)


def absorbing_profile(r, r_cutoff: float, gamma_collective: float):
    """Extra decay 3*Gamma(0)*((r - rc)/(rc/2))^2 beyond the cut-off radius."""
    r = np.asarray(r, dtype=float)
    x = np.clip((r - r_cutoff) / (0.5 * r_cutoff), 0.0, None)
    out = 3.0 * gamma_collective * x * x
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FiniteArrayProblem:
    """Square array of (2*half_sites+1)^2 atoms with an absorbing rim.

    ``drive`` maps integer site offsets (i, j) from the centre to Rabi
    amplitudes. The absorbing layer starts at r_cutoff = 2*l/3 where l is the
    half-width of the array.
    """

    geom: LatticeGeometry
    half_sites: int
    delta: float
    drive: dict = field(default_factory=lambda: {(0, 0): 1.0})
    absorbing: bool = True
    enforce_min_cutoff: bool = True

    def __post_init__(self):
        if self.half_sites < 0:
            raise ValueError("half_sites must be non-negative")
        if not self.drive:
            raise ValueError("drive must be non-empty")
        if not np.isfinite(self.delta):
            raise ValueError("delta must be finite")
        h = self.half_sites
        for (i, j) in self.drive:
            if abs(i) > h or abs(j) > h:
                raise ValueError(f"drive site {(i, j)} outside the array")
        if self.absorbing and self.enforce_min_cutoff and self.r_cutoff < 0.5 - 1e-12:
            raise ValueError(f"r_cutoff = {self.r_cutoff:.3f} lambda0 is below lambda0/2")

    @classmethod
    def centered(cls, geom: LatticeGeometry, delta: float, r_cutoff: float = 0.5,
                 max_sites: int = 100_000, **kw) -> "FiniteArrayProblem":
        """Smallest array whose cut-off radius reaches ``r_cutoff`` within the site budget."""
        h = int(np.ceil(1.5 * r_cutoff / geom.d - 1e-9))
        h_budget = int((np.sqrt(max_sites) - 1) // 2)
        capped = h > h_budget
        h = min(h, h_budget)
        return cls(geom, h, delta, enforce_min_cutoff=not capped, **kw)

    @property
    def n_side(self) -> int:
        return 2 * self.half_sites + 1

    @property
    def n_sites(self) -> int:
        return self.n_side**2

    @property
    def half_size_l(self) -> float:
        return self.half_sites * self.geom.d

    @property
    def r_cutoff(self) -> float:
        return 2.0 * self.half_size_l / 3.0

    def positions(self):
        i = np.arange(-self.half_sites, self.half_sites + 1) * self.geom.d
        return np.meshgrid(i, i, indexing="ij")

    def extra_decay(self):
        if not self.absorbing or self.half_sites == 0:
            return np.zeros((self.n_side, self.n_side))
        X, Y = self.positions()
        return absorbing_profile(np.hypot(X, Y), self.r_cutoff, gamma0_collective(self.geom.d))

    def drive_grid(self):
        b = np.zeros((self.n_side, self.n_side), complex)
        h = self.half_sites
        for (i, j), v in self.drive.items():
            b[h + i, h + j] = v
        return b


@dataclass(frozen=True)
class FiniteArraySolution:
    amplitudes: np.ndarray
    residual_norm: float
    iterations: int
    method: str
    problem: FiniteArrayProblem

    def at(self, i: int, j: int) -> complex:
        h = self.problem.half_sites
        return complex(self.amplitudes[h + i, h + j])


class ToeplitzOperator:
    """A = diag(delta + i(1 + Gamma'_j)/2) + [G_xx(R_j - R_k)]_{j != k} on a square grid."""

    def __init__(self, problem: FiniteArrayProblem):
        self.problem = problem
        n = problem.n_side
        self.n = n
        self.P = sfft.next_fast_len(2 * n - 1)
        m = np.arange(self.P)
        m = np.where(m <= self.P // 2, m, m - self.P)
        kd = problem.geom.k0d
        X, Y = np.meshgrid(m * kd, m * kd, indexing="ij")
        X[0, 0] = 1.0  # placeholder, zeroed below
        K = gxx(X, Y)
        K[0, 0] = 0.0
        self.kernel_hat = sfft.fft2(K)
        self.diag = problem.delta + 0.5j * (1.0 + problem.extra_decay())

    def convolve(self, v, symbol):
        V = np.zeros((self.P, self.P), complex)
        V[: self.n, : self.n] = v
        return sfft.ifft2(sfft.fft2(V) * symbol)[: self.n, : self.n]

    def matvec(self, v):
        return self.diag * v + self.convolve(v, self.kernel_hat)

    def circulant_preconditioner(self, eta: float):
        damp = 0.5 + eta * gamma0_collective(self.problem.geom.d)
        symbol = 1.0 / (self.problem.delta + 1j * damp + self.kernel_hat)
        return lambda r: self.convolve(r, symbol)

    def dense(self):
        """Explicit matrix; only for small arrays."""
        X, Y = self.problem.positions()
        x, y = X.ravel(), Y.ravel()
        kd = 2 * np.pi
        dx = (x[:, None] - x[None, :]) * kd
        dy = (y[:, None] - y[None, :]) * kd
        same = (dx == 0) & (dy == 0)
        dx = np.where(same, 1.0, dx)
        A = np.where(same, 0.0, gxx(dx, dy))
        A[np.diag_indices_from(A)] = self.diag.ravel()
        return A


def _cocg(matvec, b, prec, tol, maxiter):
    x = np.zeros_like(b)
    r = b.copy()
    z = prec(r)
    p = z.copy()
    rz = np.sum(r * z)
    bnorm = np.linalg.norm(b)
    history = []
    for k in range(1, maxiter + 1):
        q = matvec(p)
        pq = np.sum(p * q)
        if pq == 0 or rz == 0:
            return x, k, history, False
        a = rz / pq
        x += a * p
        r -= a * q
        res = np.linalg.norm(r) / bnorm
        history.append(res)
        if res < tol:
            return x, k, history, True
        z = prec(r)
        rz_new = np.sum(r * z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, history, False


def solve_steady_state(problem: FiniteArrayProblem, tol: float = 1e-10,
                       maxiter: int = 20_000, method: str = "auto",
                       eta: float = 0.1) -> FiniteArraySolution:
    """Solve (delta - M) c = -Omega for the steady-state amplitudes.

    ``method`` is one of ``auto`` (COCG with circulant preconditioning, GMRES
    fallback), ``cocg``, ``gmres`` or ``dense``.
    """
    op = ToeplitzOperator(problem)
    b = -problem.drive_grid()
    bnorm = np.linalg.norm(b)
    if method == "dense":
        A = op.dense()
        x = sla.solve(A, b.ravel()).reshape(b.shape)
        res = np.linalg.norm(op.matvec(x) - b) / bnorm
        return FiniteArraySolution(x, float(res), 1, "dense", problem)

    prec = op.circulant_preconditioner(eta)
    history = []
    if method in ("auto", "cocg"):
        x, its, history, ok = _cocg(op.matvec, b, prec, tol, maxiter)
        res = np.linalg.norm(op.matvec(x) - b) / bnorm
        if ok and res < 10 * tol:
            return FiniteArraySolution(x, float(res), its, "cocg", problem)
        if method == "cocg":
            raise SolverError("COCG did not converge", history)

    shape = b.shape
    N = b.size
    A = LinearOperator((N, N), matvec=lambda v: op.matvec(v.reshape(shape)).ravel(), dtype=complex)
    M = LinearOperator((N, N), matvec=lambda v: prec(v.reshape(shape)).ravel(), dtype=complex)
    counter = []
    x, info = gmres(A, b.ravel(), M=M, rtol=tol, restart=200, maxiter=maxiter,
                    callback=lambda rk: counter.append(rk), callback_type="pr_norm")
    x = x.reshape(shape)
    res = np.linalg.norm(op.matvec(x) - b) / bnorm
    if info != 0 or res > 10 * tol:
        raise SolverError("GMRES did not converge", history + counter)
    return FiniteArraySolution(x, float(res), len(counter), "gmres", problem)


OFFSETS = {"0": (0, 0), "dx": (1, 0), "dy": (0, 1)}


def susceptibility_point(geom: LatticeGeometry, delta: float, r_cutoff: float = 0.5,
                         max_sites: int = 100_000, tol: float = 1e-10):
    """chi(0), chi(d x), chi(d y) at one detuning from a single centre-driven solve."""
    prob = FiniteArrayProblem.centered(geom, delta, r_cutoff, max_sites)
    sol = solve_steady_state(prob, tol=tol)
    return {k: sol.at(*ij) for k, ij in OFFSETS.items()}, sol


def susceptibility(delta: float, offset, geom: LatticeGeometry, r_cutoff: float = 0.5,
                   max_sites: int = 100_000) -> complex:
    """chi(offset, delta) = c_{centre+offset} / Omega_centre; offset in {'0', 'dx', 'dy'}."""
    key = offset if isinstance(offset, str) else {v: k for k, v in OFFSETS.items()}[tuple(offset)]
    vals, _ = susceptibility_point(geom, delta, r_cutoff, max_sites)
    return vals[key]


def default_offsets() -> np.ndarray:
    """Detuning samples (delta - omega(0)) / Gamma(0) for susceptibility tables.

    Dense just below the collective resonance where the index is optimised,
    sparse in the wings.
    """
    core = np.linspace(-0.30, 0.05, 15)
    wings = np.array([-5.0, -2.0, -1.0, -0.6, -0.45, 0.15, 0.3, 1.0, 2.0, 5.0])
    return np.unique(np.round(np.concatenate([core, wings]), 12))


@dataclass(frozen=True)
class ComplexSpectrum:
    """Complex function sampled on a detuning grid (Gamma0 units, absolute delta)."""

    delta: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.delta) != np.shape(self.values):
            raise ValueError("delta and values must have the same shape")
        if len(self.delta) > 1:
            object.__setattr__(self, "_re", CubicSpline(self.delta, np.real(self.values)))
            object.__setattr__(self, "_im", CubicSpline(self.delta, np.imag(self.values)))

    def __call__(self, delta):
        if len(self.delta) == 1:
            return np.full(np.shape(delta), self.values[0], dtype=complex)
        return self._re(delta) + 1j * self._im(delta)


@dataclass(frozen=True)
class SusceptibilityTable:
    geom_d: float
    omega0: float
    gamma_collective: float
    chi0: ComplexSpectrum
    chi_dx: ComplexSpectrum
    chi_dy: ComplexSpectrum
    achieved_r_cutoff: float
    n_sites: int

    @property
    def delta(self):
        return self.chi0.delta

    def gamma_d(self, delta):
        return gamma_d_from_chi(self.chi0(delta))

    def to_json(self) -> dict:
        def enc(s):
            return [list(map(float, s.values.real)), list(map(float, s.values.imag))]
        return {"d": self.geom_d, "omega0": self.omega0, "gamma_collective": self.gamma_collective,
                "delta": list(map(float, self.delta)), "chi0": enc(self.chi0),
                "chi_dx": enc(self.chi_dx), "chi_dy": enc(self.chi_dy),
                "achieved_r_cutoff": self.achieved_r_cutoff, "n_sites": self.n_sites}

    @classmethod
    def from_json(cls, doc: dict) -> "SusceptibilityTable":
        delta = np.array(doc["delta"])

        def dec(k):
            re, im = doc[k]
            return ComplexSpectrum(delta, np.array(re) + 1j * np.array(im))
        return cls(doc["d"], doc["omega0"], doc["gamma_collective"], dec("chi0"), dec("chi_dx"),
                   dec("chi_dy"), doc["achieved_r_cutoff"], doc["n_sites"])


def _cache_dir():
    root = os.environ.get("ULTRAINDEX_CACHE")
    if root == "":
        return None
    return Path(root) if root else Path.home() / ".cache" / "ultraindex"


def build_susceptibility_table(geom: LatticeGeometry, offsets=None, r_cutoff: float = 0.5,
                               max_sites: int = 100_000, use_cache: bool = True,
                               ) -> SusceptibilityTable:
    """Solve the centre-driven array on a detuning grid around omega(0).

    ``offsets`` are (delta - omega(0))/Gamma(0). Tables are cached on disk
    (``$ULTRAINDEX_CACHE``, empty string disables) keyed by every input.
    """
    offsets = default_offsets() if offsets is None else np.sort(np.asarray(offsets, float))
    w0 = omega0(geom)
    g = gamma0_collective(geom.d)
    key = hashlib.sha256(json.dumps(
        {"d": repr(float(geom.d)), "offsets": [repr(float(o)) for o in offsets],
         "rc": repr(float(r_cutoff)), "max_sites": int(max_sites), "v": 1}).encode()).hexdigest()[:24]
    cache = _cache_dir() if use_cache else None
    path = cache / f"chi_{key}.json" if cache else None
    if path is not None and path.exists():
        return SusceptibilityTable.from_json(json.loads(path.read_text()))

    deltas = w0 + offsets * g
    rows = []
    prob = None
    for dl in deltas:
        vals, sol = susceptibility_point(geom, dl, r_cutoff, max_sites)
        rows.append([vals["0"], vals["dx"], vals["dy"]])
        prob = sol.problem
    rows = np.array(rows)
    table = SusceptibilityTable(float(geom.d), w0, g, ComplexSpectrum(deltas, rows[:, 0]),
                                ComplexSpectrum(deltas, rows[:, 1]), ComplexSpectrum(deltas, rows[:, 2]),
                                prob.r_cutoff, prob.n_sites)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(table.to_json()))
        tmp.replace(path)
    return table


def gamma_d_from_chi(chi0):
    chi0 = np.asarray(chi0)
    if np.any(chi0 == 0):
        raise ZeroDivisionError("chi(0, delta) vanishes")
    out = -2.0 * np.imag(1.0 / chi0)
    return float(out) if out.ndim == 0 else out


def gamma_d(delta: float, geom: LatticeGeometry, **kw) -> float:
    """Rate at which a selectively driven site radiates into the array."""
    return gamma_d_from_chi(susceptibility(delta, "0", geom, **kw))


def hole_self_energy(chi0):
    chi0 = np.asarray(chi0)
    if np.any(chi0 == 0):
        raise ZeroDivisionError("chi(0, delta) vanishes")
    return 1.0 / chi0


def holon_doublon_self_energy(chi0, chi_dx, chi_dy, combine: str = "sum"):
    """Sum (or mean) over pair orientations of 1 / (chi(0) + chi(d xi))."""
    dx = np.asarray(chi0) + np.asarray(chi_dx)
    dy = np.asarray(chi0) + np.asarray(chi_dy)
    if np.any(dx == 0) or np.any(dy == 0):
        raise ZeroDivisionError("pair denominator vanishes")
    w = {"sum": 1.0, "mean": 0.5}[combine]
    return w * (1.0 / dx + 1.0 / dy)


def defected_layer_t_r(delta, geom: LatticeGeometry, p_defect: float, sigma):
    """Layer (r, t) with a small density ``p_defect`` of defects of self-energy ``sigma``."""
    g = gamma0_collective(geom.d)
    r = 0.5j * g / (-np.asarray(delta) + omega0(geom) - 0.5j * g + p_defect * np.asarray(sigma))
    return r, 1 + r


def hole_count(table: SusceptibilityTable) -> float:
    """Effective number of atoms affected by a single hole, Gamma_d(omega(0)) / Gamma(0)."""
    return table.gamma_d(table.omega0) / table.gamma_collective
