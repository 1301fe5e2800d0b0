import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultraindex.band3d import refractive_index
from ultraindex.lattice2d import LatticeGeometry, gamma0_collective, layer_r_t, omega0
from ultraindex.slab import (ResonancePole, drude_lorentz_index, drude_lorentz_map, fresnel_agreement,
                             fresnel_t_r, layer_r_t_from_index, oscillator_strength, plasma_frequency,
                             stack_t_r, transfer_matrix_t_r, u_chebyshev)

GEOM = LatticeGeometry(0.02 / (2 * np.pi) / 2.5, 0.02 / (2 * np.pi))


def test_layer_from_index_matches_detuning_form():
    g = LatticeGeometry.from_aspect(1 / 100)
    delta = omega0(g) + 3 * gamma0_collective(g.d)
    n = refractive_index(delta, g, evanescent=False).n
    r, t = layer_r_t_from_index(n, g.k0dz)
    r0, t0 = layer_r_t(delta, g)
    assert r == pytest.approx(r0, rel=1e-9) and t == pytest.approx(t0, rel=1e-9)


def test_single_layer():
    n = 3 + 0.2j
    r, t = layer_r_t_from_index(n, GEOM.k0dz)
    t1, r1 = stack_t_r(n, 1, GEOM)
    ph = np.exp(1j * GEOM.k0dz)
    assert t1 == pytest.approx(ph * t) and r1 == pytest.approx(ph * ph * r)
    with pytest.raises(ValueError):
        stack_t_r(n, 0, GEOM)


@pytest.mark.parametrize("M", [1, 2, 10, 100])
@pytest.mark.parametrize("n", [0.5, 2.0, 7.3, 20.0])
def test_lossless_unitarity(M, n):
    t, r = stack_t_r(n, M, GEOM)
    assert abs(abs(t) ** 2 + abs(r) ** 2 - 1) < 1e-10


@given(st.integers(1, 60), st.floats(0.5, 20), st.floats(0, 1))
def test_stack_matches_transfer_matrix(M, nre, nim):
    n = complex(nre, nim)
    layer = layer_r_t_from_index(n, GEOM.k0dz)
    t, r = stack_t_r(n, M, GEOM)
    tb, rb = transfer_matrix_t_r([layer] * M, GEOM.k0dz)
    assert abs(t - tb) < 1e-8 * max(1, abs(t)) and abs(r - rb) < 1e-8 * max(1, abs(r))


def test_two_layer_geometric_series():
    n = 4 + 0.3j
    r, t = layer_r_t_from_index(n, GEOM.k0dz)
    ph = np.exp(1j * GEOM.k0dz)
    series = sum(t * t * ph * (r * r * ph * ph) ** k for k in range(400))
    t2, _ = stack_t_r(n, 2, GEOM)
    assert t2 == pytest.approx(ph * series, rel=1e-10)


def test_composition():
    n = 6 + 0.05j
    layer = layer_r_t_from_index(n, GEOM.k0dz)
    whole = transfer_matrix_t_r([layer] * 30, GEOM.k0dz)
    t, r = stack_t_r(n, 30, GEOM)
    assert np.allclose([t, r], whole, rtol=1e-9)


def test_u_chebyshev_limit():
    k = GEOM.k0dz
    assert u_chebyshev(7, np.pi / k, k) == pytest.approx(7.0)
    assert u_chebyshev(7, np.pi / k * (1 + 1e-6), k) == pytest.approx(
        np.sin(7 * np.pi * (1 + 1e-6)) / np.sin(np.pi * (1 + 1e-6)), rel=1e-6)


def test_fresnel_limits():
    t, r = fresnel_t_r(1.0, 0.37)
    assert t == pytest.approx(np.exp(2j * np.pi * 0.37)) and abs(r) < 1e-15
    n = 3.0
    L = 5 * np.pi / (n * 2 * np.pi)
    t, r = fresnel_t_r(n, L)
    assert abs(t) == pytest.approx(1, abs=1e-12) and abs(r) < 1e-12
    t, r = fresnel_t_r(2 + 0.5j, 50.0)
    assert abs(t) < 1e-10 and abs(r) == pytest.approx(abs((1 + 0.5j) / (3 + 0.5j)), rel=1e-10)
    with pytest.raises(ValueError):
        fresnel_t_r(2.0, 0.0)


def test_stack_reciprocity():
    # an asymmetric two-index stack transmits identically from either side
    k = GEOM.k0dz
    a, b = layer_r_t_from_index(3 + 0.2j, k), layer_r_t_from_index(1.5 + 0.01j, k)
    fwd = transfer_matrix_t_r([a] * 5 + [b] * 7, k)[0]
    bwd = transfer_matrix_t_r([b] * 7 + [a] * 5, k)[0]
    assert fwd == pytest.approx(bwd, rel=1e-12)


def test_fresnel_agreement_first_order():
    n, L = 5 + 0.1j, 200 * 0.02 / (2 * np.pi)
    errs, ks = [], [0.04, 0.02, 0.01, 0.005]
    for k in ks:
        dz = k / (2 * np.pi)
        M = int(round(L / dz))
        errs.append(fresnel_agreement(n, M, LatticeGeometry(dz / 2.5, dz)))
    assert errs[1] < 0.05
    slope = np.polyfit(np.log(ks), np.log(errs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.15)


def test_resonance_pole_error():
    with pytest.raises(ResonancePole):
        fresnel_t_r(0.0, 1.0)  # (1+n)^2 = e^{2inkL}(n-1)^2 at n = 0


def test_plasma_frequency_scales_with_density():
    a, b = LatticeGeometry.from_aspect(0.01), LatticeGeometry.from_aspect(0.02)
    assert plasma_frequency(a) / plasma_frequency(b) == pytest.approx(2 ** 1.5, rel=1e-12)


def test_oscillator_strength_density_independent():
    f1 = drude_lorentz_map(LatticeGeometry.from_aspect(0.005), bare_resonance=True).f_res
    f2 = drude_lorentz_map(LatticeGeometry.from_aspect(0.02), bare_resonance=True).f_res
    assert f1 == pytest.approx(f2, rel=1e-12)
    assert 0 < f1 <= 1


@pytest.mark.xfail(strict=True, reason="layered-index mapping gives f_res ~ 0.42 with hydrogen constants")
def test_oscillator_strength_reference():
    assert oscillator_strength() == pytest.approx(0.21, rel=0.1)


def test_drude_lorentz_agreement_strong_loss():
    g = LatticeGeometry.from_aspect(1 / 100)
    G = gamma0_collective(g.d)
    sigma = -2j * G
    p = drude_lorentz_map(g, sigma)
    deltas = omega0(g) + np.linspace(-10, 10, 201) * G
    n21 = refractive_index(deltas, g, sigma_qc=sigma, evanescent=False).n
    w_bare = p.omega_res - omega0(g) - sigma.real
    ndl = drude_lorentz_index(deltas, p, w_bare)
    assert np.max(np.abs(n21 - ndl) / np.abs(ndl)) < 0.1
    assert np.all(ndl.imag >= 0)
