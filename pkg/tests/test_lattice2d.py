import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultraindex.lattice2d import (LatticeGeometry, collective_gamma, collective_omega, gamma0_collective,
                                  lattice_sum_spectral, layer_r_t, omega0, transmission_phase,
                                  windowed_omega_sequence)


def test_geometry_constructors():
    g = LatticeGeometry.from_aspect(0.01, 2.5)
    assert g.aspect == pytest.approx(2.5, rel=1e-12)
    assert g.k0d == pytest.approx(2 * np.pi * 0.01)
    h = LatticeGeometry.from_a0(15.0)
    assert h.d == pytest.approx(15 * 52.9177e-12 / 121.567e-9)


@pytest.mark.parametrize("d, dz", [(0.0, 0.1), (1.0, 0.1), (0.1, -1.0)])
def test_geometry_validation(d, dz):
    with pytest.raises(ValueError):
        LatticeGeometry(d, dz)


def test_gamma0_lambda_over_10():
    assert gamma0_collective(0.1) == pytest.approx(300 / (4 * np.pi), rel=1e-15)
    assert collective_gamma(0.0, 0.0, LatticeGeometry(0.1, 0.1)) == pytest.approx(23.873241463784, rel=1e-12)


def test_gamma_subradiant_outside_cone():
    g = LatticeGeometry(0.1, 0.1)
    assert collective_gamma(1.5, 0.0, g) == 0.0
    assert collective_gamma(0.0, 1.2, g) == 0.0
    with pytest.raises(ValueError):
        collective_gamma(1.0, 0.0, g)


def test_gamma_formula_inside_cone():
    g = LatticeGeometry(0.05, 0.05)
    kx, ky = 0.3, 0.4
    expect = gamma0_collective(0.05) * (1 - kx * kx) / np.sqrt(1 - kx * kx - ky * ky)
    assert collective_gamma(kx, ky, g) == pytest.approx(expect, rel=1e-15)


def test_gamma_from_lattice_sum():
    # Gamma(0) = Gamma0 (1 + 2 Im sum_{R != 0} G(R)) from an independent route
    for d in (1 / 200, 1 / 50, 1 / 20):
        s = lattice_sum_spectral(0, 0, LatticeGeometry(d, d))
        assert 1 + 2 * s.imag == pytest.approx(gamma0_collective(d), rel=1e-11)


def test_omega0_frozen_values():
    # frozen from the spectral sum; the windowed sum is checked independently below
    assert omega0(0.1) == pytest.approx(omega0(LatticeGeometry(0.1, 0.25)))
    w = omega0(0.1)
    seq = windowed_omega_sequence(LatticeGeometry(0.1, 0.1), [20.0, 40.0, 80.0])
    assert abs(seq[-1] - w) < abs(seq[0] - w) + 1e-12
    assert abs(seq[-1] - w) < 2e-3 * abs(w)


def test_omega_near_field_scaling():
    # omega(0) ~ (lambda0/d)^3 for small d
    w1, w2 = omega0(1 / 200), omega0(1 / 100)
    assert w1 / w2 == pytest.approx(8.0, rel=0.02)


def test_omega_shell_doubling_converged():
    g = LatticeGeometry(0.05, 0.05)
    a = lattice_sum_spectral(0, 0, g, shells=8).real
    b = lattice_sum_spectral(0, 0, g, shells=16).real
    assert abs(a - b) <= 1e-8 * abs(b)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_omega_inversion_symmetry(kx, ky):
    if abs(np.hypot(kx, ky) - 1) < 1e-3:
        return
    g = LatticeGeometry(0.1, 0.1)
    assert collective_omega(kx, ky, g) == pytest.approx(collective_omega(-kx, -ky, g), rel=1e-6, abs=1e-8)


def test_perfect_reflection_on_resonance():
    g = LatticeGeometry.from_aspect(0.02)
    r, t = layer_r_t(omega0(g), g)
    assert r == -1 and t == 0
    assert np.isnan(transmission_phase(omega0(g), g))


@given(st.floats(-1e3, 1e3))
def test_lossless_unitarity(x):
    g = LatticeGeometry.from_aspect(0.02)
    r, t = layer_r_t(omega0(g) + x * gamma0_collective(g.d), g)
    assert abs(abs(r) ** 2 + abs(t) ** 2 - 1) < 1e-12


@given(st.floats(-20, 20), st.floats(0.01, 100))
def test_lossy_layer_absorbs(x, loss):
    g = LatticeGeometry.from_aspect(0.02)
    G = gamma0_collective(g.d)
    r, t = layer_r_t(omega0(g) + x * G, g, -1j * loss * G)
    assert abs(r) ** 2 + abs(t) ** 2 < 1


def test_strong_loss_transparency():
    g = LatticeGeometry.from_aspect(0.02)
    G = gamma0_collective(g.d)
    r, t = layer_r_t(omega0(g), g, -50j * G)
    assert abs(r) == pytest.approx(G / (2 * 50 * G), rel=0.02)
    assert abs(t) == pytest.approx(1, abs=0.02)


def test_transmission_phase_half_width():
    g = LatticeGeometry.from_aspect(0.02)
    G = gamma0_collective(g.d)
    for sgn in (-1, 1):
        _, t = layer_r_t(omega0(g) + sgn * G / 2, g)
        assert abs(t) ** 2 == pytest.approx(0.5, rel=1e-12)
        assert transmission_phase(omega0(g) + sgn * G / 2, g) == pytest.approx(-sgn * np.pi / 4, rel=1e-12)
    far = transmission_phase(omega0(g) + np.array([-1e6, 1e6]) * G, g)
    assert np.all(np.abs(far) < 1e-5)
    ph = transmission_phase(omega0(g) + np.linspace(-50, 50, 2000) * G, g)
    assert np.nanmax(np.abs(ph)) < np.pi / 2
