import numpy as np
import pytest

from ultraindex import h2plus

# reference clamped-nuclei energies (Hartree) from high-precision literature tables
REF_R2 = {"1s_sigma_g": -1.1026342144949, "2p_sigma_u": -0.6675343922}


def test_ground_pair_equilibrium_reference():
    eg, eu = h2plus.ground_pair(2.0)
    assert eg == pytest.approx(REF_R2["1s_sigma_g"], abs=1e-10)
    assert eu == pytest.approx(REF_R2["2p_sigma_u"], abs=1e-9)


def test_united_atom_and_separated_limits():
    # large R: both ground states tend to -1/2 - 1/R (hydrogen plus proton charge)
    eg, eu = h2plus.ground_pair(20.0)
    assert eg == pytest.approx(-0.5 - 1 / 20, abs=1e-3)
    assert eg < eu
    eg2, eu2 = h2plus.excited_sigma_pair(40.0)
    # the n = 2 pair carries the linear Stark shift -3/R^2
    assert eg2 == pytest.approx(-0.125 - 1 / 40 - 3 / 40**2, abs=5e-4)
    assert eg2 < eu2


def test_s_splitting_matches_asymptotic_form():
    for R in (14.0, 18.0, 22.0):
        eg, eu = h2plus.ground_pair(R)
        assert (eu - eg) == pytest.approx(float(h2plus.s_splitting_asymptotic(R)), rel=2e-3)


def test_splitting_decays():
    ds = [h2plus.ground_pair(R)[1] - h2plus.ground_pair(R)[0] for R in (6.0, 8.0, 10.0)]
    assert ds[0] > ds[1] > ds[2] > 0


def test_angular_eigenvalues_spherical_limit():
    # p -> 0 gives the Legendre separation constants j(j+1)
    assert np.allclose(h2plus.eta_eigenvalues(1e-8)[:4], [0, 2, 6, 12], atol=1e-10)
