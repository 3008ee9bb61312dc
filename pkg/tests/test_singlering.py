import math

import numpy as np
import pytest
from scipy import integrate, optimize

from freering import measures as ms
from freering.singlering import (annulus_bounds, nu_infinity_m, log_potential,
                                 log_potential_array, ring_density,
                                 ring_density_array, ring_law, ring_ball_mass,
                                 ring_cumulative_mass, ring_law_to_csv,
                                 OutOfSupportError, GridTooCoarseError)

TWO_ATOMS = ms.atomic([1.0, 3.0], [0.5, 0.5])


def radial_cdf_oracle(r):
    """mu(B(0, r)) for nu = (delta_1 + delta_3)/2 from the S-transform
    relation S_{nu^2}(t - 1) = r^-2, solved for t by bracketing."""
    def g(t):
        u = (t - 1) / (t * r * r)
        psi = 0.5 * (u / (1 - u) + 9 * u / (1 - 9 * u))
        return psi - (t - 1)
    return optimize.brentq(g, 1e-12, 1 - 1e-12, xtol=1e-15)


@pytest.fixture(scope='module')
def two_atom_ring():
    return ring_law(TWO_ATOMS, n_grid=201)


# --- annulus bounds --------------------------------------------------------

def test_bounds_delta_one():
    assert annulus_bounds(ms.delta(1.0)) == pytest.approx((1.0, 1.0))


def test_bounds_two_atoms():
    a, b = annulus_bounds(TWO_ATOMS)
    assert a == pytest.approx(1.341641, abs=1e-6)
    assert b == pytest.approx(2.236068, abs=1e-6)


def test_bounds_touching_zero():
    a, b = annulus_bounds(ms.uniform(0.0, 1.0))
    assert a == 0.0 and b == pytest.approx(1 / math.sqrt(3))


# --- nu_infinity -----------------------------------------------------------

def test_nu_infinity_at_zero_radius_is_symmetrized():
    w = 0.3 + 1j
    assert nu_infinity_m(TWO_ATOMS, 0.0, w) == pytest.approx(
        ms.stieltjes(ms.symmetrize(TWO_ATOMS), w), abs=1e-10)


def test_nu_infinity_delta_pair():
    # delta_1 symmetrized is Bernoulli; Bernoulli box Bernoulli at i
    assert nu_infinity_m(ms.delta(1.0), 1.0, 1j) == pytest.approx(
        1j / math.sqrt(5), abs=1e-10)


def test_nu_infinity_rejects_negative_radius():
    with pytest.raises(ValueError):
        nu_infinity_m(ms.delta(1.0), -1.0, 1j)


# --- log potential ---------------------------------------------------------

def test_log_potential_delta_one_at_unit_radius():
    # arcsine law on [-2, 2] has zero logarithmic energy at the origin
    L, err = log_potential(ms.delta(1.0), 1.0)
    assert L == pytest.approx(0.0, abs=1e-8)
    assert err < 1e-8


def test_log_potential_delta_one_at_origin():
    L, _ = log_potential(ms.delta(1.0), 0.0)
    assert L == pytest.approx(0.0, abs=1e-10)


def test_log_potential_far_radius():
    L, _ = log_potential(ms.delta(1.0), 100.0)
    assert abs(L - math.log(100.0)) <= 1e-2


def test_log_potential_cutoff_method_agrees():
    L1, _ = log_potential(TWO_ATOMS, 1.8)
    L2, err = log_potential(TWO_ATOMS, 1.8, t_cut=1e-3, method='cutoff')
    assert abs(L1 - L2) <= max(err, 1e-3)


def test_log_potential_threads_bitwise():
    r = np.linspace(1.4, 2.2, 150)
    a = log_potential_array(TWO_ATOMS, r, threads=1)
    b = log_potential_array(TWO_ATOMS, r, threads=4)
    assert np.array_equal(a, b)


def test_log_potential_validation():
    with pytest.raises(ValueError):
        log_potential(TWO_ATOMS, 1.0, method='other')
    with pytest.raises(ValueError):
        log_potential(TWO_ATOMS, 1.0, t_cut=0.5, method='cutoff')


# --- density ---------------------------------------------------------------

def test_cumulative_mass_matches_oracle():
    r = np.array([1.5, 1.8, 2.0, 2.2])
    got = ring_cumulative_mass(TWO_ATOMS, r)
    want = [radial_cdf_oracle(v) for v in r]
    assert np.max(np.abs(got - want)) <= 1e-5


def test_density_matches_oracle_derivative():
    r, h = 1.9, 1e-4
    dF = (radial_cdf_oracle(r + h) - radial_cdf_oracle(r - h)) / (2 * h)
    want = dF / (2 * math.pi * r)
    assert ring_density(TWO_ATOMS, r) == pytest.approx(want, rel=1e-4)


def test_density_positive_inside():
    a, b = annulus_bounds(TWO_ATOMS)
    r = np.linspace(a + 0.05, b - 0.05, 25)
    assert np.all(ring_density_array(TWO_ATOMS, r) > 0)


def test_density_refuses_outside():
    with pytest.raises(OutOfSupportError):
        ring_density(TWO_ATOMS, 1.0)
    with pytest.raises(OutOfSupportError):
        ring_density(TWO_ATOMS, 2.3)


@pytest.mark.parametrize('r', [0.8, 1.2, 2.5, 3.0])
def test_density_vanishes_outside(r):
    assert abs(ring_density(TWO_ATOMS, r, allow_outside=True)) <= 1e-3


def test_ring_law_normalization(two_atom_ring):
    assert two_atom_ring.normalization_defect <= 0.02
    assert np.all(two_atom_ring.density > 0)


def test_ring_law_threads_bitwise():
    a = ring_law(TWO_ATOMS, n_grid=41, threads=1)
    b = ring_law(TWO_ATOMS, n_grid=41, threads=3)
    assert np.array_equal(a.density, b.density)
    assert np.array_equal(a.log_potential, b.log_potential)


# --- ball masses -----------------------------------------------------------

def test_ball_covering_annulus(two_atom_ring):
    b = two_atom_ring.b
    assert ring_ball_mass(two_atom_ring, 0.0, b + 1) == pytest.approx(
        1.0, abs=0.02)


def test_ball_disjoint(two_atom_ring):
    assert ring_ball_mass(two_atom_ring, 0.0, 0.5) == 0.0
    assert ring_ball_mass(two_atom_ring, 5.0, 0.5) == 0.0


def test_ball_centred_matches_oracle(two_atom_ring):
    got = ring_ball_mass(two_atom_ring, 0.0, 2.0)
    assert got == pytest.approx(radial_cdf_oracle(2.0), rel=0.02)


def test_ball_off_centre_matches_oracle(two_atom_ring):
    d, R = 1.9, 0.3

    def integrand(r):
        h = 1e-5
        dF = (radial_cdf_oracle(r + h) - radial_cdf_oracle(r - h)) / (2 * h)
        c = (r * r + d * d - R * R) / (2 * r * d)
        return dF * 2 * math.acos(max(-1.0, min(1.0, c))) / (2 * math.pi)

    want, _ = integrate.quad(integrand, d - R, d + R, epsabs=1e-10)
    got = ring_ball_mass(two_atom_ring, d, R)
    assert got == pytest.approx(want, rel=0.02)


def test_ball_rotation_invariant(two_atom_ring):
    m1 = ring_ball_mass(two_atom_ring, 1.9, 0.3)
    m2 = ring_ball_mass(two_atom_ring, 1.9 * np.exp(2.1j), 0.3)
    assert m1 == m2


def test_scaling_by_two():
    base = ring_law(TWO_ATOMS, n_grid=201)
    big = ring_law(ms.atomic([2.0, 6.0], [0.5, 0.5]), n_grid=201,
                   margin=0.04, h=2e-2)
    m1 = ring_ball_mass(base, 1.9, 0.3)
    m2 = ring_ball_mass(big, 3.8, 0.6)
    assert m2 == pytest.approx(m1, rel=0.02)


def test_grid_too_coarse():
    coarse = ring_law(TWO_ATOMS, n_grid=5)
    with pytest.raises(GridTooCoarseError):
        ring_ball_mass(coarse, 1.9, 0.3)


# --- serialization ---------------------------------------------------------

def test_csv_layout(tmp_path):
    ring = ring_law(TWO_ATOMS, n_grid=7)
    text = ring_law_to_csv(ring, tmp_path / 'ring.csv')
    lines = text.splitlines()
    assert lines[0] == 'r,log_potential,density'
    assert len(lines) == 8
    assert (tmp_path / 'ring.csv').read_text() == text
