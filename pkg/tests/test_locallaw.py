import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from freering import measures as ms
from freering.freeconv import DegeneratePointError
from freering.rmt import ModelSpec, sample_model
from freering.singlering import ring_law, ring_ball_mass
from freering.locallaw import (smoothstep, smooth_bump, window_estimate,
                               hs_integrate, cutoff_logs, LocalLawReport,
                               append_reports_csv, REPORT_COLUMNS, eps_scale,
                               t_scale, scale_constraint, radial_bump,
                               local_srt_statistic, _srt_theoretical,
                               sv_window, local_sv_statistic, hadamard_check)

SC = ms.semicircle(2.0)
TWO_ATOMS = ms.atomic([1.0, 3.0], [0.5, 0.5])


def sc_m(z):
    return ms.stieltjes(SC, z)


def sc_density(x):
    return math.sqrt(max(4 - x * x, 0.0)) / (2 * math.pi)


@pytest.fixture(scope='module')
def ring():
    return ring_law(TWO_ATOMS, n_grid=201)


# --- test functions --------------------------------------------------------

def test_smoothstep_order_three_closed_form():
    x = np.linspace(0, 1, 11)
    want = 35 * x**4 - 84 * x**5 + 70 * x**6 - 20 * x**7
    assert np.max(np.abs(smoothstep(3)(x) - want)) <= 1e-12


@pytest.mark.parametrize('order', [1, 2, 4, 6])
def test_smoothstep_flat_ends(order):
    S = smoothstep(order)
    # rounding scales with the monomial coefficients
    tol = 1e-14 * np.sum(np.abs(S.coef)) * 10
    assert S(0) == pytest.approx(0, abs=tol)
    assert S(1) == pytest.approx(1, abs=tol)
    assert S(0.5) == pytest.approx(0.5, abs=tol)
    for k in range(1, order + 1):
        D = S.deriv(k)
        dtol = 1e-13 * np.sum(np.abs(D.coef))
        assert D(0.0) == pytest.approx(0, abs=dtol)
        assert D(1.0) == pytest.approx(0, abs=dtol)


def test_smoothstep_rejects_order_zero():
    with pytest.raises(ValueError):
        smoothstep(0)


def test_bump_plateau_and_support():
    phi = smooth_bump(-1.0, 2.0, p=3, rise=0.5, fall=1.0)
    assert phi(np.array([-0.5, 0.0, 1.0])).tolist() == [1.0, 1.0, 1.0]
    assert phi(np.array([-2.0, -1.0, 2.0, 3.0])).tolist() == [0, 0, 0, 0]
    assert phi.breakpoints == (-1.0, -0.5, 1.0, 2.0)
    assert phi.length == 3.0


def test_bump_derivative_order_limit():
    phi = smooth_bump(0.0, 1.0, p=2)
    phi(0.3, 3)
    with pytest.raises(ValueError):
        phi(0.3, 4)


def test_bump_derivative_by_finite_difference():
    phi = smooth_bump(0.0, 1.0, p=3, rise=0.4, fall=0.3)
    h = 1e-6
    for x in (0.1, 0.35, 0.8):
        for k in range(4):
            fd = (phi(x + h, k) - phi(x - h, k)) / (2 * h)
            assert phi(x, k + 1) == pytest.approx(fd, rel=1e-5, abs=1e-5)


@settings(max_examples=40, deadline=None)
@given(lo=st.floats(-3, 3), width=st.floats(0.1, 4), f1=st.floats(0.05, 0.5),
       f2=st.floats(0.05, 0.5), p=st.integers(1, 5))
def test_bump_sup_norms_dominate_grid(lo, width, f1, f2, p):
    phi = smooth_bump(lo, lo + width, p, rise=f1 * width, fall=f2 * width)
    grid = phi.grid_norms(4001)
    assert np.all(grid <= np.array(phi.sup_norms) * (1 + 1e-9))


@pytest.mark.parametrize('p', [1, 3, 5])
def test_bump_vanishes_to_order_at_endpoints(p):
    # Taylor: |phi^(k)(lo + d)| <= ||phi^(p+1)|| d^(p+1-k) / (p+1-k)!
    phi = smooth_bump(0.0, 1.0, p)
    d = 1e-2
    vals = phi.endpoint_values(d)
    for k in range(p + 1):
        bound = phi.sup_norms[p + 1] * d**(p + 1 - k) / math.factorial(
            p + 1 - k)
        assert np.all(vals[k] <= bound * (1 + 1e-9))


# --- window estimator ------------------------------------------------------

def test_window_semicircle_centre():
    est, terms = window_estimate(sc_m, sc_m, 0.0, 1e-3, 10)
    assert est == pytest.approx(1 / math.pi, abs=1e-3)
    assert all(math.isfinite(t) and t >= 0 for t in terms)
    assert terms[0] == pytest.approx(1.0, abs=0.01)


def test_window_outside_support_is_small():
    est, _ = window_estimate(sc_m, sc_m, 3.0, 1e-3, 10)
    assert abs(est) <= 1e-3


def test_window_validation():
    with pytest.raises(ValueError):
        window_estimate(sc_m, sc_m, 0.0, 0.0, 10)
    with pytest.raises(ValueError):
        window_estimate(sc_m, sc_m, 0.0, 0.1, 1)


# --- Helffer-Sjostrand -----------------------------------------------------

@pytest.mark.parametrize('lo,hi', [(-1.0, 1.0), (0.5, 3.0), (-2.5, -1.2)])
def test_hs_semicircle_against_quadrature(lo, hi):
    phi = smooth_bump(lo, hi, p=3)
    want, _ = integrate.quad(lambda x: phi(x) * sc_density(x), lo, hi,
                             points=list(phi.breakpoints) + [-2, 2],
                             epsabs=1e-12, limit=200)
    got, err = hs_integrate(phi, sc_m)
    assert abs(got - want) <= max(err, 1e-6)
    assert abs(got - want) <= 1e-3


def test_hs_point_mass():
    phi = smooth_bump(-1.0, 1.0, p=3)
    d = ms.delta(0.3)
    got, err = hs_integrate(phi, lambda z: ms.stieltjes(d, z),
                            eta_min=1e-3)
    assert abs(got - float(phi(0.3))) <= err


def test_hs_linearity():
    phi = smooth_bump(-1.0, 1.5, p=3)
    u = ms.uniform(0.5, 4.0)
    f1 = lambda z: ms.stieltjes(SC, z)
    f2 = lambda z: ms.stieltjes(u, z)
    a, _ = hs_integrate(phi, f1)
    b, _ = hs_integrate(phi, f2)
    c, _ = hs_integrate(phi, lambda z: 2 * f1(z) - 3 * f2(z))
    assert abs(c - (2 * a - 3 * b)) <= 1e-10


def test_hs_order_checks():
    phi = smooth_bump(-1.0, 1.0, p=2)
    with pytest.raises(ValueError):
        hs_integrate(phi, sc_m, p=3)
    with pytest.raises(ValueError):
        hs_integrate(phi, sc_m, eta_min=0.6)


# --- logarithm cutoffs -----------------------------------------------------

def test_cutoff_split_sums_to_log():
    cl = cutoff_logs(0.1, 2.0)
    x = np.geomspace(1e-3, 6.5, 200)
    assert np.max(np.abs(cl.log_geq(x) + cl.log_lt(x) - np.log(x))) <= 1e-13
    assert np.all(cl.log_geq(np.array([0.01, 0.04])) == 0)
    assert np.all(cl.log_lt(np.array([0.2, 1.0, 5.0])) == 0)


@pytest.mark.parametrize('p', [1, 2, 3, 5])
def test_cutoff_first_derivative_constant(p):
    assert cutoff_logs(0.1, 2.0, p).derivative_constants[1] <= 2 * (p + 1)


def test_cutoff_constants_bound_derivatives():
    t = 0.05
    cl = cutoff_logs(t, 2.0, p=3)
    x = np.linspace(t / 2, t, 5001)
    for l in range(1, 5):
        sup = np.max(np.abs(cl.phi(x, l)))
        assert sup <= cl.derivative_constants[l] * t**-l * (1 + 1e-9)


def test_cutoff_log_geq_derivative():
    cl = cutoff_logs(0.2, 2.0)
    h = 1e-6
    for x in (0.12, 0.17, 1.0):
        fd = (cl.log_geq(x + h) - cl.log_geq(x - h)) / (2 * h)
        assert cl.log_geq(x, 1) == pytest.approx(fd, rel=1e-5)


def test_cutoff_validation():
    with pytest.raises(ValueError):
        cutoff_logs(3.0, 2.0)
    with pytest.raises(ValueError):
        cutoff_logs(0.1, 2.0).log_lt(np.array([0.0]))


# --- reports and scales ----------------------------------------------------

def test_report_diff_exact():
    r = LocalLawReport.build('x', 10, 0.1, 0.75, 0.5, 0.3, [1, 2])
    assert r.diff == 0.25 and r.passed
    assert LocalLawReport.build('x', 10, 0.1, 0.9, 0.5, 0.3, ()).passed \
        is False


def test_report_csv_append(tmp_path):
    path = tmp_path / 'r.csv'
    r = LocalLawReport.build('local_sv', 100, 0.1, 1.0, 1.0, 0.1, [3])
    append_reports_csv(path, [r])
    append_reports_csv(path, [r, r])
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert len(rows) == 4
    assert rows[1][-1] == 'true' and rows[1][-2] == '3'


def test_scales():
    assert eps_scale(1000) == pytest.approx(math.log(1000)**-0.1)
    assert t_scale(1000) == pytest.approx(math.log(1000)**-0.25)
    assert scale_constraint(0.1, 0.05, 3)
    assert not scale_constraint(0.2, 0.05, 3)


def test_sv_window_empty_at_thousand():
    lo, hi = sv_window(1000)
    assert lo > hi
    lo, hi = sv_window(10**12)
    assert lo < hi


# --- local Single Ring statistic -------------------------------------------

def test_radial_bump_profile():
    f = radial_bump(ramp=0.5, scale=2.0)
    assert f(np.array([0.0, 1.0, 0.5j])).tolist() == [1.0, 1.0, 1.0]
    assert f(np.array([2.0, 3.0])).tolist() == [0.0, 0.0]
    assert f.radius == 2.0
    with pytest.raises(ValueError):
        radial_bump(ramp=0.0)


def test_srt_scaling_identity(ring):
    # eps^-2 f(w/eps) with f -> f(./2) and eps -> 2 eps scales by 1/4
    z0, eps = 1.9, 0.1
    a = _srt_theoretical(ring, z0, eps, radial_bump())
    b = _srt_theoretical(ring, z0, 2 * eps, radial_bump(scale=0.5))
    assert b == pytest.approx(a / 4, rel=1e-10)


def test_srt_theoretical_matches_local_density(ring):
    # small eps: int F dmu ~ rho(|z0|) int f dA
    f = radial_bump(ramp=0.5)
    area = 2 * math.pi * integrate.quad(
        lambda s: float(f.profile(s)) * s, 0, 1, points=[0.5])[0]
    z0, eps = 1.9, 0.01
    want = float(ring.density_interp(abs(z0))) * area
    assert _srt_theoretical(ring, z0, eps, f) == pytest.approx(want,
                                                               rel=0.02)


def test_srt_indicator_like_matches_ball_mass(ring):
    f = radial_bump(ramp=1e-3)
    z0, eps = 1.9 * np.exp(0.7j), 0.3
    mass = _srt_theoretical(ring, z0, eps, f, n_r=400, n_theta=400) * eps**2
    assert mass == pytest.approx(ring_ball_mass(ring, z0, eps), rel=0.02)


def test_srt_statistic_on_sample(ring):
    N = 1000
    T = np.where(np.arange(N) < N // 2, 1.0, 3.0)
    smp = sample_model(ModelSpec(N, T, seed=21))
    rep = local_srt_statistic(smp, ring, 1.9, 0.3)
    assert rep.passed, rep
    assert rep.seeds == (21,)


def test_srt_outside_annulus(ring):
    smp = sample_model(ModelSpec(50, np.full(50, 2.0), seed=22))
    with pytest.raises(ValueError):
        local_srt_statistic(smp, ring, 0.5, 0.1)
    rep = local_srt_statistic(smp, ring, 0.5, 0.1, diagnostic=True)
    assert rep.theoretical == 0.0 and rep.empirical == 0.0 and rep.passed


# --- local singular-value law ----------------------------------------------

def test_sv_statistic_identity_plus_haar():
    N = 600
    s = sample_model(ModelSpec(N, np.ones(N), np.ones(N), seed=23)
                     ).singular_values
    one = ms.delta(1.0)
    rep = local_sv_statistic(s, one, one, 1.0, 0.1, seeds=[23])
    assert rep.theoretical == pytest.approx(2 / (math.pi * math.sqrt(3)),
                                            rel=1e-3)
    assert rep.passed
    assert rep.note.startswith('eta outside')


def test_sv_statistic_far_outside():
    s = np.linspace(0.5, 2.0, 100)
    rep = local_sv_statistic(s, ms.delta(1.0), ms.delta(1.0), 10.0, 0.1)
    assert rep.theoretical <= 1e-3 and rep.empirical == 0.0


def test_sv_statistic_degenerate_refused():
    with pytest.raises(DegeneratePointError):
        local_sv_statistic([0.0, 0.0], ms.delta(0.0), ms.delta(0.0),
                           1e4, 1.0)


# --- three circles ---------------------------------------------------------

def test_hadamard_small_measure_holds():
    tiny = 1e-6
    m_fn = lambda z: tiny / (0.0 - z)
    res = hadamard_check(m_fn, 1.0, None, tiny)
    assert res.hypothesis_ok and res.holds
    assert res.inner_sup <= res.inner_bound
    assert 0 < res.r < 1


def test_hadamard_refuses_large_delta():
    res = hadamard_check(sc_m, 1.0, 0.999, 1.0)
    assert res.hypothesis_ok
    assert res.inner_bound is None and res.holds is None


def test_hadamard_hypothesis_violation():
    res = hadamard_check(sc_m, 1.0, 1e-9, 1.0)
    assert not res.hypothesis_ok and res.holds is None


def test_hadamard_zero_function():
    res = hadamard_check(lambda z: 0 * z, 1.0, 0.0, 0.0)
    assert res.holds and res.inner_bound == 0.0
