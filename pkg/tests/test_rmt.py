import json
import math

import numpy as np
import pytest
from scipy import stats

from freering import measures as ms
from freering.freeconv import free_convolve_m
from freering.rmt import (ModelSpec, haar_unitary, sample_model,
                          hermitize_spectrum, resolvent_trace, tau_block,
                          estimate_subordination, schwinger_dyson_residual,
                          block_structure_defect, delocalization_stats,
                          smallest_sv_probe, spectral_sample_to_csv,
                          estimate_to_record, quantile_points, sample_seeds)


def uniform_T(N):
    return quantile_points(0.5, 4.0, N)


# --- Haar unitaries --------------------------------------------------------

def test_haar_size_one_unit_modulus():
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert abs(abs(haar_unitary(1, rng)[0, 0]) - 1) <= 1e-14


def test_haar_is_unitary():
    U = haar_unitary(50, np.random.default_rng(2))
    assert np.max(np.abs(U.conj().T @ U - np.eye(50))) <= 1e-12


def test_haar_entry_law():
    # |U_11|^2 of an N x N Haar unitary is Beta(1, N - 1)
    rng = np.random.default_rng(3)
    N, n = 10, 4000
    x = np.array([abs(haar_unitary(N, rng)[0, 0])**2 for _ in range(n)])
    se = x.std(ddof=1) / math.sqrt(n)
    assert abs(x.mean() - 1 / N) <= 3 * se
    assert stats.kstest(x, stats.beta(1, N - 1).cdf).pvalue > 1e-3


def test_haar_phases_uniform():
    # rephased QR: the argument of a fixed entry is uniform on the circle
    rng = np.random.default_rng(4)
    ang = np.array([np.angle(haar_unitary(4, rng)[1, 2])
                    for _ in range(3000)])
    assert stats.kstest(ang, stats.uniform(-math.pi, 2 * math.pi).cdf
                        ).pvalue > 1e-3


# --- single model ----------------------------------------------------------

def test_identity_T_gives_unitary():
    spec = ModelSpec(30, np.ones(30), seed=5)
    smp = sample_model(spec)
    assert np.max(np.abs(np.abs(smp.eigenvalues) - 1)) <= 1e-10
    assert np.allclose(smp.singular_values, 1.0)


def test_determinant_modulus():
    T = uniform_T(40)
    smp = sample_model(ModelSpec(40, T, seed=6))
    assert np.sum(np.log(np.abs(smp.eigenvalues))) == pytest.approx(
        np.sum(np.log(T)), abs=1e-8)
    assert np.allclose(np.sort(smp.singular_values), np.sort(T))


def test_singular_values_sorted_and_seeded():
    spec = ModelSpec(20, uniform_T(20), seed=7)
    a, b = sample_model(spec), sample_model(spec)
    assert np.all(np.diff(a.singular_values) <= 0)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(1, np.ones(1))
    with pytest.raises(ValueError):
        ModelSpec(3, np.array([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        ModelSpec(3, np.ones(2))
    with pytest.raises(ValueError):
        ModelSpec(2, np.array([1.0, 20.0]))


# --- elementary functions --------------------------------------------------

def test_hermitize():
    assert list(hermitize_spectrum([1, 2])) == [-2, -1, 1, 2]


@pytest.mark.parametrize('s,z,want', [
    (np.ones(4), 1j, 0.5j),
    (np.zeros(3), 0.3 + 2j, -1 / (0.3 + 2j)),
    ([1.0, 2.0], 1j, 0.35j),
])
def test_resolvent_trace_examples(s, z, want):
    assert resolvent_trace(s, z) == pytest.approx(want, abs=1e-14)


def test_resolvent_trace_is_symmetrized_transform():
    s = uniform_T(25)
    z = 0.7 + 0.2j
    m = ms.stieltjes(ms.empirical_measure(hermitize_spectrum(s)), z)
    assert resolvent_trace(s, z) == pytest.approx(m, abs=1e-12)


def test_tau_block():
    M = np.diag([1.0, 3.0, 5.0, 7.0])
    assert tau_block(M) == (2.0, 6.0)
    with pytest.raises(ValueError):
        tau_block(np.eye(3))


# --- sum model -------------------------------------------------------------

def test_zero_B_is_exact():
    N = 30
    spec = ModelSpec(N, uniform_T(N), np.zeros(N), seed=8)
    z = 0.5 + 0.5j
    assert block_structure_defect(spec, z, 3) == 0.0
    sd = schwinger_dyson_residual(spec, z, 3)
    assert sd.residual == 0.0
    est = estimate_subordination(spec, z, 3)
    assert est.S_B_emp == 0.0
    assert est.resolvent_residual_A <= 1e-12


def test_block_structure_defect_small():
    N = 40
    spec = ModelSpec(N, uniform_T(N), np.ones(N), seed=9)
    assert block_structure_defect(spec, 1j, 4) <= 0.2


def test_identity_plus_haar_singular_values():
    # X = I + W with W Haar: |1 + e^{i theta}| has CDF 1 - (2/pi) acos(s/2)
    N = 400
    spec = ModelSpec(N, np.ones(N), np.ones(N), seed=10)
    s = sample_model(spec).singular_values
    cdf = lambda x: 1 - 2 / math.pi * np.arccos(np.clip(x / 2, -1, 1))
    assert stats.kstest(s, cdf).statistic <= 0.02


def test_subordination_matches_free_convolution():
    N = 200
    T = uniform_T(N)
    B = quantile_points(0.0, 1.0, N)
    spec = ModelSpec(N, T, B, seed=11)
    z = 0.6 + 0.8j
    est = estimate_subordination(spec, z, 6)
    want = free_convolve_m(ms.symmetrize(ms.empirical_measure(T)),
                           ms.symmetrize(ms.empirical_measure(B)), z)
    assert abs(est.m_H_emp - want) <= 0.01
    assert est.consistency_defect <= 0.01
    assert est.im_guard_ok
    json.dumps(estimate_to_record(est))


def test_estimates_independent_of_threads():
    N = 60
    spec = ModelSpec(N, uniform_T(N), np.ones(N), seed=12)
    a = estimate_subordination(spec, 1j, 6, threads=1)
    b = estimate_subordination(spec, 1j, 6, threads=4)
    assert a == b
    c = schwinger_dyson_residual(spec, 1j, 4, threads=1)
    d = schwinger_dyson_residual(spec, 1j, 4, threads=3)
    assert c == d


def test_estimator_guards():
    spec = ModelSpec(5, np.ones(5), seed=0)
    with pytest.raises(ValueError):
        estimate_subordination(spec, 1j, 4)
    with pytest.raises(ValueError):
        estimate_subordination(ModelSpec(5, np.ones(5), np.ones(5)), 1j, 1)


def test_sample_seeds_distinct():
    seeds = sample_seeds(42, 5)
    states = {tuple(s.generate_state(2)) for s in seeds}
    assert len(states) == 5


# --- vectors and probes ----------------------------------------------------

def test_delocalization():
    N = 200
    spec = ModelSpec(N, np.ones(N), uniform_T(N), seed=13)
    smp = sample_model(spec, vectors=True)
    u, v, count = delocalization_stats(smp, (0.5, 3.0))
    assert count > 0
    assert 1 / N <= u <= 20 * math.log(N) / N
    assert 1 / N <= v <= 20 * math.log(N) / N
    assert delocalization_stats(smp, (50, 60)) == (-1.0, -1.0, 0)


def test_delocalization_needs_vectors():
    smp = sample_model(ModelSpec(5, np.ones(5)))
    with pytest.raises(ValueError):
        delocalization_stats(smp, (0, 2))


def test_smallest_sv_probe_identity():
    spec = ModelSpec(20, np.ones(20), seed=14)
    out = smallest_sv_probe(spec, 0.0, 5)
    assert np.allclose(out['values'], 1.0)
    assert out['flagged'] == []


def test_smallest_sv_probe_far_point():
    spec = ModelSpec(20, uniform_T(20), seed=15)
    out = smallest_sv_probe(spec, 6.0, 5)
    assert out['quantiles'][0.0] >= 6.0 - 4.0 - 1e-9
    assert list(out['quantiles']) == [0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 1.0]


def test_spectral_csv(tmp_path):
    smp = sample_model(ModelSpec(4, np.ones(4), seed=16))
    text = spectral_sample_to_csv(smp, tmp_path / 's.csv')
    lines = text.splitlines()
    assert lines[0] == 'index,re_lambda,im_lambda,s'
    assert len(lines) == 5
    smp2 = sample_model(ModelSpec(4, np.ones(4), np.ones(4), seed=16))
    assert spectral_sample_to_csv(smp2).splitlines()[1].split(',')[1] == ''
