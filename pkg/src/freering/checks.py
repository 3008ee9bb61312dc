"""
Acceptance checks shared by ``freering verify`` and the test suite.

Each check returns a :class:`CriterionResult`.  Thresholds come from
:data:`DEFAULT_TOLERANCES` and may be overridden per run.
"""

from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import measures as ms
from .freeconv import solve_subordination_array, measure_transform, \
    bernoulli_transform
from .singlering import (annulus_bounds, log_potential, ring_law,
                         ring_law_to_csv)
from .rmt import (ModelSpec, sample_model, sample_seeds, quantile_points,
                  estimate_subordination, schwinger_dyson_residual,
                  delocalization_stats)
from .locallaw import (window_estimate, hs_integrate, smooth_bump, radial_bump,
                       local_srt_statistic, local_sv_statistic,
                       hadamard_check)

__all__ = ['CriterionResult', 'CheckContext', 'CRITERIA', 'BUNDLES',
           'DEFAULT_TOLERANCES', 'run_criterion', 'wigner_eigenvalues']

DEFAULT_TOLERANCES = {
    'freeconv': 1e-8,
    'freeconv_seconds': 5.0,
    'translation': 1e-10,
    'annulus': 1e-6,
    'log_potential': 1e-3,
    'normalization': 0.02,
    'negativity': 1e-6,
    'ring_seconds': 120.0,
    'figure_fraction': 0.98,
    'figure_seconds': 60.0,
    'residual_ratio': 0.6,
    'defect': 1e-10,
    'sd_ratio': 0.7,
    'local_sv': 0.10,
    'hs_semicircle': 1e-3,
    'hs_linearity': 1e-10,
    'window': 0.05,
    'srt': 0.25,
    'delocalization': 0.05,
}


@dataclass
class CheckContext:
    """Run-wide settings for the checks."""

    seed: int = 0
    threads: int = 1
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: str | None = None

    def tol(self, key):
        return float(self.tolerances[key])

    def child_seed(self, k: int) -> int:
        """Deterministic per-criterion seed derived from ``seed``."""
        ss = np.random.SeedSequence([int(self.seed), int(k)])
        return int(ss.generate_state(1)[0])


@dataclass
class CriterionResult:
    number: int | str
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ''
    seconds: float = 0.0
    artifacts: list = field(default_factory=list)

    def line(self) -> str:
        tag = 'PASS' if self.passed else 'FAIL'
        return (f"criterion {self.number} {self.name}: {tag} "
                f"value={self.value:.6g} threshold={self.threshold:.6g}"
                + (f" ({self.detail})" if self.detail else ''))


def _grid_z():
    E = np.arange(-3.0, 3.0 + 1e-9, 0.5)
    eta = np.array([0.1, 0.5, 1.0])
    return (E[:, None] + 1j * eta[None, :]).ravel()


def _sqrt_branch(z, c):
    # sqrt(z^2 - c^2) with the branch ~ z at infinity
    return np.sqrt(z - c) * np.sqrt(z + c)


def c01(ctx):
    t0 = time.perf_counter()
    z = _grid_z()
    st = solve_subordination_array(bernoulli_transform(1.0),
                                   bernoulli_transform(1.0), z)
    e1 = np.max(np.abs(st.m + 1.0 / _sqrt_branch(z, 2.0)))
    sc = ms.semicircle(2.0)
    f = measure_transform(sc)
    st2 = solve_subordination_array(f, f, z)
    oracle = (-z + _sqrt_branch(z, math.sqrt(8.0))) / 4.0
    e2 = np.max(np.abs(st2.m - oracle))
    dt = time.perf_counter() - t0
    err = float(max(e1, e2))
    ok = err <= ctx.tol('freeconv') and dt < ctx.tol('freeconv_seconds') \
        and not np.any(st.status) and not np.any(st2.status)
    return CriterionResult(1, 'free-convolution-oracle', ok, err,
                           ctx.tol('freeconv'),
                           f"bernoulli {e1:.2e}, semicircle {e2:.2e}, "
                           f"{dt:.2f}s")


def c02(ctx):
    sc = ms.semicircle(2.0)
    c = 0.7
    E = np.linspace(-3, 3, 10)
    z = np.concatenate([E + 0.1j, E + 1.0j])
    st = solve_subordination_array(measure_transform(sc),
                                   measure_transform(ms.delta(c)), z)
    err = float(np.max(np.abs(st.m - ms.stieltjes(sc, z - c))))
    return CriterionResult(2, 'translation', err <= ctx.tol('translation'),
                           err, ctx.tol('translation'), '20 grid points')


def c03(ctx):
    a, b = annulus_bounds(ms.uniform(0.5, 4.0))
    err = max(abs(a - 1.414214), abs(b - 2.466441))
    return CriterionResult(3, 'annulus-bounds', err <= ctx.tol('annulus'),
                           err, ctx.tol('annulus'), f"a={a:.7f} b={b:.7f}")


def c04(ctx):
    L, _ = log_potential(ms.delta(1.0), 1.0)
    return CriterionResult(4, 'log-potential-identity',
                           abs(L) <= ctx.tol('log_potential'), abs(L),
                           ctx.tol('log_potential'))


def c05(ctx):
    t0 = time.perf_counter()
    ring = ring_law(ms.uniform(0.5, 4.0), threads=ctx.threads)
    dt = time.perf_counter() - t0
    neg = float(np.min(ring.density))
    ok = ring.normalization_defect <= ctx.tol('normalization') \
        and neg >= -ctx.tol('negativity') and dt < ctx.tol('ring_seconds')
    return CriterionResult(5, 'ring-normalization', ok,
                           ring.normalization_defect,
                           ctx.tol('normalization'),
                           f"min density {neg:.3g}, {dt:.1f}s")


def c06(ctx):
    from .svg import scatter_svg
    t0 = time.perf_counter()
    nu = ms.uniform(0.5, 4.0)
    a, b = annulus_bounds(nu)
    N = 500
    spec = ModelSpec(N, quantile_points(0.5, 4.0, N), seed=ctx.child_seed(6))
    fracs, first = [], None
    for sd in sample_seeds(spec.seed, 5):
        lam = sample_model(spec, np.random.default_rng(sd)).eigenvalues
        first = lam if first is None else first
        r = np.abs(lam)
        fracs.append(float(np.mean((r >= a - 0.15) & (r <= b + 0.15))))
    frac = float(np.mean(fracs))
    arts = []
    svg = scatter_svg(first, circles=(a, b),
                      title='eigenvalues, uniform(0.5, 4), N = 500')
    if ctx.out_dir:
        path = os.path.join(ctx.out_dir, 'figure_annulus.svg')
        with open(path, 'w') as fh:
            fh.write(svg)
        arts.append(path)
    dt = time.perf_counter() - t0
    ok = frac >= ctx.tol('figure_fraction') and dt < ctx.tol(
        'figure_seconds') and svg.startswith('<svg')
    return CriterionResult(6, 'annulus-figure', ok, frac,
                           ctx.tol('figure_fraction'), f"{dt:.1f}s",
                           artifacts=arts)


def c07(ctx):
    ratios, defects = [], []
    base = ctx.child_seed(7)
    for rep in range(3):
        res = {}
        for N in (100, 400):
            T = np.where(np.arange(N) % 2, 2.0, 1.0)
            est = estimate_subordination(ModelSpec(N, T, T, seed=base + rep),
                                         1j, 200, threads=ctx.threads)
            res[N] = est.resolvent_residual_A
            defects.append(est.consistency_defect)
        ratios.append(res[400] / res[100])
    ratio = float(np.median(ratios))
    dmax = float(max(defects))
    ok = ratio <= ctx.tol('residual_ratio') and dmax <= ctx.tol('defect')
    return CriterionResult(7, 'subordination-residual-scaling', ok, ratio,
                           ctx.tol('residual_ratio'),
                           f"ratios {', '.join(f'{r:.3f}' for r in ratios)};"
                           f" max defect {dmax:.2e}")


def c08(ctx):
    seed = ctx.child_seed(8)
    zero = schwinger_dyson_residual(
        ModelSpec(50, np.ones(50), np.zeros(50), seed=seed), 1j, 4,
        raw=True)
    r = {}
    for N in (100, 400):
        r[N] = schwinger_dyson_residual(
            ModelSpec(N, np.ones(N), np.ones(N), seed=seed), 1j, 400,
            threads=ctx.threads).residual
    ratio = r[400] / r[100]
    ok = zero.residual == 0.0 and zero.raw_residual == 0.0 \
        and ratio <= ctx.tol('sd_ratio')
    return CriterionResult(8, 'schwinger-dyson', ok, ratio,
                           ctx.tol('sd_ratio'),
                           f"B=0 residual {zero.residual}, N=100 {r[100]:.3e},"
                           f" N=400 {r[400]:.3e}")


def c09(ctx):
    N = 1000
    spec = ModelSpec(N, np.ones(N), np.ones(N), seed=ctx.child_seed(9))
    diffs, th = [], None
    d1 = ms.delta(1.0)
    for sd in sample_seeds(spec.seed, 10):
        smp = sample_model(spec, np.random.default_rng(sd))
        rep = local_sv_statistic(smp.singular_values, d1, d1, 1.0, 0.05)
        diffs.append(abs(rep.diff))
        th = rep.theoretical
    rel = float(np.median(diffs)) / th
    return CriterionResult(9, 'local-singular-value-law',
                           rel <= ctx.tol('local_sv'), rel,
                           ctx.tol('local_sv'), f"theoretical {th:.4f}")


def c10(ctx):
    phi = smooth_bump(-1.0, 1.0, 3)
    d0 = ms.delta(0.0)
    sc = ms.semicircle(2.0)
    v0, e0 = hs_integrate(phi, lambda z: ms.stieltjes(d0, z))
    vs, _ = hs_integrate(phi, lambda z: ms.stieltjes(sc, z))
    x, w = np.polynomial.legendre.leggauss(400)
    direct = float(np.sum(w * phi(x) * np.sqrt(4 - x**2) / (2 * math.pi)))
    vsum, _ = hs_integrate(phi, lambda z: ms.stieltjes(sc, z)
                           + ms.stieltjes(d0, z))
    lin = abs(vsum - vs - v0)
    es = abs(vs - direct)
    ok = abs(v0 - 1.0) <= e0 and es <= ctx.tol('hs_semicircle') \
        and lin <= ctx.tol('hs_linearity')
    return CriterionResult(10, 'helffer-sjostrand', ok, es,
                           ctx.tol('hs_semicircle'),
                           f"delta0 {v0:.12f} +- {e0:.2e}, linearity "
                           f"{lin:.1e}")


def c11(ctx):
    sc = ms.semicircle(2.0)
    m = lambda z: ms.stieltjes(sc, z)
    est, _ = window_estimate(m, m, 0.0, 0.01, 10.0)
    rel = abs(est * math.pi - 1.0)
    return CriterionResult(11, 'window-estimator', rel <= ctx.tol('window'),
                           rel, ctx.tol('window'), f"estimate {est:.6f}")


def c12(ctx):
    nu = ms.uniform(0.5, 4.0)
    ring = ring_law(nu, threads=ctx.threads)
    f = radial_bump()
    med = {}
    for N in (250, 1000):
        spec = ModelSpec(N, quantile_points(0.5, 4.0, N),
                         seed=ctx.child_seed(12) + N)
        rel = []
        for sd in sample_seeds(spec.seed, 10):
            smp = sample_model(spec, np.random.default_rng(sd))
            rep = local_srt_statistic(smp, ring, 1.9, 0.5, f)
            rel.append(abs(rep.diff) / abs(rep.theoretical))
        med[N] = float(np.median(rel))
    ok = med[1000] <= ctx.tol('srt') and med[1000] <= med[250]
    return CriterionResult(12, 'local-single-ring', ok, med[1000],
                           ctx.tol('srt'), f"median N=250 {med[250]:.4f}")


def c13(ctx):
    N = 500
    seed = ctx.child_seed(13)
    smp = sample_model(ModelSpec(N, np.ones(N), np.ones(N), seed=seed),
                       vectors=True)
    u, v, count = delocalization_stats(smp, (0.8, 1.2))
    ctl = sample_model(ModelSpec(N, np.ones(N), np.zeros(N), seed=seed),
                       vectors=True)
    cu, cv, _ = delocalization_stats(ctl, (0.8, 1.2))
    worst = max(u, v)
    ok = count > 0 and worst <= ctx.tol('delocalization') \
        and cu == 1.0 and cv == 1.0
    return CriterionResult(13, 'delocalization', ok, worst,
                           ctx.tol('delocalization'),
                           f"{count} singular values in window; control "
                           f"{cu:.3g}")


def wigner_eigenvalues(N: int, seed: int) -> np.ndarray:
    """Eigenvalues of a GUE matrix normalized to semicircle(2)."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    H = (G + G.conj().T) / (2.0 * math.sqrt(N))
    return np.linalg.eigvalsh(H)


def c14(ctx):
    ev = wigner_eigenvalues(2000, ctx.child_seed(14))
    emp = ms.empirical_measure(ev)
    sc = ms.semicircle(2.0)
    res = hadamard_check(lambda z: ms.stieltjes(emp, z) - ms.stieltjes(sc, z),
                         1.0, None, 2.0)
    ok = bool(res.hypothesis_ok and res.holds)
    return CriterionResult(
        14, 'three-circles', ok,
        res.inner_sup if res.inner_sup is not None else math.nan,
        res.inner_bound if res.inner_bound is not None else math.nan,
        f"delta {res.delta:.3e}, r {res.r}" if res.r else res.message)


def c15(ctx):
    from .cli import main
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for t in (1, 2, 8):
            out = os.path.join(tmp, f't{t}')
            code = main(['verify', '--bundle', 'probe', '--out', out,
                         '--threads', str(t), '--seed', str(ctx.seed),
                         '--quiet'])
            if code != 0:
                return CriterionResult(15, 'determinism', False, math.nan,
                                       0.0, f"probe exit {code}")
            names = sorted(n for n in os.listdir(out) if n.endswith('.csv'))
            blobs.append({n: open(os.path.join(out, n), 'rb').read()
                          for n in names})
    same = all(b == blobs[0] for b in blobs[1:]) and len(blobs[0]) > 0
    return CriterionResult(15, 'determinism', same, 0.0 if same else 1.0,
                           0.0, f"{len(blobs[0])} CSV files at 1, 2, 8 "
                           f"threads")


def probe(ctx):
    """Small seeded Monte Carlo run whose numbers feed the determinism
    check; always passes."""
    N = 40
    T = np.where(np.arange(N) % 2, 2.0, 1.0)
    est = estimate_subordination(ModelSpec(N, T, T, seed=ctx.child_seed(99)),
                                 1j, 16, threads=ctx.threads)
    ring = ring_law(ms.uniform(0.5, 4.0), n_grid=9, threads=ctx.threads)
    val = est.resolvent_residual_A + est.S_A_emp.imag \
        + float(np.sum(ring.density))
    arts = []
    if ctx.out_dir:
        os.makedirs(ctx.out_dir, exist_ok=True)
        arts.append(os.path.join(ctx.out_dir, 'probe_ring.csv'))
        ring_law_to_csv(ring, arts[-1])
        arts.append(os.path.join(ctx.out_dir, 'probe_estimate.csv'))
        with open(arts[-1], 'w') as fh:
            fh.write('quantity,value\n')
            for k in ('S_A_emp', 'S_B_emp', 'm_H_emp', 'f_A_emp', 'f_B_emp'):
                v = complex(getattr(est, k))
                fh.write(f"re_{k},{v.real!r}\nim_{k},{v.imag!r}\n")
            for k in ('resolvent_residual_A', 'resolvent_residual_B',
                      'consistency_defect'):
                fh.write(f"{k},{float(getattr(est, k))!r}\n")
    return CriterionResult('probe', 'seeded-probe', True, val, 0.0,
                           f"S_A={est.S_A_emp!r}", artifacts=arts)


CRITERIA: dict = {1: c01, 2: c02, 3: c03, 4: c04, 5: c05, 6: c06, 7: c07,
                  8: c08, 9: c09, 10: c10, 11: c11, 12: c12, 13: c13,
                  14: c14, 15: c15, 'probe': probe}

BUNDLES = {
    'analytic': [1, 2, 3, 4, 10, 11],
    'ring': [3, 4, 5, 6],
    'montecarlo': [7, 8, 9, 12, 13, 14],
    'determinism': [15],
    'probe': ['probe'],
    'all': list(range(1, 16)),
}


def run_criterion(key, ctx: CheckContext) -> CriterionResult:
    """Run one check; exceptions become a failed result."""
    t0 = time.perf_counter()
    try:
        res = CRITERIA[key](ctx)
    except (ArithmeticError, ValueError, RuntimeError,
            np.linalg.LinAlgError) as exc:
        res = CriterionResult(key, 'error', False, math.nan, math.nan,
                              f"{type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res
