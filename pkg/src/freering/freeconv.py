"""
Additive free convolution through the subordination system.

For probability measures ``mu`` and ``nu`` and ``z`` in the upper half-plane
the pair ``(S_mu, S_nu)`` solves

    m(z) = m_mu(z + S_nu) = m_nu(z + S_mu),   -(z + 1/m) = S_mu + S_nu,

and ``m`` is the transform of ``mu ⊞ nu``.  The solver iterates the composed
map ``w -> z + H_nu(z + H_mu(w))`` with ``H(w) = -1/m(w) - w`` and finishes
with Newton steps once a Kantorovich certificate can be issued.

The public functions take scalars.  :func:`solve_subordination_array`
handles whole grids of ``z`` and measure families whose parameters vary
along the grid (used for the Single Ring radial profiles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from .measures import (Measure, DomainError, stieltjes,
                       _as_complex)

__all__ = [
    'SubordinationError', 'NonConvergenceError', 'PoleError',
    'DegeneratePointError', 'SingularJacobianError',
    'SubordinationResult', 'WellBehavedDiagnostics', 'KantorovichCertificate',
    'solve_subordination', 'free_convolve_m', 'diagnostics',
    'newton_kantorovich', 'solve_subordination_array', 'measure_transform',
    'bernoulli_transform', 'NEWTON_SWITCH', 'NEWTON_SAFETY',
]

NEWTON_SWITCH = 1e-4
NEWTON_SAFETY = 100.0
MAX_ITER = 10_000
_DAMPING_FLOOR = 1.0 / 64.0
ACCEL_AFTER = 50
# relative fixed-point step required on top of the residual test; it only
# has to separate genuine fixed points from slow starts near the real axis
STEP_GATE = 1e-6


class SubordinationError(RuntimeError):
    pass


class NonConvergenceError(SubordinationError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class PoleError(SubordinationError):
    pass


class DegeneratePointError(SubordinationError):
    pass


class SingularJacobianError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SubordinationResult:
    """Subordination triple at one point with solver diagnostics."""

    z: complex
    S_mu: complex
    S_nu: complex
    m: complex
    residuals: tuple
    iterations: int
    method: str

    def to_record(self) -> dict:
        out = asdict(self)
        for key in ('z', 'S_mu', 'S_nu', 'm'):
            out[key] = [out[key].real, out[key].imag]
        out['residuals'] = list(self.residuals)
        return out


@dataclass(frozen=True)
class WellBehavedDiagnostics:
    kappa: complex
    alpha: float
    beta: float


@dataclass(frozen=True)
class KantorovichCertificate:
    """Outcome of the Kantorovich test ``2 b L < 1`` at a starting point.

    ``L`` is the affine-invariant constant ``|F'(x0)^-1| * Lip(F')`` in the
    max norm over complex components.
    """

    certified: bool
    b: float
    L: float
    r_star: float
    r_star2: float
    cond: float


# ---------------------------------------------------------------------------
# transforms used by the vectorized solver
#
# A transform is a callable ``f(w, order, idx)`` returning the order-th
# derivative of a Stieltjes transform at the flat array ``w``; ``idx`` are the
# flat grid positions of ``w`` so parameterized families can pick their
# parameter values.

Transform = Callable[[np.ndarray, int, np.ndarray], np.ndarray]


def measure_transform(m: Measure, closed_form: bool = True) -> Transform:
    def f(w, order, idx):
        return stieltjes(m, np.asarray(w, dtype=complex), order, closed_form)
    return f


def bernoulli_transform(c) -> Transform:
    """Transform of ``(delta_c + delta_-c)/2`` with ``c`` varying on a grid."""
    c = np.abs(np.asarray(c, dtype=float)).ravel()

    def f(w, order, idx):
        cc = c[idx] if c.size > 1 else c[0]
        k = -1 - order
        return 0.5 * math.factorial(order) * ((cc - w)**k + (-cc - w)**k)
    return f


# ---------------------------------------------------------------------------
# Kantorovich-guarded Newton

def _op_inf(J):
    # max-norm operator norm, batched over leading axes
    return np.max(np.sum(np.abs(J), axis=-1), axis=-1)


def newton_kantorovich(F: Callable, Fprime: Callable, x0,
                       lipschitz_bound: float | None = None,
                       safety: float = 1.0, max_steps: int = 60,
                       tol: float = 1e-14):
    """Newton's method behind the Kantorovich test.

    Parameters
    ----------
    F, Fprime : callable
        Map on complex vectors and its complex Jacobian.
    x0 : array_like of complex
        Starting point (two complex unknowns for the subordination system).
    lipschitz_bound : float, optional
        Lipschitz constant of ``Fprime`` in the max norm.  If omitted it is
        estimated from ``Fprime`` sampled on a ``3 x 3`` stencil of radius
        ``2b`` around ``x0``.
    safety : float
        Multiplier applied to the Lipschitz constant.

    Returns
    -------
    root : ndarray or None
        ``None`` when the test ``2 b L < 1`` fails.
    certificate : KantorovichCertificate
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=complex))
    J0 = np.atleast_2d(np.asarray(Fprime(x0), dtype=complex))
    try:
        cond = float(np.linalg.cond(J0))
        Jinv = np.linalg.inv(J0)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError("F'(x0) is singular") from exc
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularJacobianError(f"F'(x0) is singular (cond={cond:.3g})")
    F0 = np.atleast_1d(np.asarray(F(x0), dtype=complex))
    step = Jinv @ F0
    b = float(np.max(np.abs(step)))

    if lipschitz_bound is None:
        rad = 2.0 * b
        lip = 0.0
        if rad > 0:
            n = x0.size
            grid = np.array(np.meshgrid(*[[-rad, 0.0, rad]] * n,
                                        indexing='ij')).reshape(n, -1).T
            for off in grid:
                if not np.any(off):
                    continue
                Jx = np.atleast_2d(np.asarray(Fprime(x0 + off), complex))
                lip = max(lip, _op_inf(Jx - J0) / np.max(np.abs(off)))
        lipschitz_bound = lip
    L = float(_op_inf(Jinv)) * float(lipschitz_bound) * safety
    h = 2.0 * b * L
    if h >= 1.0:
        return None, KantorovichCertificate(False, b, L, math.nan, math.nan,
                                            cond)
    root_disc = math.sqrt(1.0 - h)
    r_star = 2.0 * b / (1.0 + root_disc)
    r_star2 = (1.0 + root_disc) / L if L > 0 else math.inf
    cert = KantorovichCertificate(True, b, L, r_star, r_star2, cond)

    x = x0 - step
    if b == 0:
        return x0.copy(), cert
    for _ in range(max_steps):
        J = np.atleast_2d(np.asarray(Fprime(x), dtype=complex))
        dx = np.linalg.solve(J, np.atleast_1d(np.asarray(F(x), complex)))
        x = x - dx
        if np.max(np.abs(dx)) <= tol * max(1.0, np.max(np.abs(x))):
            break
    return x, cert


# ---------------------------------------------------------------------------
# vectorized solver

def _fixed_point_map(f_mu, f_nu, z, w, idx):
    w2 = z - 1.0 / f_mu(w, 0, idx) - w
    return z - 1.0 / f_nu(w2, 0, idx) - w2


def _accelerate(f_mu, f_nu, z, w, Tw, fallback, idx):
    """Newton step on ``T(w) - w = 0`` for slowly contracting points.

    The step is halved until it stays above ``Im z`` and shrinks the
    relative fixed-point residual ``|T(w) - w| / |w|``; otherwise the damped
    step is used.  The fixed point in the upper half-plane is unique, so the
    safeguard cannot switch branches.
    """
    mu0, mu1 = f_mu(w, 0, idx), f_mu(w, 1, idx)
    w2 = z - 1.0 / mu0 - w
    nu0, nu1 = f_nu(w2, 0, idx), f_nu(w2, 1, idx)
    dT = (nu1 / nu0**2 - 1.0) * (mu1 / mu0**2 - 1.0)
    g = Tw - w
    with np.errstate(divide='ignore', invalid='ignore'):
        full = g / (dT - 1.0)
    out = fallback.copy()
    todo = np.isfinite(full)
    lam = 1.0
    # backtracking: halve the step until the residual decreases
    for _ in range(40):
        if not np.any(todo):
            break
        sel = np.nonzero(todo)[0]
        cand = w[sel] - lam * full[sel]
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            g_new = _fixed_point_map(f_mu, f_nu, z[sel], cand,
                                     idx[sel]) - cand
        ok = (np.isfinite(g_new) & (cand.imag >= z[sel].imag)
              & (np.abs(g_new) / np.abs(cand)
                 < np.abs(g[sel]) / np.abs(w[sel])))
        out[sel[ok]] = cand[ok]
        todo[sel[ok]] = False
        lam *= 0.5
    return out


@dataclass
class _ArrayState:
    S_mu: np.ndarray
    S_nu: np.ndarray
    m: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray
    newton: np.ndarray
    status: np.ndarray      # 0 ok, 1 not converged, 2 pole


def _residuals(f_mu, f_nu, z, s1, s2, idx):
    p = z + s1 + s2
    m = -1.0 / p
    r1 = np.abs(f_mu(z + s2, 0, idx) - m)
    r2 = np.abs(f_nu(z + s1, 0, idx) - m)
    r3 = np.abs(-(z + 1.0 / m) - s1 - s2)
    return m, np.stack([r1, r2, r3])


def _newton_polish(f_mu, f_nu, z, s1, s2, idx, tol, safety):
    """Certified Newton on the 2x2 system; returns (ok, s1, s2)."""
    def jac(s1, s2):
        q = (z + s1 + s2)**-2
        a = f_mu(z + s2, 1, idx) - q
        c = f_nu(z + s1, 1, idx) - q
        return -q, a, c, -q

    def F(s1, s2):
        inv = 1.0 / (z + s1 + s2)
        return f_mu(z + s2, 0, idx) + inv, f_nu(z + s1, 0, idx) + inv

    def solve(j, r):
        j11, j12, j21, j22 = j
        det = j11 * j22 - j12 * j21
        return ((j22 * r[0] - j12 * r[1]) / det,
                (-j21 * r[0] + j11 * r[1]) / det, det)

    j0 = jac(s1, s2)
    d1, d2, det = solve(j0, F(s1, s2))
    b = np.maximum(np.abs(d1), np.abs(d2))
    j11, j12, j21, j22 = j0
    inv_norm = np.maximum(np.abs(j22) + np.abs(j12),
                          np.abs(j21) + np.abs(j11)) / np.abs(det)

    # second-derivative bound on the stencil of radius 2b
    rad = 2.0 * b
    lip = np.zeros_like(b)
    for e1 in (-1.0, 0.0, 1.0):
        for e2 in (-1.0, 0.0, 1.0):
            t1 = s1 + e1 * rad
            t2 = s2 + e2 * rad
            p3 = 2.0 * np.abs(z + t1 + t2)**-3
            row1 = 3 * p3 + np.abs(f_mu(z + t2, 2, idx)) + p3
            row2 = 3 * p3 + np.abs(f_nu(z + t1, 2, idx)) + p3
            lip = np.maximum(lip, np.maximum(row1, row2))
    L = inv_norm * lip * safety
    ok = (2.0 * b * L < 1.0) & np.isfinite(b) & (det != 0)
    if not np.any(ok):
        return ok, s1, s2

    n1, n2 = s1.copy(), s2.copy()
    sel = np.nonzero(ok)[0]
    zz, ii = z[sel], idx[sel]
    a1, a2 = s1[sel], s2[sel]

    def sub(f):
        return lambda w, k, _i: f(w, k, ii)
    fm, fn = sub(f_mu), sub(f_nu)
    for _ in range(30):
        q = (zz + a1 + a2)**-2
        inv = 1.0 / (zz + a1 + a2)
        r = (fm(zz + a2, 0, ii) + inv, fn(zz + a1, 0, ii) + inv)
        j = (-q, fm(zz + a2, 1, ii) - q, fn(zz + a1, 1, ii) - q, -q)
        d1, d2, _ = solve(j, r)
        a1, a2 = a1 - d1, a2 - d2
        if np.all(np.maximum(np.abs(d1), np.abs(d2)) <= 1e-16 * (
                1.0 + np.abs(a1) + np.abs(a2))):
            break
    n1[sel], n2[sel] = a1, a2
    _, res = _residuals(fm, fn, zz, a1, a2, ii)
    good = ((np.max(res, axis=0) <= tol)
            & (a1.imag >= -1e-10) & (a2.imag >= -1e-10))
    ok[sel] = good
    n1[sel] = np.where(good, a1, s1[sel])
    n2[sel] = np.where(good, a2, s2[sel])
    return ok, n1, n2


def solve_subordination_array(f_mu: Transform, f_nu: Transform, z,
                              tol: float = 1e-10, max_iter: int = MAX_ITER,
                              newton: bool = True,
                              safety: float = NEWTON_SAFETY) -> _ArrayState:
    """Solve the subordination system on an array of points.

    Points are advanced together; a point stops moving once it has converged
    (or failed) so results do not depend on the rest of the grid.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    if np.any(z.imag <= 0):
        raise DomainError("all z must lie in the upper half-plane")
    n = z.size
    idx_all = np.arange(n)
    eta = z.imag

    omega = z.copy()                   # argument of m_mu, equals z + S_nu
    damp = np.ones(n)
    iters = np.zeros(n, dtype=int)
    status = np.ones(n, dtype=np.int8)
    used_newton = np.zeros(n, dtype=bool)
    next_newton = np.full(n, NEWTON_SWITCH)
    S_mu = np.zeros(n, complex)
    S_nu = np.zeros(n, complex)
    active = np.ones(n, dtype=bool)

    def H(f, w, idx):
        return -1.0 / f(w, 0, idx) - w

    for it in range(max_iter + 1):
        ia = np.nonzero(active)[0]
        if ia.size == 0:
            break
        za, wa = z[ia], omega[ia]
        s_mu = H(f_mu, wa, ia)
        s_nu = wa - za
        p = za + s_mu + s_nu
        pole = ~np.isfinite(s_mu) | (np.abs(p) < 1e-300)
        m_cur = -1.0 / p
        m_nu = f_nu(za + s_mu, 0, ia)
        Tw = za - 1.0 / m_nu - (za + s_mu)
        # the step test is relative: near the real axis the start w = z can
        # have a tiny absolute residual while T(w) is far from w
        res = np.abs(m_nu - m_cur)
        step = np.abs(Tw - wa) / np.abs(wa)
        crit = np.maximum(res, step)
        crit = np.where(np.isfinite(crit), crit, np.inf)
        S_mu[ia], S_nu[ia] = s_mu, s_nu

        done = (res <= tol) & (step <= STEP_GATE) & ~pole
        if newton:
            try_n = ~done & ~pole & (crit <= next_newton[ia])
            if np.any(try_n):
                sel = ia[try_n]
                ok, n1, n2 = _newton_polish(f_mu, f_nu, z[sel], S_mu[sel],
                                            S_nu[sel], sel, tol, safety)
                S_mu[sel] = np.where(ok, n1, S_mu[sel])
                S_nu[sel] = np.where(ok, n2, S_nu[sel])
                used_newton[sel[ok]] = True
                next_newton[sel[~ok]] = crit[try_n][~ok] / 10.0
                done[np.nonzero(try_n)[0][ok]] = True
        status[ia[done]] = 0
        status[ia[pole]] = 2
        iters[ia] = it
        finished = done | pole
        active[ia[finished]] = False
        if it == max_iter:
            break

        # damped update of the remaining points
        keep = ~finished
        ib = ia[keep]
        if ib.size == 0:
            continue
        wb = omega[ib]
        Tw = Tw[keep]
        d = damp[ib]
        new = (1.0 - d) * wb + d * Tw
        bad = ~(new.imag >= eta[ib]) | ~np.isfinite(new)
        while np.any(bad & (d > _DAMPING_FLOOR)):
            d = np.where(bad, np.maximum(d / 2.0, _DAMPING_FLOOR), d)
            new = (1.0 - d) * wb + d * Tw
            bad = ~(new.imag >= eta[ib]) | ~np.isfinite(new)
        damp[ib] = d
        new = np.where(np.isfinite(new), new, wb)
        if it >= ACCEL_AFTER:
            new = _accelerate(f_mu, f_nu, z[ib], wb, Tw, new, ib)
        omega[ib] = new

    m, res3 = _residuals(f_mu, f_nu, z, S_mu, S_nu, idx_all)
    return _ArrayState(S_mu.reshape(shape), S_nu.reshape(shape),
                       m.reshape(shape), res3.reshape((3,) + shape),
                       iters.reshape(shape), used_newton.reshape(shape),
                       status.reshape(shape))


# ---------------------------------------------------------------------------
# scalar API

def solve_subordination(mu: Measure, nu: Measure, z, tol: float = 1e-10,
                        max_iter: int = MAX_ITER,
                        newton: bool = True) -> SubordinationResult:
    """Subordination triple ``(S_mu, S_nu, m)`` of ``mu ⊞ nu`` at ``z``.

    Raises
    ------
    DomainError
        ``z`` not in the upper half-plane.
    PoleError
        ``z + S_mu + S_nu`` vanished.
    NonConvergenceError
        Iteration cap reached; carries the last residual.
    """
    zc = _as_complex(z)
    st = solve_subordination_array(measure_transform(mu),
                                   measure_transform(nu), np.array([zc]),
                                   tol, max_iter, newton)
    res = tuple(float(r) for r in st.residuals[:, 0])
    if st.status[0] == 2:
        raise PoleError(f"z + S_mu + S_nu = 0 at z={zc}")
    if st.status[0] == 1:
        raise NonConvergenceError(
            f"subordination did not converge in {max_iter} iterations "
            f"(residual {max(res):.3g})", max(res))
    return SubordinationResult(
        zc, complex(st.S_mu[0]), complex(st.S_nu[0]), complex(st.m[0]), res,
        int(st.iterations[0]),
        'newton-polished' if st.newton[0] else 'fixed-point')


def free_convolve_m(mu: Measure, nu: Measure, z, **kwargs) -> complex:
    """Stieltjes transform of ``mu ⊞ nu`` at ``z``."""
    return solve_subordination(mu, nu, z, **kwargs).m


def diagnostics(mu: Measure, nu: Measure, z,
                result: SubordinationResult | None = None
                ) -> WellBehavedDiagnostics:
    """``kappa``, ``alpha`` and ``beta`` at the subordination solution."""
    if result is None:
        result = solve_subordination(mu, nu, z)
    zc = result.z
    p = zc + result.S_mu + result.S_nu
    w_mu = zc + result.S_nu
    w_nu = zc + result.S_mu
    d_mu = complex(stieltjes(mu, np.array([w_mu]), 1)[0])
    d_nu = complex(stieltjes(nu, np.array([w_nu]), 1)[0])
    dd_mu = complex(stieltjes(mu, np.array([w_mu]), 2)[0])
    dd_nu = complex(stieltjes(nu, np.array([w_nu]), 2)[0])
    kappa = (d_mu + d_nu) * p**-2 - d_mu * d_nu
    if abs(kappa) < 1e-14:
        raise DegeneratePointError(f"kappa vanishes at z={zc}")
    alpha = (abs(p)**-2 + abs(d_mu) + abs(d_nu)) / abs(kappa)
    beta = abs(p)**-3 + abs(dd_mu) + abs(dd_nu)
    return WellBehavedDiagnostics(kappa, float(alpha), float(beta))
