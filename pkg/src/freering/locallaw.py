"""
Local-scale statistics.

* polynomial smoothstep bumps with exact derivative bounds (``TestFunction``);
* the window estimator ``nu([E +- M eta]) / (2 M eta)`` read off ``Im m`` at
  height ``eta`` (``window_estimate``);
* Helffer-Sjostrand integration of a test function against a measure known
  only through its Stieltjes transform (``hs_integrate``);
* the smooth split of ``log`` at scale ``t`` (``cutoff_logs``);
* local eigenvalue and singular-value statistics compared with their limits;
* a numerical harness for the three-circles propagation bound
  (``hadamard_check``).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .measures import Measure, density_at, symmetrize
from .freeconv import solve_subordination, diagnostics

__all__ = [
    'TestFunction', 'LocalLawReport', 'HadamardResult', 'CutoffLogs',
    'RadialBump', 'smoothstep', 'smooth_bump', 'radial_bump',
    'window_estimate', 'hs_integrate', 'cutoff_logs', 'local_srt_statistic',
    'local_sv_statistic', 'sv_window', 'hadamard_check', 'eps_scale',
    't_scale', 'scale_constraint', 'append_reports_csv', 'REPORT_COLUMNS',
    'DEFAULT_ALPHA', 'DEFAULT_EPS',
]

DEFAULT_ALPHA = 0.1
DEFAULT_EPS = 0.05
REPORT_COLUMNS = ('statistic', 'N', 'scale', 'empirical', 'theoretical',
                  'diff', 'tol', 'seed_list', 'pass')
_GRID_POINTS = 10_000


def _eval(fn, z):
    """Evaluate ``fn`` on an array, falling back to a scalar loop."""
    z = np.asarray(z, dtype=complex)
    try:
        out = np.asarray(fn(z), dtype=complex)
        if out.shape == z.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([complex(fn(complex(v))) for v in z.ravel()]
                    ).reshape(z.shape)


# ---------------------------------------------------------------------------
# smoothstep construction

def smoothstep(order: int) -> np.polynomial.Polynomial:
    """Polynomial ``S`` on ``[0, 1]`` with ``S(0)=0``, ``S(1)=1`` and
    derivatives ``1..order`` vanishing at both ends.

    ``S' = c x^order (1 - x)^order`` normalized to unit integral.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    x = np.polynomial.Polynomial([0.0, 1.0])
    dS = x**order * (1 - x)**order
    S = dS.integ()
    return S / S(1.0)


def _poly_sup(P: np.polynomial.Polynomial) -> float:
    # exact max of |P| on [0, 1]: endpoints and real critical points
    pts = [0.0, 1.0]
    crit = P.deriv().roots() if P.degree() > 1 else []
    pts += [c.real for c in crit if abs(c.imag) < 1e-12 and 0 < c.real < 1]
    return float(max(abs(P(t)) for t in pts))


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Compactly supported ``C^{p+1}`` function with its derivatives.

    ``evaluate(x, k)`` returns ``phi^(k)(x)`` for ``k = 0..p+1``;
    ``sup_norms[k]`` bounds ``||phi^(k)||_inf``.  ``breakpoints`` lists
    the points where the piecewise-polynomial pieces join.
    """

    __test__ = False  # not a pytest class

    evaluate: Callable
    support: tuple
    p: int
    sup_norms: tuple
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("order p must be >= 1")
        if len(self.sup_norms) < self.p + 2:
            raise ValueError("sup_norms must cover derivatives 0..p+1")
        lo, hi = self.support
        if not hi > lo:
            raise ValueError("empty support")

    def __call__(self, x, k: int = 0):
        if not 0 <= k <= self.p + 1:
            raise ValueError(f"derivative order {k} not available "
                             f"(p = {self.p})")
        return self.evaluate(np.asarray(x, dtype=float), k)

    @property
    def length(self) -> float:
        return float(self.support[1] - self.support[0])

    def grid_norms(self, n: int = _GRID_POINTS) -> np.ndarray:
        """``max |phi^(k)|`` on ``n`` equispaced points of the support."""
        x = np.linspace(*self.support, n)
        return np.array([np.max(np.abs(self(x, k)))
                         for k in range(self.p + 2)])

    def endpoint_values(self, offset: float = 1e-3) -> np.ndarray:
        """``|phi^(k)|`` at ``offset`` inside each support endpoint,
        shape ``(p+2, 2)``."""
        lo, hi = self.support
        x = np.array([lo + offset, hi - offset])
        return np.array([np.abs(self(x, k)) for k in range(self.p + 2)])


def smooth_bump(lo: float, hi: float, p: int = 3, rise: float | None = None,
                fall: float | None = None) -> TestFunction:
    """Plateau function: 0 outside ``[lo, hi]``, 1 on
    ``[lo + rise, hi - fall]``, smoothstep ramps of order ``p + 1``.

    By default the ramps meet in the middle (a bump with value 1 at the
    midpoint).
    """
    if not hi > lo:
        raise ValueError("need hi > lo")
    half = 0.5 * (hi - lo)
    rise = half if rise is None else float(rise)
    fall = half if fall is None else float(fall)
    if rise <= 0 or fall <= 0 or rise + fall > hi - lo + 1e-15:
        raise ValueError("ramps must be positive and fit in the support")
    S = smoothstep(p + 1)
    derivs = [S.deriv(k) if k else S for k in range(p + 2)]
    top_lo, top_hi = lo + rise, hi - fall

    def evaluate(x, k):
        out = np.zeros_like(x) if k else np.where(
            (x >= top_lo) & (x <= top_hi), 1.0, 0.0)
        up = (x > lo) & (x < top_lo)
        dn = (x > top_hi) & (x < hi)
        out = np.where(up, derivs[k]((x - lo) / rise) / rise**k, out)
        out = np.where(dn, (-1)**k * derivs[k]((hi - x) / fall) / fall**k,
                       out)
        return out

    norms = []
    for k, P in enumerate(derivs):
        s = _poly_sup(P)
        norms.append(max(s / rise**k, s / fall**k) if k else 1.0)
    brk = tuple(sorted({lo, top_lo, top_hi, hi}))
    return TestFunction(evaluate, (float(lo), float(hi)), int(p),
                        tuple(norms), brk)


# ---------------------------------------------------------------------------
# window estimator

def _gl_panels(lo, hi, n_panels, n_nodes=8):
    g, gw = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    x = (edges[:-1, None] + half[:, None] * (g + 1.0)).ravel()
    w = (half[:, None] * gw).ravel()
    return x, w


def _window_mass(fn, lo, hi, eta, nodes_per_eta=8):
    # (1/pi) int_lo^hi Im fn(x + i eta) dx
    n_panels = max(1, int(math.ceil((hi - lo) / eta)))
    x, w = _gl_panels(lo, hi, n_panels, nodes_per_eta)
    return float(np.sum(w * _eval(fn, x + 1j * eta).imag) / math.pi)


def window_estimate(m_fn: Callable, tv_fn: Callable, E: float, eta: float,
               M: float) -> tuple[float, tuple]:
    """Window estimate of ``nu([E +- M eta]) / (2 M eta)``.

    Parameters
    ----------
    m_fn, tv_fn : callable
        Stieltjes transforms of ``nu`` and of ``|nu|``.
    E, eta, M : float
        Centre, height and window half-width in units of ``eta``.

    Returns
    -------
    estimate : float
        ``(1/pi)`` times the average of ``Im m(x + i eta)`` over the window.
    bound_terms : tuple of 4 floats
        The four terms of the window bound: ``sup |m|`` on the window at
        height ``eta``, the ``|nu|`` mass of ``[E +- 2M eta]`` over
        ``M^{3/2} eta``, the mass of the two collars
        ``[E -+ 2M eta +- sqrt(M) eta]`` over ``M eta`` and
        ``Im m_{|nu|}(E + i M eta) / M``.  Masses of ``|nu|`` are read off
        ``tv_fn`` at height ``eta``.
    """
    if not eta > 0:
        raise ValueError("eta must be > 0")
    if M < 2:
        raise ValueError("M must be >= 2")
    half = M * eta
    est = _window_mass(m_fn, E - half, E + half, eta) / (2.0 * half)
    xs = np.linspace(E - half, E + half, 201)
    t1 = float(np.max(np.abs(_eval(m_fn, xs + 1j * eta))))
    t2 = _window_mass(tv_fn, E - 2 * half, E + 2 * half, eta) \
        / (M**1.5 * eta)
    sq = math.sqrt(M) * eta
    collars = sum(_window_mass(tv_fn, c - sq, c + sq, eta)
                  for c in (E - 2 * half, E + 2 * half))
    t3 = collars / (M * eta)
    t4 = float(_eval(tv_fn, np.array([E + 1j * half]))[0].imag) / M
    return est, (t1, t2, t3, t4)


# ---------------------------------------------------------------------------
# Helffer-Sjostrand integration

def hs_integrate(phi: TestFunction, m_fn: Callable, p: int | None = None,
                 a: float = 1.0, eta_min: float = 1e-3, tv_norm: float = 1.0,
                 n_x: int = 32, n_y: int = 48) -> tuple[float, float]:
    """``int phi d nu`` from the Stieltjes transform of ``nu``.

    With the quasi-analytic extension
    ``Psi(x+iy) = sum_{l<=p} (i^l/l!) phi^(l)(x) chi(y) y^l`` and a cutoff
    ``chi`` equal to 1 on ``[0, a/2]`` and 0 beyond ``a``,

        int phi d nu = (1/pi) Re int_0^a int [ (i^p/p!) phi^(p+1) chi y^p
                       + i sum_l (i^l/l!) phi^(l) chi' y^l ] m(x + iy) dx dy.

    The integral is evaluated for ``y >= eta_min`` by tensor Gauss-Legendre
    quadrature.  The strip ``y < eta_min`` is bounded with ``|m| <= tv/y``:
    ``L ||phi^(p+1)|| tv eta_min^p / (pi p! p)``.

    Returns
    -------
    value : float
    error_bound : float
        Strip bound plus the difference between the quadrature and a
        half-resolution quadrature.
    """
    if p is None:
        p = phi.p
    if p < 1:
        raise ValueError("p must be >= 1")
    if p > phi.p:
        raise ValueError(f"test function only carries {phi.p + 1} "
                         f"derivatives, p = {p} needs {p + 1}")
    b = 0.5 * a
    if not 0 < eta_min < b:
        raise ValueError("need 0 < eta_min < a/2")

    def quad(nx, ny):
        brk = list(phi.breakpoints) or list(phi.support)
        xs, wx = [], []
        for lo, hi in zip(brk[:-1], brk[1:]):
            x, w = _gl_panels(lo, hi, nx, 16)
            xs.append(x)
            wx.append(w)
        x, wx = np.concatenate(xs), np.concatenate(wx)
        # y in [eta_min, b]: log substitution; y in [b, a]: plain
        u, wu = np.polynomial.legendre.leggauss(ny)
        lu0, lu1 = math.log(eta_min), math.log(b)
        y1 = np.exp(lu0 + 0.5 * (u + 1) * (lu1 - lu0))
        w1 = 0.5 * (lu1 - lu0) * wu * y1
        y2 = b + 0.5 * (u + 1) * (a - b)
        w2 = 0.5 * (a - b) * wu
        chi = smooth_bump(-a, a, p, rise=b, fall=b)
        ys = np.concatenate([y1, y2])
        wy = np.concatenate([w1, w2])
        Z = x[None, :] + 1j * ys[:, None]
        m = _eval(m_fn, Z)
        d = [phi(x, k) for k in range(p + 2)]
        term = (1j**p / math.factorial(p)) * d[p + 1][None, :] \
            * (chi(ys) * ys**p)[:, None]
        dchi = chi(ys, 1)
        ext = sum((1j**l / math.factorial(l)) * d[l][None, :]
                  * (dchi * ys**l)[:, None] for l in range(p + 1))
        integrand = (term + 1j * ext) * m
        return float((wy @ integrand @ wx).real / math.pi)

    val = quad(n_x, n_y)
    coarse = quad(max(1, n_x // 2), max(2, n_y // 2))
    strip = phi.length * phi.sup_norms[p + 1] * tv_norm * eta_min**p / (
        math.pi * math.factorial(p) * p)
    return val, strip + abs(val - coarse)


# ---------------------------------------------------------------------------
# logarithm cutoffs

@dataclass(frozen=True, eq=False)
class CutoffLogs:
    """Smooth split ``log = log_geq + log_lt`` at scale ``t``.

    ``phi`` equals 1 on ``[t, 3K]`` and is supported in ``[t/2, 3K+1]``;
    ``log_geq = phi log`` and ``log_lt = (1 - phi) log``.
    ``derivative_constants[l]`` is the explicit ``C_l`` with
    ``||phi^(l)|| <= C_l t^-l`` (for ``t/2 <= 1``).
    """

    t: float
    K: float
    phi: TestFunction
    derivative_constants: tuple

    def log_geq(self, x, k: int = 0):
        """Derivative ``k`` of ``phi log`` (Leibniz rule)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = x > 0
        xs = np.where(inside, x, 1.0)
        for j in range(k + 1):
            lg = np.log(xs) if j == 0 else \
                (-1)**(j - 1) * math.factorial(j - 1) * xs**(-j)
            out += math.comb(k, j) * self.phi(xs, k - j) * lg
        return np.where(inside, out, 0.0)

    def log_lt(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("log_lt is defined for x > 0")
        return (1.0 - self.phi(x)) * np.log(x)


def cutoff_logs(t: float, K: float, p: int = 3) -> CutoffLogs:
    """Split of ``log`` smooth at scale ``t``; see :class:`CutoffLogs`.

    The rising ramp on ``[t/2, t]`` is the order ``p + 1`` smoothstep, so
    ``||phi^(l)|| = 2^l ||S^(l)|| t^-l``; for ``l = 1`` this is at most
    ``2(p+1)/t``.
    """
    if not 0 < t < K:
        raise ValueError("need 0 < t < K")
    phi = smooth_bump(t / 2.0, 3.0 * K + 1.0, p, rise=t / 2.0, fall=1.0)
    S = smoothstep(p + 1)
    consts = tuple([1.0] + [2.0**l * _poly_sup(S.deriv(l))
                            for l in range(1, p + 2)])
    return CutoffLogs(float(t), float(K), phi, consts)


# ---------------------------------------------------------------------------
# reports and scales

@dataclass(frozen=True)
class LocalLawReport:
    """One local statistic compared with its limit."""

    statistic: str
    N: int
    scale: float
    empirical: float
    theoretical: float
    diff: float
    tol: float
    seeds: tuple
    passed: bool
    note: str = ''

    @classmethod
    def build(cls, statistic, N, scale, empirical, theoretical, tol, seeds,
              passed=None, note=''):
        diff = float(empirical) - float(theoretical)
        if passed is None:
            passed = bool(abs(diff) <= tol)
        return cls(statistic, int(N), float(scale), float(empirical),
                   float(theoretical), diff, float(tol),
                   tuple(int(s) for s in seeds), bool(passed), note)

    def row(self) -> list:
        return [self.statistic, self.N, f"{self.scale:.12g}",
                f"{self.empirical:.12g}", f"{self.theoretical:.12g}",
                f"{self.diff:.12g}", f"{self.tol:.12g}",
                ';'.join(str(s) for s in self.seeds),
                'true' if self.passed else 'false']


def append_reports_csv(path, reports: Sequence[LocalLawReport]) -> None:
    """Append report rows, writing the header when the file is new."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, 'a', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        if new:
            w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow(r.row())


def eps_scale(N: int, alpha: float = DEFAULT_ALPHA) -> float:
    """``eps_N = (log N)^-alpha``."""
    return math.log(N)**(-alpha)


def t_scale(N: int, alpha: float = DEFAULT_ALPHA,
            eps: float = DEFAULT_EPS) -> float:
    """``t_N = (log N)^-(2 alpha + eps)``."""
    return math.log(N)**(-(2.0 * alpha + eps))


def scale_constraint(alpha: float, eps: float, p: int) -> bool:
    """``4 alpha (p+2) + 2 eps (p+1) < p``."""
    return 4.0 * alpha * (p + 2) + 2.0 * eps * (p + 1) < p


# ---------------------------------------------------------------------------
# local Single Ring statistic

@dataclass(frozen=True, eq=False)
class RadialBump:
    """``f(w) = g(|w| / scale)`` with ``g`` equal to 1 on ``[0, 1 - ramp]``
    and a smoothstep descent to 0 at 1.  ``radius`` is the support radius."""

    ramp: float = 0.5
    scale: float = 1.0
    order: int = 3

    @property
    def radius(self) -> float:
        return self.scale

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        S = smoothstep(self.order + 1)
        lo = 1.0 - self.ramp
        out = np.where(s <= lo, 1.0, 0.0)
        mid = (s > lo) & (s < 1.0)
        return np.where(mid, S(np.clip((1.0 - s) / self.ramp, 0, 1)), out)

    def __call__(self, w):
        return self.profile(np.abs(np.asarray(w)) / self.scale)


def radial_bump(ramp: float = 0.5, scale: float = 1.0,
                order: int = 3) -> RadialBump:
    """Radial ``C^{order+1}`` bump; constant near the origin."""
    if not 0 < ramp <= 1:
        raise ValueError("ramp must lie in (0, 1]")
    return RadialBump(float(ramp), float(scale), int(order))


def _srt_theoretical(ring, z0, eps, f, n_r=96, n_theta=64):
    """``eps^-2 int f((w - z0)/eps) rho(|w|) dA(w)`` in polar coordinates
    about the origin."""
    R = eps * f.radius
    d = abs(complex(z0))
    phase = complex(z0) / d if d > 0 else 1.0
    lo, hi = max(ring.a, d - R, 0.0), min(ring.b, d + R)
    if hi <= lo:
        return 0.0
    g, gw = np.polynomial.legendre.leggauss(n_r)
    r = lo + 0.5 * (g + 1) * (hi - lo)
    wr = 0.5 * (hi - lo) * gw
    if d == 0:
        half = np.full_like(r, math.pi)
    else:
        with np.errstate(divide='ignore', invalid='ignore'):
            c = (r**2 + d**2 - R**2) / (2 * r * d)
        half = np.where(r + d <= R, math.pi, np.arccos(np.clip(c, -1, 1)))
    t, tw = np.polynomial.legendre.leggauss(n_theta)
    th = half[:, None] * t[None, :]
    wt = half[:, None] * tw[None, :]
    w = r[:, None] * np.exp(1j * th) * phase
    vals = np.real(f((w - z0) / eps))
    inner = np.sum(wt * vals, axis=1)
    total = np.sum(wr * r * ring.density_interp(r) * inner)
    return float(total / eps**2)


def local_srt_statistic(sample, ring, z0: complex, eps: float,
                        f: Callable | None = None, *, tol: float = 0.25,
                        diagnostic: bool = False, seeds=(),
                        n_r: int = 96, n_theta: int = 64) -> LocalLawReport:
    """Compare ``(1/N) sum_i F(lambda_i)`` with ``int F dmu`` for
    ``F(lambda) = eps^-2 f((lambda - z0)/eps)``.

    ``f`` must accept complex arrays and expose ``radius`` (support radius).
    The report passes when the relative difference is at most ``tol``
    (absolute difference when the theoretical value is 0).
    ``diagnostic=True`` allows ``z0`` outside the open annulus.
    """
    if f is None:
        f = radial_bump()
    if not eps > 0:
        raise ValueError("eps must be > 0")
    d = abs(complex(z0))
    if not diagnostic and not ring.a < d < ring.b:
        raise ValueError(f"|z0| = {d:.6g} outside the open annulus "
                         f"({ring.a:.6g}, {ring.b:.6g})")
    lam = np.asarray(sample.eigenvalues)
    N = lam.size
    emp = float(np.sum(np.real(f((lam - z0) / eps)))) / (N * eps**2)
    th = _srt_theoretical(ring, z0, eps, f, n_r, n_theta)
    scale = abs(th) if th != 0 else 1.0
    passed = abs(emp - th) <= tol * scale
    if not seeds and sample.seed_used is not None:
        seeds = _seed_tuple(sample.seed_used)
    return LocalLawReport.build('local_srt', N, eps, emp, th, tol * scale,
                                seeds, passed)


def _seed_tuple(seed):
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    if isinstance(seed, np.random.SeedSequence):
        return (int(seed.entropy),) + tuple(int(k) for k in seed.spawn_key)
    return ()


# ---------------------------------------------------------------------------
# local singular-value law

def sv_window(N: int, upper: float = 0.2) -> tuple[float, float]:
    """Admissible heights ``[2 N^{-1/8}, upper]`` (may be empty)."""
    return 2.0 * N**(-1.0 / 8.0), upper


def local_sv_statistic(singular_values, nu_a: Measure, nu_b: Measure,
                       E: float, eta: float, *, tol: float | None = None,
                       seeds=(), kappa_eta: float = 1e-4) -> LocalLawReport:
    """Singular-value count in ``[E +- eta]`` against the limit density.

    empirical = ``#{s_i in [E - eta, E + eta]} / (2 eta N)``;
    theoretical = twice the density of ``nu_a^s ⊞ nu_b^s`` at ``E``.
    ``tol`` defaults to 10% of the theoretical value.  The report note
    records whether ``eta`` lies in :func:`sv_window`.

    Raises
    ------
    DegeneratePointError
        If the Jacobian determinant ``kappa`` vanishes at ``E``.
    """
    if not eta > 0:
        raise ValueError("eta must be > 0")
    s = np.asarray(singular_values, dtype=float)
    N = s.size
    a_s, b_s = symmetrize(nu_a), symmetrize(nu_b)
    z = complex(E, kappa_eta)
    res = solve_subordination(a_s, b_s, z)
    diag = diagnostics(a_s, b_s, z, res)   # raises DegeneratePointError
    dens, _ = density_at(
        lambda w: solve_subordination(a_s, b_s, w).m, E,
        eta_schedule=0.05 * 0.5**np.arange(6))
    th = 2.0 * max(dens, 0.0)
    emp = np.count_nonzero((s >= E - eta) & (s <= E + eta)) / (2 * eta * N)
    if tol is None:
        tol = 0.1 * th
    lo, hi = sv_window(N)
    note = 'in-window' if lo <= eta <= hi else \
        f'eta outside [{lo:.4g}, {hi:.4g}]'
    note += f'; |kappa|={abs(diag.kappa):.3g}'
    return LocalLawReport.build('local_sv', N, eta, emp, th, tol, seeds,
                                note=note)


# ---------------------------------------------------------------------------
# three-circles propagation

@dataclass(frozen=True)
class HadamardResult:
    """Outcome of :func:`hadamard_check`.

    ``inner_bound`` and ``disc`` are ``None`` when the hypothesis fails or
    ``delta`` is outside ``(0, delta0)``.
    """

    hypothesis_ok: bool
    circle_sup: float
    delta: float
    delta0: float
    c: float
    r: float | None
    inner_bound: float | None
    disc: tuple | None
    inner_sup: float | None
    holds: bool | None
    message: str = ''


def _outer_circle(a, n):
    th = 2 * math.pi * np.arange(n) / n
    e = math.e
    return 1j * a * (e + np.exp(1j * th)) / (e - np.exp(1j * th))


def hadamard_check(m_fn: Callable, a: float, delta: float | None,
                   tv_norm: float, n: int = 64) -> HadamardResult:
    """Check the three-circles propagation bound on computable input.

    The hypothesis ``sup |m| <= delta`` is tested on ``n`` points of the
    circle ``{i a (e + e^{i theta}) / (e - e^{i theta})}``.  With
    ``c = 2 tv / a`` and ``r = exp(-4 sqrt(-c / log delta))`` the predicted
    bound ``exp(-sqrt(-c log delta))`` is tested on ``n`` points of the
    boundary of the disc with centre ``i a (1+r^2)/(1-r^2)`` and radius
    ``2 a r / (1 - r^2)`` (the supremum over the closed disc sits on its
    boundary).  ``delta0 = exp(-c)`` and ``delta=None`` uses the measured
    circle supremum.
    """
    if not a > 0:
        raise ValueError("a must be > 0")
    pts = _outer_circle(a, n)
    sup = float(np.max(np.abs(_eval(m_fn, pts))))
    if delta is None:
        delta = sup
    c = 2.0 * tv_norm / a
    delta0 = math.exp(-c)
    if sup > delta:
        return HadamardResult(False, sup, delta, delta0, c, None, None, None,
                              None, None, 'hypothesis violated on circle')
    if delta == 0.0 or c == 0.0:
        # m vanishes on the circle, hence everywhere
        r = 0.5
        bound = 0.0
    elif not 0 < delta < delta0:
        return HadamardResult(True, sup, delta, delta0, c, None, None, None,
                              None, None,
                              f'delta outside (0, delta0={delta0:.3g})')
    else:
        L = -math.log(delta)
        r = math.exp(-4.0 * math.sqrt(c / L))
        bound = math.exp(-math.sqrt(c * L))
    centre = 1j * a * (1 + r**2) / (1 - r**2)
    radius = a * 2 * r / (1 - r**2)
    th = 2 * math.pi * np.arange(n) / n
    inner = centre + radius * np.exp(1j * th)
    inner_sup = float(np.max(np.abs(_eval(m_fn, inner))))
    return HadamardResult(True, sup, delta, delta0, c, r, bound,
                          (centre, radius), inner_sup, inner_sup <= bound)
