"""
Single Ring limit law.

For singular-value law ``nu`` the eigenvalue law of ``U T V`` (Haar ``U, V``)
is a rotation-invariant measure on the annulus ``a <= |z| <= b`` with
``a = (int x^-2 dnu)^(-1/2)`` and ``b = (int x^2 dnu)^(1/2)``.  Its radial
density is ``(1/2pi) Laplacian L(|z|)`` where

    L(r) = int log|x| d nu_{inf,r}(x),
    nu_{inf,r} = nu^s ⊞ (delta_r + delta_-r)/2.

``L`` is computed from the transform on the imaginary axis,

    L = log Y - int_0^Y Im m(i eta) d eta
              + int_Y^inf (1/eta - Im m(i eta)) d eta,

which holds for any symmetric compactly supported probability measure and
any ``Y > 0``.  The integrands are smooth, so Gauss-Legendre quadrature is
accurate to near machine precision and the finite-difference Laplacian stays
clean.  The real-axis route (density recovery, cutoff at ``t_cut``) is kept
as ``method="cutoff"``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measures import (Measure, moment, symmetrize, symmetric_bernoulli,
                       stieltjes, _neville_at_zero)
from .freeconv import (solve_subordination, solve_subordination_array,
                       measure_transform, bernoulli_transform,
                       NonConvergenceError)

__all__ = [
    'OutOfSupportError', 'GridTooCoarseError', 'RingLaw', 'annulus_bounds',
    'nu_infinity_m', 'log_potential', 'log_potential_array', 'ring_density',
    'ring_density_array', 'ring_law', 'ring_ball_mass', 'ring_cumulative_mass',
    'ring_law_to_csv', 'density_bound',
]

CSV_HEADER = ('r', 'log_potential', 'density')
_CHUNK = 64


class OutOfSupportError(ValueError):
    pass


class GridTooCoarseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RingLaw:
    """Annulus bounds with tabulated log-potential and radial density."""

    a: float
    b: float
    r_grid: np.ndarray
    log_potential: np.ndarray
    density: np.ndarray
    normalization_defect: float
    h: float = 1e-2

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError("annulus with a > b")
        for name in ('r_grid', 'log_potential', 'density'):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.r_grid) <= 0):
            raise ValueError("r_grid must be increasing")

    @property
    def mass(self) -> float:
        return 1.0 - self.normalization_defect

    def density_interp(self, r):
        """Linear interpolation of the table, constant beyond its ends,
        zero outside ``[a, b]``."""
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.r_grid, self.density)
        return np.where((r >= self.a) & (r <= self.b), out, 0.0)


def annulus_bounds(nu: Measure) -> tuple[float, float]:
    """Inner and outer radius ``(a, b)`` of the limiting annulus."""
    b = math.sqrt(moment(nu, 2))
    if nu.touches_zero():
        return 0.0, b
    a = 1.0 / math.sqrt(moment(nu, -2, allow_negative=True))
    return a, b


def nu_infinity_m(nu: Measure, r: float, w) -> complex:
    """Transform of ``nu^s ⊞ (delta_r + delta_-r)/2`` at ``w``."""
    if r < 0:
        raise ValueError("r must be >= 0")
    return solve_subordination(symmetrize(nu), symmetric_bernoulli(r), w).m


def _nu_inf_m_array(nu_s: Measure, r, w, tol=1e-12):
    """Vectorized transform of ``nu_{inf,r}``; ``r`` and ``w`` broadcast."""
    r, w = np.broadcast_arrays(np.asarray(r, float), np.asarray(w, complex))
    st = solve_subordination_array(measure_transform(nu_s),
                                   bernoulli_transform(r.ravel()), w.ravel(),
                                   tol=tol)
    if np.any(st.status != 0):
        k = int(np.argmax(st.status != 0))
        bad = float(np.max(st.residuals[:, k]))
        raise NonConvergenceError(
            f"subordination failed at r={r.ravel()[k]:.6g}, "
            f"w={w.ravel()[k]:.6g} (residual {bad:.3g})", bad)
    return st.m.reshape(w.shape)


def _imag_axis_rule(Y, n_quad, n_tail):
    u, wu = np.polynomial.legendre.leggauss(n_quad)
    u, wu = 0.5 * (u + 1.0), 0.5 * wu
    v, wv = np.polynomial.legendre.leggauss(n_tail)
    v, wv = 0.5 * (v + 1.0), 0.5 * wv
    Y = np.asarray(Y, float)[..., None]
    return Y * u, Y * wu, Y / v, Y * wv / v**2


def log_potential_array(nu: Measure, r, n_quad: int = 128, n_tail: int = 48,
                        threads: int = 1) -> np.ndarray:
    """``L(r)`` on an array of radii by the imaginary-axis identity.

    Radii are processed in fixed chunks so the result does not depend on
    ``threads``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    nu_s = symmetrize(nu)
    R = nu_s.support_radius

    def chunk(rc):
        Y = 2.0 * (R + rc) + 1.0
        e1, w1, e2, w2 = _imag_axis_rule(Y, n_quad, n_tail)
        eta = np.concatenate([e1, e2], axis=1)
        im = _nu_inf_m_array(nu_s, rc[:, None], 1j * eta).imag
        head = np.sum(im[:, :n_quad] * w1, axis=1)
        tail = np.sum((1.0 / e2 - im[:, n_quad:]) * w2, axis=1)
        return np.log(Y) - head + tail

    pieces = [r[i:i + _CHUNK] for i in range(0, r.size, _CHUNK)]
    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(chunk, pieces))
    else:
        out = [chunk(p) for p in pieces]
    return np.concatenate(out)


def density_bound(nu: Measure, n_probe: int = 401, eta: float = 1e-3) -> float:
    """``sup density(nu^s)`` estimated as ``sup Im m / pi`` on a probe
    grid."""
    nu_s = symmetrize(nu)
    R = nu_s.support_radius
    E = np.linspace(-R, R, n_probe)
    return float(np.max(stieltjes(nu_s, E + 1j * eta).imag) / np.pi)


def log_potential(nu: Measure, r: float, t_cut: float = 1e-3,
                  method: str = 'imaginary-axis', n_quad: int = 128,
                  n_tail: int = 48) -> tuple[float, float]:
    """``L(r) = int log|x| d nu_{inf,r}`` and an error bound.

    Parameters
    ----------
    nu : Measure
        Singular-value law.
    r : float
        Radius ``|z| >= 0``.
    t_cut : float
        Small-value cutoff for ``method="cutoff"``.
    method : {"imaginary-axis", "cutoff"}
        ``"imaginary-axis"`` integrates ``Im m(i eta)`` and estimates the
        error by halving the quadrature; ``"cutoff"`` integrates
        ``2 log(x) rho(x)`` over ``[t_cut, K]`` with ``rho`` recovered by
        Stieltjes inversion and adds the bound ``C t (1 - log t)`` for the
        neglected piece, ``C = pi * sup density``.
    """
    if method == 'imaginary-axis':
        L = log_potential_array(nu, [r], n_quad, n_tail)[0]
        L2 = log_potential_array(nu, [r], n_quad // 2, n_tail // 2)[0]
        return float(L), float(abs(L - L2))
    if method != 'cutoff':
        raise ValueError(f"unknown method {method!r}")
    if not (0 < t_cut <= 0.1):
        raise ValueError("t_cut must lie in (0, 0.1]")
    nu_s = symmetrize(nu)
    K = nu_s.support_radius + r
    panels = np.linspace(t_cut, K, 65)
    g, gw = np.polynomial.legendre.leggauss(8)
    half = 0.5 * np.diff(panels)
    x = (panels[:-1, None] + half[:, None] * (g + 1.0)).ravel()
    wx = (half[:, None] * gw).ravel()
    etas = 0.1 * 0.5**np.arange(6)
    m = _nu_inf_m_array(nu_s, r, x[None, :] + 1j * etas[:, None])
    vals = m.imag / np.pi
    diag = _neville_at_zero(etas[:, None], vals)
    rho = np.maximum(diag[-1], 0.0)
    rho_err = np.abs(diag[-1] - diag[-2])
    L = 2.0 * np.sum(wx * np.log(x) * rho)
    C = math.pi * density_bound(nu)
    err = C * t_cut * (1.0 - math.log(t_cut)) + 2.0 * np.sum(
        wx * np.abs(np.log(x)) * rho_err)
    return float(L), float(err)


def _laplacian(Lp, L0, Lm, r, h):
    return (Lp - 2.0 * L0 + Lm) / h**2 + (Lp - Lm) / (2.0 * h * r)


def ring_density_array(nu: Measure, r, h: float = 1e-2,
                       richardson: bool = True, threads: int = 1,
                       return_potential: bool = False):
    """Radial density ``(L'' + L'/r) / 2pi`` at each radius, without a
    range check."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    offsets = [-h, -h / 2, 0.0, h / 2, h] if richardson else [-h, 0.0, h]
    pts = (r[:, None] + np.array(offsets)).ravel()
    L = log_potential_array(nu, pts, threads=threads).reshape(r.size, -1)
    if richardson:
        coarse = _laplacian(L[:, 4], L[:, 2], L[:, 0], r, h)
        fine = _laplacian(L[:, 3], L[:, 2], L[:, 1], r, h / 2)
        lap = (4.0 * fine - coarse) / 3.0
        L0 = L[:, 2]
    else:
        lap = _laplacian(L[:, 2], L[:, 1], L[:, 0], r, h)
        L0 = L[:, 1]
    rho = lap / (2.0 * math.pi)
    return (rho, L0) if return_potential else rho


def ring_density(nu: Measure, r: float, h: float = 1e-2,
                 richardson: bool = True,
                 allow_outside: bool = False) -> float:
    """Radial density of the Single Ring law at ``r``.

    Raises :class:`OutOfSupportError` unless ``a + 2h < r < b - 2h``;
    ``allow_outside=True`` evaluates the Laplacian anyway (diagnostic use,
    it vanishes off the annulus).
    """
    a, b = annulus_bounds(nu)
    if not allow_outside and not (a + 2 * h < r < b - 2 * h):
        raise OutOfSupportError(
            f"r={r} outside the open annulus ({a + 2 * h:.6g}, "
            f"{b - 2 * h:.6g})")
    if r - h <= 0:
        raise OutOfSupportError("finite-difference stencil crosses r = 0")
    return float(ring_density_array(nu, [r], h, richardson)[0])


def ring_law(nu: Measure, n_grid: int = 201, margin: float = 0.02,
             h: float = 1e-2, richardson: bool = True,
             threads: int = 1) -> RingLaw:
    """Tabulate the Single Ring law on ``n_grid`` radii in
    ``[a + margin, b - margin]``.

    ``normalization_defect`` is ``|1 - mass|`` with the mass integrated by
    the trapezoid rule on the grid and the two edge strips filled with the
    end values of the table.
    """
    a, b = annulus_bounds(nu)
    lo, hi = a + margin, b - margin
    if not hi > lo:
        raise ValueError("annulus too thin for the requested margin")
    r = np.linspace(lo, hi, n_grid)
    rho, L = ring_density_array(nu, r, h, richardson, threads,
                                return_potential=True)
    mass = _radial_mass(a, b, r, rho)
    return RingLaw(a, b, r, L, rho, abs(1.0 - mass), h)


def _radial_mass(a, b, r, rho):
    f = 2.0 * math.pi * r * rho
    inner = np.trapezoid(f, r) if hasattr(np, 'trapezoid') else np.trapz(f, r)
    edges = math.pi * rho[0] * (r[0]**2 - a**2) + math.pi * rho[-1] * (
        b**2 - r[-1]**2)
    return float(inner + edges)


def ring_cumulative_mass(nu: Measure, r, h: float = 1e-3) -> np.ndarray:
    """``mu(B(0, r)) = r L'(r)`` by a central difference of ``L``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    L = log_potential_array(nu, (r[:, None] + np.array([-h, h])).ravel())
    L = L.reshape(r.size, 2)
    return r * (L[:, 1] - L[:, 0]) / (2.0 * h)


def _arc_angle(r, d, R):
    # angle of the circle |x| = r lying inside the disc B(d, R), d >= 0
    r = np.asarray(r, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        c = (r**2 + d**2 - R**2) / (2.0 * r * d)
    ang = 2.0 * np.arccos(np.clip(c, -1.0, 1.0))
    ang = np.where(r + d <= R, 2.0 * math.pi, ang)
    ang = np.where((d >= r + R) | (r >= d + R), 0.0, ang)
    if d == 0:
        ang = np.where(r <= R, 2.0 * math.pi, 0.0)
    return ang


def ring_ball_mass(ring: RingLaw, z0: complex, radius: float,
                   n_per_panel: int = 64) -> float:
    """``mu(B(z0, radius))`` by polar quadrature of the radial table.

    The integral ``int rho(r) r theta(r) dr`` runs over the annulus, with
    ``theta(r)`` the angle of the circle of radius ``r`` inside the ball.
    It depends on ``|z0|`` only.
    """
    if radius <= 0:
        return 0.0
    spacing = float(np.max(np.diff(ring.r_grid))) if ring.r_grid.size > 1 \
        else math.inf
    if spacing > radius / 5.0:
        raise GridTooCoarseError(
            f"grid spacing {spacing:.3g} exceeds radius/5 = {radius / 5:.3g}")
    d = abs(complex(z0))
    lo, hi = max(ring.a, d - radius, 0.0), min(ring.b, d + radius)
    if hi <= lo:
        return 0.0
    breaks = {lo, hi}
    for x in (abs(d - radius), d + radius, ring.r_grid[0], ring.r_grid[-1]):
        if lo < x < hi:
            breaks.add(x)
    breaks = np.array(sorted(breaks))
    g, gw = np.polynomial.legendre.leggauss(n_per_panel)
    total = 0.0
    for p, q in zip(breaks[:-1], breaks[1:]):
        # sub-panels on the table resolution
        n_sub = max(1, int(math.ceil((q - p) / spacing)))
        edges = np.linspace(p, q, n_sub + 1)
        half = 0.5 * np.diff(edges)
        x = (edges[:-1, None] + half[:, None] * (g + 1.0)).ravel()
        w = (half[:, None] * gw).ravel()
        total += float(np.sum(w * ring.density_interp(x) * x
                              * _arc_angle(x, d, radius)))
    return total


def ring_law_to_csv(ring: RingLaw, path=None) -> str:
    """Write ``r, log_potential, density`` with 12 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for row in zip(ring.r_grid, ring.log_potential, ring.density):
        writer.writerow([f"{v:.12g}" for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, 'w', newline='') as fh:
            fh.write(text)
    return text
