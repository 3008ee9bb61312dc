"""
Compactly supported real measures and their Stieltjes transforms.

A :class:`Measure` is a finite list of atoms plus a finite list of segments,
each segment carrying a quadrature rule (nodes, weights) and the density
values at the nodes.  Every integral against a measure therefore reduces to a
weighted sum over atoms and quadrature nodes.  Measures built from one of the
named laws also carry a tag that enables closed-form transforms; the
discretized representation must reproduce those closed forms, which is how
the library checks itself.

Conventions
-----------
The Stieltjes transform is ``m(z) = int dmu(t) / (t - z)`` so that
``m(z) ~ -mass / z`` at infinity and ``Im m > 0`` on the upper half-plane for
positive measures.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    'DomainError', 'SingularMomentError', 'UpperHalfPoint', 'Segment',
    'Measure', 'semicircle', 'arcsine', 'uniform', 'symmetric_bernoulli',
    'delta', 'atomic', 'empirical_measure', 'signed_difference', 'stieltjes',
    'symmetrize', 'moment', 'density_at', 'total_variation', 'to_record',
    'from_record', 'to_json', 'from_json', 'DEFAULT_NODES',
]

DEFAULT_NODES = 512
_MASS_RTOL = 1e-12


class DomainError(ValueError):
    """Raised when a point is not in the open upper half-plane."""


class SingularMomentError(ValueError):
    """Raised for negative moments of a measure whose support touches 0."""


@dataclass(frozen=True)
class UpperHalfPoint:
    """A point ``z = E + i*eta`` with ``eta > 0``."""

    E: float
    eta: float

    def __post_init__(self):
        if not (self.eta > 0):
            raise DomainError(f"eta must be > 0, got {self.eta!r}")

    @property
    def z(self) -> complex:
        return complex(self.E, self.eta)

    @classmethod
    def from_complex(cls, z: complex) -> 'UpperHalfPoint':
        z = complex(z)
        return cls(z.real, z.imag)


def _as_complex(z) -> complex:
    if isinstance(z, UpperHalfPoint):
        return z.z
    z = complex(z)
    if not (z.imag > 0):
        raise DomainError(f"z must lie in the upper half-plane, got {z!r}")
    return z


@dataclass(frozen=True, eq=False)
class Segment:
    """Continuous part on ``[lo, hi]`` discretized by a quadrature rule."""

    lo: float
    hi: float
    nodes: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    rule: str = 'gauss-legendre'

    def __post_init__(self):
        for name in ('nodes', 'weights', 'density'):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.nodes.shape == self.weights.shape == self.density.shape):
            raise ValueError("segment nodes, weights and density must align")
        if self.hi < self.lo:
            raise ValueError("segment with hi < lo")

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def masses(self) -> np.ndarray:
        return self.weights * self.density

    def scaled(self, factor: float) -> 'Segment':
        return Segment(self.lo, self.hi, self.nodes, self.weights,
                       self.density * factor, self.rule)

    def mirrored(self) -> 'Segment':
        return Segment(-self.hi, -self.lo, -self.nodes[::-1],
                       self.weights[::-1], self.density[::-1], self.rule)


@dataclass(frozen=True, eq=False)
class Measure:
    """Finite real measure: atoms plus discretized continuous segments.

    Parameters
    ----------
    atom_locs, atom_weights : array_like
        Locations and weights of the atoms.
    segments : tuple of Segment
        Continuous parts.
    named_law : tuple or None
        ``(name, *params)`` for laws with a closed-form transform.
    total_mass : float or None
        Checked against the discretized mass; computed if omitted.
    positive : bool
        Whether all weights and densities are required to be >= 0.
    """

    atom_locs: np.ndarray
    atom_weights: np.ndarray
    segments: tuple = ()
    named_law: tuple | None = None
    total_mass: float | None = None
    positive: bool = True
    _locs: np.ndarray = field(init=False, repr=False)
    _masses: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        locs = np.atleast_1d(np.asarray(self.atom_locs, dtype=float))
        wts = np.atleast_1d(np.asarray(self.atom_weights, dtype=float))
        if locs.shape != wts.shape:
            raise ValueError("atom locations and weights must align")
        locs.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, 'atom_locs', locs)
        object.__setattr__(self, 'atom_weights', wts)
        object.__setattr__(self, 'segments', tuple(self.segments))

        all_locs = np.concatenate([locs] + [s.nodes for s in self.segments])
        all_mass = np.concatenate([wts] + [s.masses for s in self.segments])
        if not np.all(np.isfinite(all_locs)):
            raise ValueError("measure support must be finite")
        object.__setattr__(self, '_locs', all_locs)
        object.__setattr__(self, '_masses', all_mass)

        mass = float(math.fsum(all_mass))
        if self.total_mass is None:
            object.__setattr__(self, 'total_mass', mass)
        elif abs(mass - self.total_mass) > _MASS_RTOL * max(
                1.0, abs(self.total_mass)):
            raise ValueError(
                f"total_mass {self.total_mass!r} disagrees with "
                f"discretized mass {mass!r}")
        if self.positive:
            if np.any(wts < 0) or any(np.any(s.density < 0)
                                      for s in self.segments):
                raise ValueError("negative weight in a positive measure")

    @property
    def support_radius(self) -> float:
        ends = [abs(x) for s in self.segments for x in (s.lo, s.hi)]
        if self.atom_locs.size:
            ends.append(float(np.max(np.abs(self.atom_locs))))
        return max(ends) if ends else 0.0

    @property
    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """All (location, mass) pairs, atoms first then quadrature nodes."""
        return self._locs, self._masses

    def touches_zero(self) -> bool:
        if np.any(self.atom_locs == 0):
            return True
        return any(s.lo <= 0 <= s.hi for s in self.segments)

    def __repr__(self):
        law = f", law={self.named_law}" if self.named_law else ""
        return (f"Measure(atoms={self.atom_locs.size}, "
                f"segments={len(self.segments)}, "
                f"mass={self.total_mass:.12g}{law})")


# ---------------------------------------------------------------------------
# constructors

def _gauss_legendre(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _cosine_rule(c, n):
    # x = c cos(theta), theta Gauss-Legendre on [0, pi]; nodes increasing
    theta, wt = _gauss_legendre(0.0, np.pi, n)
    theta, wt = theta[::-1], wt[::-1]
    x = c * np.cos(theta)
    return x, c * np.sin(theta) * wt, theta


def semicircle(radius: float = 2.0, n_nodes: int = DEFAULT_NODES) -> Measure:
    """Semicircle law on ``[-radius, radius]`` (variance ``radius**2/4``)."""
    R = float(radius)
    x, w, theta = _cosine_rule(R, n_nodes)
    dens = 2.0 / (np.pi * R) * np.sin(theta)
    seg = Segment(-R, R, x, w, dens, 'cosine')
    return _normalized(Measure([], [], (seg,), ('semicircle', R)))


def arcsine(half_width: float = 2.0, n_nodes: int = DEFAULT_NODES) -> Measure:
    """Arcsine law with density ``1/(pi sqrt(c^2 - x^2))`` on ``[-c, c]``."""
    c = float(half_width)
    x, w, theta = _cosine_rule(c, n_nodes)
    dens = 1.0 / (np.pi * c * np.sin(theta))
    seg = Segment(-c, c, x, w, dens, 'cosine')
    return _normalized(Measure([], [], (seg,), ('arcsine', c)))


def uniform(lo: float, hi: float, n_nodes: int = DEFAULT_NODES) -> Measure:
    """Uniform probability law on ``[lo, hi]``."""
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        raise ValueError("uniform law needs hi > lo")
    x, w = _gauss_legendre(lo, hi, n_nodes)
    seg = Segment(lo, hi, x, w, np.full(n_nodes, 1.0 / (hi - lo)))
    return _normalized(Measure([], [], (seg,), ('uniform', lo, hi)))


def symmetric_bernoulli(c: float = 1.0) -> Measure:
    """``(delta_c + delta_{-c}) / 2``; reduces to ``delta_0`` when c = 0."""
    c = abs(float(c))
    if c == 0:
        return delta(0.0)
    return Measure([-c, c], [0.5, 0.5], (), ('symmetric-bernoulli', c), 1.0)


def delta(x: float = 0.0, weight: float = 1.0) -> Measure:
    return Measure([float(x)], [float(weight)], total_mass=float(weight))


def atomic(locs: Sequence[float], weights: Sequence[float]) -> Measure:
    locs, weights = _merge_atoms(np.asarray(locs, float),
                                 np.asarray(weights, float))
    return Measure(locs, weights, positive=bool(np.all(weights >= 0)))


def empirical_measure(values: Sequence[float]) -> Measure:
    """Uniform atoms of weight ``1/N`` on the given values (merged)."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empirical measure of an empty sequence")
    locs, counts = np.unique(values, return_counts=True)
    return Measure(locs, counts / values.size, total_mass=1.0)


def signed_difference(a: Measure, b: Measure) -> Measure:
    """The signed measure ``a - b`` (named-law tags are dropped)."""
    locs = np.concatenate([a.atom_locs, b.atom_locs])
    wts = np.concatenate([a.atom_weights, -b.atom_weights])
    locs, wts = _merge_atoms(locs, wts)
    segs = tuple(a.segments) + tuple(s.scaled(-1.0) for s in b.segments)
    return Measure(locs, wts, segs, None, None, positive=False)


def _normalized(m: Measure) -> Measure:
    # rescale quadrature densities so that the discrete mass is exactly 1
    mass = math.fsum(m.points[1])
    segs = tuple(s.scaled(1.0 / mass) for s in m.segments)
    return Measure(m.atom_locs, m.atom_weights, segs, m.named_law, 1.0,
                   m.positive)


def _merge_atoms(locs, wts):
    if locs.size == 0:
        return locs, wts
    order = np.argsort(locs, kind='stable')
    locs, wts = locs[order], wts[order]
    uniq, inv = np.unique(locs, return_inverse=True)
    merged = np.zeros(uniq.size)
    np.add.at(merged, inv, wts)
    return uniq, merged


# ---------------------------------------------------------------------------
# closed forms

def _sqrt_pair(z, c):
    # branch of sqrt(z^2 - c^2) analytic off [-c, c] with sqrt ~ z at infinity
    return np.sqrt(z - c) * np.sqrt(z + c)


_SERIES_RATIO = 8.0
_SERIES_TERMS = 24


def _law_radius(law):
    if law[0] == 'symmetrized':
        return _law_radius(law[1])
    if law[0] == 'uniform':
        return max(abs(law[1]), abs(law[2]))
    return abs(law[1])


def _laurent(law, z, order):
    # m(z) = -sum_k m_k z^(-k-1), differentiated term by term
    out = np.zeros_like(z)
    inv = 1.0 / z
    for k in range(_SERIES_TERMS - 1, -1, -1):
        mk = _closed_moment(law, k)
        if mk == 0.0:
            continue
        coef = -mk
        for j in range(order):
            coef *= -(k + 1 + j)
        out = out + coef * inv**(k + 1 + order)
    return out


def _closed_form(law, z, order):
    # far from the support the closed forms cancel catastrophically
    if law[0] != 'symmetric-bernoulli':
        far = np.abs(z) > _SERIES_RATIO * _law_radius(law)
        if np.any(far):
            out = np.empty_like(z)
            out[far] = _laurent(law, z[far], order)
            near = ~far
            if np.any(near):
                out[near] = _closed_form_near(law, z[near], order)
            return out
    return _closed_form_near(law, z, order)


def _closed_form_near(law, z, order):
    name = law[0]
    if name == 'semicircle':
        R = law[1]
        s = _sqrt_pair(z, R)
        if order == 0:
            return 2.0 * (s - z) / R**2
        if order == 1:
            return 2.0 * (z / s - 1.0) / R**2
        return -2.0 / s**3
    if name == 'arcsine':
        s = _sqrt_pair(z, law[1])
        if order == 0:
            return -1.0 / s
        if order == 1:
            return z / s**3
        return (s**2 - 3.0 * z**2) / s**5
    if name == 'uniform':
        lo, hi = law[1], law[2]
        L = hi - lo
        if order == 0:
            return (np.log(hi - z) - np.log(lo - z)) / L
        if order == 1:
            return (1.0 / (lo - z) - 1.0 / (hi - z)) / L
        return (1.0 / (lo - z)**2 - 1.0 / (hi - z)**2) / L
    if name == 'symmetric-bernoulli':
        c = law[1]
        f = math.factorial(order)
        return 0.5 * f * ((c - z)**(-1 - order) + (-c - z)**(-1 - order))
    if name == 'symmetrized':
        inner = law[1]
        sign = (-1.0)**(order + 1)
        return 0.5 * (_closed_form_near(inner, z, order)
                      + sign * _closed_form_near(inner, -z, order))
    raise ValueError(f"no closed form for law {name!r}")


def _closed_moment(law, k):
    name = law[0]
    if name == 'semicircle':
        if k < 0:
            raise SingularMomentError("semicircle support touches 0")
        if k % 2:
            return 0.0
        j = k // 2
        return (law[1] / 2.0)**k * math.comb(2 * j, j) / (j + 1)
    if name == 'arcsine':
        if k < 0:
            raise SingularMomentError("arcsine support touches 0")
        if k % 2:
            return 0.0
        return law[1]**k * math.comb(k, k // 2) / 2.0**k
    if name == 'uniform':
        lo, hi = law[1], law[2]
        if k < 0 and lo <= 0 <= hi:
            raise SingularMomentError("uniform support touches 0")
        if k == -1:
            return math.log(hi / lo) / (hi - lo)
        return (hi**(k + 1) - lo**(k + 1)) / ((k + 1) * (hi - lo))
    if name == 'symmetric-bernoulli':
        return 0.0 if k % 2 else law[1]**k
    if name == 'symmetrized':
        return 0.0 if k % 2 else _closed_moment(law[1], k)
    raise ValueError(f"no closed form for law {name!r}")


# ---------------------------------------------------------------------------
# operations

def _discrete_transform(m: Measure, z, order):
    locs, masses = m.points
    z = np.asarray(z, dtype=complex)
    diff = locs[:, None] - z.reshape(1, -1)
    kernel = math.factorial(order) * diff**(-1 - order)
    return (masses @ kernel).reshape(z.shape)


def stieltjes(m: Measure, z, order: int = 0, closed_form: bool = True):
    """Stieltjes transform of ``m`` or one of its first two derivatives.

    Parameters
    ----------
    m : Measure
    z : UpperHalfPoint, complex or ndarray of complex
        Evaluation point(s).  Scalars must lie in the upper half-plane;
        arrays are evaluated as given (used by the solvers).
    order : {0, 1, 2}
        ``m``, ``m'`` or ``m''``; ``m' = sum w/(t-z)^2``,
        ``m'' = sum 2w/(t-z)^3``.
    closed_form : bool
        Use the named-law closed form when available.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"unsupported derivative order {order!r}")
    scalar = not isinstance(z, np.ndarray)
    zz = _as_complex(z) if scalar else z
    if closed_form and m.named_law is not None:
        za = np.asarray(zz, dtype=complex)
        out = _closed_form(m.named_law, np.atleast_1d(za), order)
        out = out.reshape(za.shape)
        out = out * m.total_mass
    else:
        out = _discrete_transform(m, zz, order)
    return complex(out) if scalar else out


def _is_symmetric(m: Measure) -> bool:
    if m.named_law is not None and m.named_law[0] in (
            'semicircle', 'arcsine', 'symmetric-bernoulli', 'symmetrized'):
        return True
    locs, wts = m.atom_locs, m.atom_weights
    if not (np.array_equal(locs, -locs[::-1])
            and np.array_equal(wts, wts[::-1])):
        return False
    segs = sorted(m.segments, key=lambda s: (s.lo, s.hi))
    for s, t in zip(segs, reversed(segs)):
        if not (s.lo == -t.hi and np.array_equal(s.nodes, -t.nodes[::-1])
                and np.array_equal(s.masses, t.masses[::-1])):
            return False
    return True


def symmetrize(m: Measure) -> Measure:
    """``m^s(X) = (m(X) + m(-X)) / 2``; returns ``m`` itself if symmetric."""
    if _is_symmetric(m):
        return m
    locs = np.concatenate([m.atom_locs, -m.atom_locs])
    wts = np.concatenate([m.atom_weights, m.atom_weights]) * 0.5
    locs, wts = _merge_atoms(locs, wts)
    segs = []
    for s in m.segments:
        half = s.scaled(0.5)
        segs += [half.mirrored(), half]
    segs.sort(key=lambda s: (s.lo, s.hi))
    law = None
    if m.named_law is not None:
        if m.named_law[0] == 'uniform' and m.named_law[1] == -m.named_law[2]:
            return m
        law = ('symmetrized', m.named_law)
    return Measure(locs, wts, tuple(segs), law, m.total_mass, m.positive)


def moment(m: Measure, k: int, allow_negative: bool = False,
           closed_form: bool = True) -> float:
    """``int t^k dm(t)``; negative ``k`` needs ``allow_negative=True``."""
    k = int(k)
    if k < 0:
        if not allow_negative:
            raise ValueError("negative moment requested without "
                             "allow_negative=True")
        if m.touches_zero():
            raise SingularMomentError(
                "negative moment of a measure whose support touches 0")
    if closed_form and m.named_law is not None:
        return m.total_mass * _closed_moment(m.named_law, k)
    locs, masses = m.points
    return float(math.fsum(masses * locs**k))


def total_variation(m: Measure) -> float:
    return float(math.fsum(np.abs(m.points[1])))


def _neville_at_zero(x, y):
    # polynomial extrapolation to x = 0; returns the tableau diagonal
    x = np.asarray(x, float)
    p = np.array(y, dtype=float)
    diag = [p[-1]]
    n = len(x)
    for k in range(1, n):
        p = (x[k:] * p[:-1] - x[:-k] * p[1:]) / (x[k:] - x[:-k])
        diag.append(p[-1])
    return diag


def density_at(m_fn: Callable[[complex], complex], E: float,
               eta_schedule: Sequence[float] | None = None):
    """Density at ``E`` recovered from ``Im m(E + i eta) / pi``.

    The values along a decreasing schedule of heights are extrapolated to
    ``eta = 0`` with Neville's scheme.  Returns ``(density, error)`` where
    ``error`` is the last extrapolation increment.
    """
    if eta_schedule is None:
        eta_schedule = 0.1 * 0.5**np.arange(6)
    etas = np.asarray(eta_schedule, dtype=float)
    if etas.ndim != 1 or etas.size < 2:
        raise ValueError("eta schedule needs at least two heights")
    if np.any(etas <= 0) or np.any(np.diff(etas) >= 0):
        raise ValueError("eta schedule must be positive and strictly "
                         "decreasing")
    vals = [m_fn(complex(E, eta)).imag / np.pi for eta in etas]
    diag = _neville_at_zero(etas, vals)
    return float(diag[-1]), float(abs(diag[-1] - diag[-2]))


# ---------------------------------------------------------------------------
# serialization

def _law_to_record(law):
    if law is None:
        return None
    if law[0] == 'symmetrized':
        return {'name': 'symmetrized', 'inner': _law_to_record(law[1])}
    return {'name': law[0], 'params': list(law[1:])}


def _law_from_record(rec):
    if rec is None:
        return None
    if rec['name'] == 'symmetrized':
        return ('symmetrized', _law_from_record(rec['inner']))
    return (rec['name'],) + tuple(float(p) for p in rec['params'])


def to_record(m: Measure) -> dict:
    return {
        'atoms': [[float(t), float(w)]
                  for t, w in zip(m.atom_locs, m.atom_weights)],
        'segments': [{
            'lo': s.lo, 'hi': s.hi, 'n_nodes': s.n_nodes, 'rule': s.rule,
            'nodes': s.nodes.tolist(), 'weights': s.weights.tolist(),
            'densities': s.density.tolist(),
        } for s in m.segments],
        'named_law': _law_to_record(m.named_law),
        'mass': m.total_mass,
        'positive': m.positive,
    }


def from_record(rec: dict) -> Measure:
    atoms = np.asarray(rec['atoms'], dtype=float).reshape(-1, 2)
    segs = []
    for s in rec['segments']:
        if len(s['nodes']) != s['n_nodes']:
            raise ValueError("segment n_nodes disagrees with node list")
        segs.append(Segment(float(s['lo']), float(s['hi']), s['nodes'],
                            s['weights'], s['densities'],
                            s.get('rule', 'gauss-legendre')))
    return Measure(atoms[:, 0], atoms[:, 1], tuple(segs),
                   _law_from_record(rec['named_law']), float(rec['mass']),
                   bool(rec.get('positive', True)))


def to_json(m: Measure) -> str:
    return json.dumps(to_record(m), sort_keys=True)


def from_json(text: str) -> Measure:
    return from_record(json.loads(text))
