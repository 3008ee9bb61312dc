"""
Random matrix models and Monte Carlo estimators.

Two models are sampled:

* the single model ``A = U diag(T) V`` with independent Haar ``U, V``;
* the sum model ``X = diag(T) + U diag(B) V*``.

For the sum model every resolvent quantity comes from one SVD
``X = P S Q*``.  The Hermitization ``H = [[0, X], [X*, 0]]`` then has the
resolvent blocks

    G11 = P diag(z/(s^2 - z^2)) P*,   G12 = P diag(s/(s^2 - z^2)) Q*,
    G22 = Q diag(z/(s^2 - z^2)) Q*,   G21 = Q diag(s/(s^2 - z^2)) P*,

so diagonal entries and traces cost ``O(N^2)`` per draw.

Averages of ``G_H`` are compared with the deterministic matrices
``G_A(z + S_B)``.  The raw average converges slowly (its off-diagonal noise
does not shrink with ``N``), so the estimators also report a projected
version: keep the diagonals of the four blocks and average them over
coordinates with equal singular value.  Haar invariance makes the
expectation of ``G_H`` invariant under that projection, so both versions
estimate the same matrix.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .measures import _as_complex

__all__ = [
    'ModelSpec', 'SpectralSample', 'SubordinationEstimate',
    'SchwingerDysonResult', 'haar_unitary', 'sample_model',
    'hermitize_spectrum', 'resolvent_trace', 'tau_block',
    'estimate_subordination', 'schwinger_dyson_residual',
    'block_structure_defect', 'delocalization_stats', 'smallest_sv_probe',
    'spectral_sample_to_csv', 'estimate_to_record', 'sample_seeds',
    'quantile_points', 'DecompositionError',
]

K_MAX = 10.0


class DecompositionError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Diagonal data of a matrix model.

    ``B_singular_values=None`` selects the single model ``U T V``; otherwise
    the sum model ``diag(T) + U diag(B) V*``.
    """

    N: int
    T_singular_values: np.ndarray
    B_singular_values: np.ndarray | None = None
    seed: int = 0
    K_max: float = K_MAX

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        T = np.asarray(self.T_singular_values, dtype=float)
        if T.shape != (self.N,) or np.any(T < 0):
            raise ValueError("T must hold N nonnegative reals")
        T.setflags(write=False)
        object.__setattr__(self, 'T_singular_values', T)
        if self.B_singular_values is not None:
            B = np.asarray(self.B_singular_values, dtype=float)
            if B.shape != (self.N,) or np.any(B < 0):
                raise ValueError("B must hold N nonnegative reals")
            B.setflags(write=False)
            object.__setattr__(self, 'B_singular_values', B)
        if self.K > self.K_max:
            raise ValueError(f"operator norm {self.K} exceeds K_max = "
                             f"{self.K_max}")

    @property
    def K(self) -> float:
        k = float(np.max(self.T_singular_values))
        if self.B_singular_values is not None:
            k = max(k, float(np.max(self.B_singular_values)))
        return k

    @property
    def is_sum(self) -> bool:
        return self.B_singular_values is not None


@dataclass(frozen=True, eq=False)
class SpectralSample:
    """Spectrum of one draw; singular values sorted in decreasing order."""

    eigenvalues: np.ndarray | None
    singular_values: np.ndarray
    left_vectors: np.ndarray | None = None
    right_vectors: np.ndarray | None = None
    seed_used: object = None

    def __post_init__(self):
        s = np.asarray(self.singular_values, dtype=float)
        order = np.argsort(-s, kind='stable')
        object.__setattr__(self, 'singular_values', s[order])
        if self.left_vectors is not None:
            object.__setattr__(self, 'left_vectors',
                               np.asarray(self.left_vectors)[:, order])
            object.__setattr__(self, 'right_vectors',
                               np.asarray(self.right_vectors)[:, order])


@dataclass(frozen=True)
class SubordinationEstimate:
    """Monte Carlo estimates of the empirical subordination quantities."""

    z: complex
    N: int
    samples: int
    S_A_emp: complex
    S_B_emp: complex
    m_H_emp: complex
    f_A_emp: complex
    f_B_emp: complex
    resolvent_residual_A: float
    resolvent_residual_B: float
    raw_residual_A: float | None
    raw_residual_B: float | None
    r_A: complex
    r_B: complex
    r_B_full_trace: complex
    consistency_defect: float
    im_guard: float
    im_guard_ok: bool
    standard_errors: dict = field(default_factory=dict)
    seed: int = 0


@dataclass(frozen=True)
class SchwingerDysonResult:
    residual: float
    standard_error: float
    raw_residual: float | None
    samples: int
    N: int


# ---------------------------------------------------------------------------
# sampling

def sample_seeds(seed: int, n: int) -> list:
    """Independent child seeds, one per Monte Carlo draw."""
    return np.random.SeedSequence(int(seed)).spawn(int(n))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary(N: int, rng=None) -> np.ndarray:
    """Haar unitary from the QR factorization of a complex Ginibre matrix.

    The columns of ``Q`` are rephased by ``diag(R)/|diag(R)|`` so the law
    is exactly Haar.
    """
    rng = _rng(rng)
    Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N)))
    Q, R = np.linalg.qr(Z / math.sqrt(2.0))
    d = np.diag(R)
    return Q * (d / np.abs(d))


def quantile_points(lo: float, hi: float, N: int) -> np.ndarray:
    """Midpoint quantiles ``lo + (hi - lo)(i - 1/2)/N`` of a uniform law."""
    return lo + (hi - lo) * (np.arange(N) + 0.5) / N


def _svd(M):
    try:
        P, s, Qh = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(
            f"SVD failed (cond estimate {np.linalg.cond(M):.3g})") from exc
    return P, s, Qh.conj().T


def _sum_model_parts(spec: ModelSpec, rng):
    """One draw of the sum model: Haar factors and SVD of ``X``."""
    T, B = spec.T_singular_values, spec.B_singular_values
    N = spec.N
    if not np.any(B):
        # B = 0: X = diag(T) is already diagonal, use the exact SVD
        order = np.argsort(-T, kind='stable')
        I = np.eye(N)
        return I, I, I[:, order], T[order], I[:, order]
    U = haar_unitary(N, rng)
    V = haar_unitary(N, rng)
    X = np.diag(T.astype(complex)) + (U * B) @ V.conj().T
    P, s, Q = _svd(X)
    return U, V, P, s, Q


def sample_model(spec: ModelSpec, rng=None, *, eigenvalues: bool | None = None,
                 vectors: bool = False, shift: complex | None = None
                 ) -> SpectralSample:
    """Draw one matrix of the model and compute its spectra.

    Parameters
    ----------
    spec : ModelSpec
    rng : Generator, seed or SeedSequence, optional
        Defaults to ``spec.seed``.
    eigenvalues : bool, optional
        Compute eigenvalues (default: only for the single model).
    vectors : bool
        Keep left/right singular vectors.
    shift : complex, optional
        Report singular values of ``shift - X`` instead of ``X``.
    """
    seed_used = spec.seed if rng is None else rng
    rng = _rng(seed_used)
    N = spec.N
    if eigenvalues is None:
        eigenvalues = not spec.is_sum
    T = spec.T_singular_values
    if spec.is_sum:
        B = spec.B_singular_values
        if not np.any(B):
            X = np.diag(T.astype(complex))
        else:
            U, V = haar_unitary(N, rng), haar_unitary(N, rng)
            X = np.diag(T.astype(complex)) + (U * B) @ V.conj().T
    else:
        U, V = haar_unitary(N, rng), haar_unitary(N, rng)
        X = (U * T) @ V
    lam = None
    if eigenvalues:
        try:
            lam = np.linalg.eigvals(X)
        except np.linalg.LinAlgError as exc:
            raise DecompositionError("eigendecomposition failed") from exc
    M = X if shift is None else complex(shift) * np.eye(N) - X
    if vectors:
        if spec.is_sum and not np.any(spec.B_singular_values) \
                and shift is None:
            order = np.argsort(-T, kind='stable')
            I = np.eye(N)
            P, s, Q = I[:, order], T[order], I[:, order]
        else:
            P, s, Q = _svd(M)
        return SpectralSample(lam, s, P, Q, seed_used)
    s = np.linalg.svd(M, compute_uv=False)
    return SpectralSample(lam, s, None, None, seed_used)


# ---------------------------------------------------------------------------
# elementary spectral functions

def hermitize_spectrum(singular_values) -> np.ndarray:
    """Eigenvalues ``{-s_i} U {s_i}`` of the Hermitization, sorted."""
    s = np.asarray(singular_values, dtype=float)
    return np.sort(np.concatenate([-s, s]))


def resolvent_trace(singular_values, z) -> complex:
    """``(1/2N) Tr G_H(z) = (1/N) sum z / (s_i^2 - z^2)``."""
    z = _as_complex(z)
    s = np.asarray(singular_values, dtype=float)
    return complex(np.mean(z / (s**2 - z**2)))


def tau_block(M) -> tuple[complex, complex]:
    """Normalized traces of the two diagonal blocks of a ``2N x 2N`` matrix."""
    M = np.asarray(M)
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n or n % 2:
        raise ValueError("tau_block needs a square matrix of even size")
    N = n // 2
    return (complex(np.trace(M[:N, :N]) / N),
            complex(np.trace(M[N:, N:]) / N))


def _class_average(values, labels):
    """Average the last axis over groups of equal ``labels``."""
    uniq, inv = np.unique(labels, return_inverse=True)
    out = np.empty_like(values)
    for g in range(uniq.size):
        sel = inv == g
        out[..., sel] = np.mean(values[..., sel], axis=-1, keepdims=True)
    return out


def _norm_2x2(d11, d12, d21, d22):
    """Largest spectral norm among the per-coordinate 2x2 blocks."""
    M = np.stack([np.stack([d11, d12], -1), np.stack([d21, d22], -1)], -2)
    return float(np.max(np.linalg.svd(M, compute_uv=False)[..., 0]))


def _G_bold(diag_vals, w):
    """Diagonals of the four blocks of the resolvent of [[0,D],[D,0]]."""
    den = diag_vals**2 - w**2
    return w / den, diag_vals / den, diag_vals / den, w / den


# ---------------------------------------------------------------------------
# per-draw statistics of the sum model

def _draw_statistics(spec: ModelSpec, z: complex, seed, raw: bool,
                     want_sd: bool, want_sub: bool):
    rng = np.random.default_rng(seed)
    T, B = spec.T_singular_values, spec.B_singular_values
    N = spec.N
    U, V, P, s, Q = _sum_model_parts(spec, rng)
    den = s**2 - z**2
    Dz, Ds = z / den, s / den
    out = {}

    m_H = np.mean(Dz)
    # a_i = p_i* diag(T) q_i,  b_i = p_i* Bt q_i with Bt = U diag(B) V*
    a = np.einsum('ki,k,ki->i', P.conj(), T, Q)
    PU = U.conj().T @ P                       # W* rotates to B coordinates
    QV = V.conj().T @ Q
    BtQ = U @ (B[:, None] * QV)               # Bt Q
    BtP = V @ (B[:, None] * PU)               # Bt* P
    b = np.einsum('ki,ki->i', P.conj(), BtQ)
    out['m_H'] = m_H
    out['f_A'] = np.mean(Ds * a.real)
    out['f_B'] = np.mean(Ds * b.real)

    absP, absQ = np.abs(P)**2, np.abs(Q)**2
    if want_sub:
        PQ = P * Q.conj()
        out['gA'] = np.stack([absP @ Dz, PQ @ Ds, PQ.conj() @ Ds,
                              absQ @ Dz])
        PUQV = PU * QV.conj()
        out['gB'] = np.stack([np.abs(PU)**2 @ Dz, PUQV @ Ds,
                              PUQV.conj() @ Ds, np.abs(QV)**2 @ Dz])
        if raw:
            G11 = (P * Dz) @ P.conj().T
            G12 = (P * Ds) @ Q.conj().T
            G22 = (Q * Dz) @ Q.conj().T
            G21 = (Q * Ds) @ P.conj().T
            G = np.block([[G11, G12], [G21, G22]])
            W = np.zeros((2 * N, 2 * N), dtype=complex)
            W[:N, :N], W[N:, N:] = U, V
            out['G'] = G
            out['GW'] = W.conj().T @ G @ W
    if want_sd:
        c1 = np.sum(Ds * b.conj()) / N
        c2 = np.sum(Ds * b) / N
        d11 = absP @ Dz
        d22 = absQ @ Dz
        d12 = (P * Q.conj()) @ Ds
        d21 = (Q * P.conj()) @ Ds
        bg21 = (BtQ * P.conj()) @ Ds
        bg22 = (BtQ * Q.conj()) @ Dz
        bg11 = (BtP * P.conj()) @ Dz
        bg12 = (BtP * Q.conj()) @ Ds
        out['sd'] = np.stack([m_H * bg21 - c1 * d11, m_H * bg22 - c1 * d12,
                              m_H * bg11 - c2 * d21, m_H * bg12 - c2 * d22])
        if raw:
            G11 = (P * Dz) @ P.conj().T
            G12 = (P * Ds) @ Q.conj().T
            G21 = (Q * Ds) @ P.conj().T
            G22 = (Q * Dz) @ Q.conj().T
            G = np.block([[G11, G12], [G21, G22]])
            Bt = (U * B) @ V.conj().T
            Bb = np.block([[np.zeros((N, N)), Bt], [Bt.conj().T,
                                                   np.zeros((N, N))]])
            C = np.concatenate([np.full(N, c1), np.full(N, c2)])
            out['sd_raw'] = m_H * (Bb @ G) - C[:, None] * G
    return out


def _run_draws(spec, z, samples, raw, want_sd, want_sub, threads):
    seeds = sample_seeds(spec.seed, samples)

    def one(sd):
        return _draw_statistics(spec, z, sd, raw, want_sd, want_sub)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, seeds))
    return [one(sd) for sd in seeds]


def _jackknife(values, stat):
    """Jackknife standard error of ``stat`` applied to per-draw values."""
    n = values.shape[0]
    total = values.sum(axis=0)
    loo = np.array([stat((total - values[i]) / (n - 1)) for i in range(n)])
    mean = loo.mean(axis=0)
    return float(np.sqrt((n - 1) / n * np.sum(np.abs(loo - mean)**2,
                                              axis=0)))


def estimate_subordination(spec: ModelSpec, z, samples: int, rng=None, *,
                           raw: bool = False, threads: int = 1,
                           im_guard_C: float = 1.0) -> SubordinationEstimate:
    """Empirical subordination functions of the sum model at ``z``.

    ``S_B = -avg f_B / avg m_H`` and ``S_A = -avg f_A / avg m_H`` with
    ``f_X = (1/2N) Tr(G_H X)``.  The projected residuals compare the
    block diagonals of ``avg G_H`` (and of ``avg W* G_H W`` for ``B``,
    ``W = diag(U, V)``) with ``G_A(z + S_B)`` and ``G_B(z + S_A)``.
    ``raw=True`` also computes the full-matrix operator norms.

    ``rng`` may be an integer seed overriding ``spec.seed``.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    if not spec.is_sum:
        raise ValueError("subordination estimates need a sum model")
    z = _as_complex(z)
    if rng is not None:
        spec = ModelSpec(spec.N, spec.T_singular_values,
                         spec.B_singular_values, int(rng), spec.K_max)
    draws = _run_draws(spec, z, samples, raw, False, True, threads)
    N = spec.N
    T, B = spec.T_singular_values, spec.B_singular_values

    scal = np.array([[d['m_H'], d['f_A'], d['f_B']] for d in draws])
    m, fA, fB = scal.mean(axis=0)
    if abs(m) < 1e-12:
        raise ZeroDivisionError("average m_H vanishes")
    S_B, S_A = -fB / m, -fA / m
    defect = abs(m + 1.0 / (z + S_A + S_B))

    gA = np.mean([d['gA'] for d in draws], axis=0)
    gB = np.mean([d['gB'] for d in draws], axis=0)
    gA_proj = _class_average(gA, T)
    gB_proj = _class_average(gB, B)
    refA = _G_bold(T, z + S_B)
    refB = _G_bold(B, z + S_A)
    resA = _norm_2x2(*(gA_proj - np.stack(refA)))
    resB = _norm_2x2(*(gB_proj - np.stack(refB)))

    raw_A = raw_B = None
    if raw:
        G = np.mean([d['G'] for d in draws], axis=0)
        GW = np.mean([d['GW'] for d in draws], axis=0)
        raw_A = float(np.linalg.norm(G - _dense_G_bold(T, z + S_B), 2))
        raw_B = float(np.linalg.norm(GW - _dense_G_bold(B, z + S_A), 2))

    mA = np.mean(refA[0])
    mB = np.mean(refB[0])
    p = z + S_A + S_B
    r_A = mA + 1.0 / p
    r_B = mB + 1.0 / p

    guard = -im_guard_C / (N * z.imag**7)
    ok = bool(S_A.imag >= guard and S_B.imag >= guard)

    se = {
        'm_H': _jackknife(scal[:, 0], lambda v: v),
        'f_A': _jackknife(scal[:, 1], lambda v: v),
        'f_B': _jackknife(scal[:, 2], lambda v: v),
        'S_A': _jackknife(scal, lambda v: -v[1] / v[0]),
        'S_B': _jackknife(scal, lambda v: -v[2] / v[0]),
    }
    return SubordinationEstimate(
        z, N, samples, complex(S_A), complex(S_B), complex(m), complex(fA),
        complex(fB), resA, resB, raw_A, raw_B, complex(r_A), complex(r_B),
        complex(2.0 * r_B), float(defect), guard, ok, se, spec.seed)


def _dense_G_bold(d, w):
    g11, g12, g21, g22 = _G_bold(d, w)
    return np.block([[np.diag(g11), np.diag(g12)],
                     [np.diag(g21), np.diag(g22)]])


def schwinger_dyson_residual(spec: ModelSpec, z, samples: int, rng=None, *,
                             raw: bool = False,
                             threads: int = 1) -> SchwingerDysonResult:
    """Norm of the Monte Carlo average of
    ``tau(G_H) Bt G_H - tau(G_H Bt) G_H`` (``Bt`` the Hermitized
    ``U diag(B) V*``), whose expectation vanishes.

    ``residual`` uses the block-diagonal projection averaged over
    coordinates with equal ``T`` value (a linear map, so still mean zero);
    ``raw=True`` adds the full-matrix operator norm.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    if not spec.is_sum:
        raise ValueError("the Schwinger-Dyson residual needs a sum model")
    z = _as_complex(z)
    if rng is not None:
        spec = ModelSpec(spec.N, spec.T_singular_values,
                         spec.B_singular_values, int(rng), spec.K_max)
    draws = _run_draws(spec, z, samples, raw, True, False, threads)
    T = spec.T_singular_values
    vals = _class_average(np.array([d['sd'] for d in draws]), T)

    def stat(v):
        return _norm_2x2(*v)
    res = stat(vals.mean(axis=0))
    se = _jackknife(vals, stat) if samples > 1 else math.nan
    raw_res = None
    if raw:
        Z = np.mean([d['sd_raw'] for d in draws], axis=0)
        raw_res = float(np.linalg.norm(Z, 2))
    return SchwingerDysonResult(res, se, raw_res, samples, spec.N)


def block_structure_defect(spec: ModelSpec, z, samples: int, rng=None,
                           threads: int = 1) -> float:
    """Largest off-diagonal entry inside the four blocks of ``avg G_H``."""
    z = _as_complex(z)
    if rng is not None:
        spec = ModelSpec(spec.N, spec.T_singular_values,
                         spec.B_singular_values, int(rng), spec.K_max)
    N = spec.N
    seeds = sample_seeds(spec.seed, samples)

    def one(sd):
        U, V, P, s, Q = _sum_model_parts(spec, np.random.default_rng(sd))
        den = s**2 - z**2
        Dz, Ds = z / den, s / den
        return np.block([[(P * Dz) @ P.conj().T, (P * Ds) @ Q.conj().T],
                         [(Q * Ds) @ P.conj().T, (Q * Dz) @ Q.conj().T]])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            Gs = list(ex.map(one, seeds))
    else:
        Gs = [one(sd) for sd in seeds]
    G = np.mean(Gs, axis=0)
    worst = 0.0
    for blk in (G[:N, :N], G[:N, N:], G[N:, :N], G[N:, N:]):
        off = blk - np.diag(np.diag(blk))
        worst = max(worst, float(np.max(np.abs(off))))
    return worst


def delocalization_stats(sample: SpectralSample, window
                         ) -> tuple[float, float, int]:
    """Largest squared singular-vector component over singular values in
    ``window = (lo, hi)``; ``(-1, -1, 0)`` if the window is empty."""
    if sample.left_vectors is None:
        raise ValueError("sample carries no singular vectors")
    lo, hi = window
    sel = (sample.singular_values >= lo) & (sample.singular_values <= hi)
    if not np.any(sel):
        return -1.0, -1.0, 0
    u = float(np.max(np.abs(sample.left_vectors[:, sel])**2))
    v = float(np.max(np.abs(sample.right_vectors[:, sel])**2))
    return u, v, int(np.count_nonzero(sel))


def smallest_sv_probe(spec: ModelSpec, z0: complex, seeds: int,
                      threads: int = 1, tiny: float = 1e-12) -> dict:
    """Quantiles of ``s_min(z0 - A)`` over independent draws of ``A``."""
    children = sample_seeds(spec.seed, seeds)

    def one(sd):
        smp = sample_model(spec, np.random.default_rng(sd),
                           eigenvalues=False, shift=z0)
        return float(smp.singular_values[-1])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            vals = np.array(list(ex.map(one, children)))
    else:
        vals = np.array([one(sd) for sd in children])
    qs = (0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 1.0)
    return {
        'z0': complex(z0),
        'seeds': int(seeds),
        'values': vals,
        'quantiles': {q: float(np.quantile(vals, q)) for q in qs},
        'flagged': [int(i) for i in np.nonzero(vals < tiny)[0]],
    }


# ---------------------------------------------------------------------------
# persistence

def spectral_sample_to_csv(sample: SpectralSample, path=None) -> str:
    """Rows ``index, re_lambda, im_lambda, s`` (12 significant digits)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(['index', 're_lambda', 'im_lambda', 's'])
    lam = sample.eigenvalues
    for i, s in enumerate(sample.singular_values):
        if lam is None:
            re = im = ''
        else:
            re, im = f"{lam[i].real:.12g}", f"{lam[i].imag:.12g}"
        w.writerow([i, re, im, f"{s:.12g}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, 'w', newline='') as fh:
            fh.write(text)
    return text


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def estimate_to_record(est) -> dict:
    """JSON-ready dict of a :class:`SubordinationEstimate` or
    :class:`SchwingerDysonResult`."""
    return _jsonable(asdict(est))
