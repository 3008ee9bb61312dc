"""
Command line interface: ``freering run | verify | list-laws``.

Configs are TOML files::

    [run]
    seed = 7
    out = "results"

    [tolerances]          # verify only; overrides DEFAULT_TOLERANCES
    freeconv = 1e-8

    [verify]
    bundle = "analytic"

    [[experiment]]
    kind = "simulate-spectrum"
    name = "annulus"
    law = { name = "uniform", lo = 0.5, hi = 4.0 }
    N = [500]

Unknown keys are errors.  Every artifact name carries the first 12 hex
digits of the config hash.

Exit codes: 0 pass, 1 criterion failure, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field, asdict

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import measures as ms
from .freeconv import (solve_subordination_array, measure_transform,
                       SubordinationError)
from .singlering import annulus_bounds, ring_law, ring_law_to_csv
from .rmt import (ModelSpec, sample_model, sample_seeds, quantile_points,
                  estimate_subordination, schwinger_dyson_residual,
                  delocalization_stats, spectral_sample_to_csv)
from .locallaw import (local_srt_statistic, local_sv_statistic,
                       hadamard_check, radial_bump, REPORT_COLUMNS)
from .checks import (CheckContext, BUNDLES, CRITERIA, DEFAULT_TOLERANCES,
                     run_criterion, wigner_eigenvalues)
from .svg import scatter_svg, line_svg

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
N_MAX = 2000

LAWS = {
    'semicircle': {'radius': 2.0},
    'arcsine': {'half_width': 2.0},
    'uniform': {'lo': None, 'hi': None},
    'bernoulli': {'c': 1.0},
    'delta': {'x': 0.0},
    'atoms': {'locs': None, 'weights': None},
}

_COMMON = {'kind', 'name', 'seed', 'svg', 'tolerance'}
KINDS = {
    'freeconv-check': {'mu', 'nu', 'E', 'eta'},
    'ring-law': {'law', 'n_grid'},
    'simulate-spectrum': {'law', 'N', 'samples'},
    'subordination-residual': {'T', 'B', 'N', 'z', 'samples'},
    'schwinger-dyson': {'T', 'B', 'N', 'z', 'samples'},
    'local-srt': {'law', 'N', 'z0', 'eps', 'samples'},
    'local-sv': {'a', 'b', 'N', 'E', 'eta', 'samples'},
    'delocalization': {'T', 'B', 'N', 'window', 'samples'},
    'hadamard': {'N', 'a'},
}
_LAW_KEYS = {'law', 'mu', 'nu', 'T', 'B', 'a', 'b'}
_TOP = {'run', 'verify', 'tolerances', 'experiment'}
_RUN_KEYS = {'seed', 'threads', 'out', 'ci'}
_VERIFY_KEYS = {'bundle', 'criteria'}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing

def _locate(text: str, key: str, section: str | None = None,
            index: int = 0) -> int | None:
    """Line number (1-based) of ``key = ...`` inside a section."""
    lines = text.splitlines()
    start, seen = 0, -1
    if section is not None:
        hdr = re.compile(r'^\s*\[\[\s*' + re.escape(section) + r'\s*\]\]'
                         if section == 'experiment' else
                         r'^\s*\[\s*' + re.escape(section) + r'\s*\]')
        for i, ln in enumerate(lines):
            if hdr.match(ln):
                seen += 1
                if seen == index:
                    start = i
                    break
        else:
            return None
        if key is None:
            return start + 1
    pat = re.compile(r'^\s*"?' + re.escape(key) + r'"?\s*=')
    if section is None:
        # top-level keys may also be table headers
        pat = re.compile(pat.pattern + r'|^\s*\[\[?\s*' + re.escape(key)
                         + r'\s*\]')
    for i in range(start, len(lines)):
        if i > start and section is not None and \
                re.match(r'^\s*\[', lines[i]):
            break
        if pat.match(lines[i]):
            return i + 1
    return None


def _err(path, text, msg, key=None, section=None, index=0):
    line = _locate(text, key, section, index) if text is not None else None
    where = f"{path}:{line}" if line else f"{path}"
    return ConfigError(f"{where}: {msg}")


@dataclass
class Config:
    path: str
    text: str
    data: dict
    hash: str
    seed: int
    threads: int
    out: str
    ci: bool
    experiments: list = field(default_factory=list)


def config_hash(payload: str) -> str:
    return hashlib.sha256(payload.encode()).hexdigest()


def load_config(path: str, seed_override: int | None = None) -> Config:
    try:
        with open(path, 'rb') as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})")
    text = raw.decode('utf-8', errors='replace')
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r'line (\d+)', str(exc))
        where = f"{path}:{m.group(1)}" if m else path
        raise ConfigError(f"{where}: {exc}")
    for k in data:
        if k not in _TOP:
            raise _err(path, text, f"unknown key '{k}'", k)
    run = data.get('run', {})
    if not isinstance(run, dict):
        raise _err(path, text, "[run] must be a table", 'run')
    for k in run:
        if k not in _RUN_KEYS:
            raise _err(path, text, f"unknown key '{k}' in [run]", k, 'run')
    ci = bool(run.get('ci', False))
    if 'seed' not in run and seed_override is None and ci:
        raise _err(path, text, "ci mode requires an explicit seed", None,
                   'run')
    seed = seed_override if seed_override is not None else run.get('seed', 0)
    if not isinstance(seed, int) or seed < 0:
        raise _err(path, text, "seed must be a nonnegative integer", 'seed',
                   'run')
    threads = run.get('threads', 1)
    if not isinstance(threads, int) or threads < 1:
        raise _err(path, text, "threads must be a positive integer",
                   'threads', 'run')
    ver = data.get('verify', {})
    for k in ver:
        if k not in _VERIFY_KEYS:
            raise _err(path, text, f"unknown key '{k}' in [verify]", k,
                       'verify')
    for k, v in data.get('tolerances', {}).items():
        if k not in DEFAULT_TOLERANCES:
            raise _err(path, text, f"unknown tolerance '{k}'", k,
                       'tolerances')
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise _err(path, text, f"tolerance '{k}' must be a number", k,
                       'tolerances')
    exps = data.get('experiment', [])
    if not isinstance(exps, list):
        raise _err(path, text, "experiment must be an array of tables "
                   "([[experiment]])", 'experiment')
    names = set()
    for i, exp in enumerate(exps):
        _check_experiment(path, text, exp, i)
        nm = exp.get('name', f"{exp['kind']}-{i}")
        if nm in names:
            raise _err(path, text, f"duplicate experiment name '{nm}'",
                       'name', 'experiment', i)
        names.add(nm)
        exp['name'] = nm
    payload = json.dumps({'data': data, 'seed': seed}, sort_keys=True,
                         default=str)
    return Config(path, text, data, config_hash(payload), int(seed),
                  int(threads), str(run.get('out', 'results')), ci, exps)


def _check_experiment(path, text, exp, i):
    kind = exp.get('kind')
    if kind not in KINDS:
        raise _err(path, text, f"unknown experiment kind {kind!r} "
                   f"(expected one of {', '.join(sorted(KINDS))})",
                   'kind' if kind is not None else None, 'experiment', i)
    allowed = KINDS[kind] | _COMMON
    for k, v in exp.items():
        if k not in allowed:
            raise _err(path, text, f"unknown key '{k}' for kind '{kind}'", k,
                       'experiment', i)
        if k in _LAW_KEYS and not (kind == 'hadamard'):
            try:
                law_from_spec(v)
            except (ConfigError, ValueError, TypeError) as exc:
                raise _err(path, text, f"bad law for '{k}': {exc}", k,
                           'experiment', i)
    Ns = exp.get('N', [])
    Ns = Ns if isinstance(Ns, list) else [Ns]
    for N in Ns:
        if not isinstance(N, int) or not 2 <= N <= N_MAX:
            raise _err(path, text, f"N must be an integer in [2, {N_MAX}]",
                       'N', 'experiment', i)


def law_from_spec(spec) -> ms.Measure:
    """Build a measure from ``{name = ..., <params>}``."""
    if not isinstance(spec, dict) or 'name' not in spec:
        raise ConfigError("law must be a table with a 'name' key")
    name = spec['name']
    if name not in LAWS:
        raise ConfigError(f"unknown law {name!r} (known: "
                          f"{', '.join(LAWS)})")
    params = {k: v for k, v in spec.items() if k != 'name'}
    for k in params:
        if k not in LAWS[name]:
            raise ConfigError(f"unknown parameter '{k}' for law '{name}'")
    full = dict(LAWS[name])
    full.update(params)
    missing = [k for k, v in full.items() if v is None]
    if missing:
        raise ConfigError(f"law '{name}' needs {', '.join(missing)}")
    if name == 'semicircle':
        return ms.semicircle(float(full['radius']))
    if name == 'arcsine':
        return ms.arcsine(float(full['half_width']))
    if name == 'uniform':
        return ms.uniform(float(full['lo']), float(full['hi']))
    if name == 'bernoulli':
        return ms.symmetric_bernoulli(float(full['c']))
    if name == 'delta':
        return ms.delta(float(full['x']))
    return ms.atomic([float(x) for x in full['locs']],
                     [float(w) for w in full['weights']])


def diagonal_values(spec, N: int) -> np.ndarray:
    """``N`` deterministic midpoint quantiles of a nonnegative law."""
    if spec.get('name') == 'uniform':
        return quantile_points(float(spec['lo']), float(spec['hi']), N)
    m = law_from_spec(spec)
    x, w = m.points
    order = np.argsort(x, kind='stable')
    x, w = x[order], w[order]
    cdf = np.cumsum(w) / np.sum(w)
    q = (np.arange(N) + 0.5) / N
    vals = x[np.minimum(np.searchsorted(cdf, q, side='left'), x.size - 1)]
    if np.any(vals < 0):
        raise ConfigError("singular-value law must live on [0, inf)")
    return vals


def _complex(v, default):
    if v is None:
        return complex(default)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)):
        return complex(v)
    raise ConfigError(f"expected [re, im], got {v!r}")


def _as_list(v, default):
    if v is None:
        return list(default)
    return list(v) if isinstance(v, list) else [v]


# ---------------------------------------------------------------------------
# artifacts

@dataclass
class RunRecord:
    config_hash: str
    version: str
    wall_time: float
    threads: int
    seeds: dict
    experiments: list


class _Sink:
    """Writes artifacts whose names embed the config hash."""

    def __init__(self, out, chash):
        self.out = out
        self.tag = chash[:12]
        self.chash = chash
        self.files = []
        os.makedirs(out, exist_ok=True)

    def path(self, stem, ext):
        return os.path.join(self.out, f"{stem}-{self.tag}.{ext}")

    def write(self, stem, ext, text):
        p = self.path(stem, ext)
        with open(p, 'w', newline='') as fh:
            fh.write(text)
        self.files.append(os.path.basename(p))
        return p

    def csv(self, stem, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator='\n')
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        return self.write(stem, 'csv', buf.getvalue())

    def svg(self, stem, text):
        return self.write(stem, 'svg', text)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (bool, np.bool_)):
        return 'true' if v else 'false'
    return v


# ---------------------------------------------------------------------------
# experiments

def _exp_seed(cfg, exp, override):
    if override is not None:
        return cfg.seed
    return int(exp.get('seed', cfg.seed))


def _oracle(mu_spec, nu_spec):
    a, b = mu_spec.get('name'), nu_spec.get('name')
    if a == b == 'bernoulli' and mu_spec.get('c', 1.0) == nu_spec.get(
            'c', 1.0):
        c = float(mu_spec.get('c', 1.0))
        return lambda z: -1.0 / (np.sqrt(z - 2 * c) * np.sqrt(z + 2 * c))
    if a == b == 'semicircle' and mu_spec.get('radius', 2.0) == nu_spec.get(
            'radius', 2.0):
        R = float(mu_spec.get('radius', 2.0)) * math.sqrt(2.0)
        return lambda z: 2.0 * (-z + np.sqrt(z - R) * np.sqrt(z + R)) / R**2
    for d, o in ((mu_spec, nu_spec), (nu_spec, mu_spec)):
        if d.get('name') == 'delta':
            other = law_from_spec(o)
            x = float(d.get('x', 0.0))
            return lambda z, other=other, x=x: ms.stieltjes(other, z - x)
    return None


def _x_freeconv(cfg, exp, sink, seed, threads):
    mu, nu = law_from_spec(exp['mu']), law_from_spec(exp['nu'])
    E = np.asarray(_as_list(exp.get('E'), np.arange(-3.0, 3.01, 0.5)), float)
    eta = np.asarray(_as_list(exp.get('eta'), [0.1, 0.5, 1.0]), float)
    if np.any(eta <= 0):
        raise ConfigError("eta values must be > 0")
    z = (E[:, None] + 1j * eta[None, :]).ravel()
    st = solve_subordination_array(measure_transform(mu),
                                   measure_transform(nu), z)
    oracle = _oracle(exp['mu'], exp['nu'])
    err = np.abs(st.m - oracle(z)) if oracle else np.full(z.shape, np.nan)
    tol = float(exp.get('tolerance', 1e-8))
    rows = [(float(v.real), float(v.imag), float(m.real), float(m.imag),
             int(it), float(e) if oracle else '')
            for v, m, it, e in zip(z, st.m, st.iterations, err)]
    sink.csv(exp['name'], ['E', 'eta', 're_m', 'im_m', 'iterations',
                           'abs_err'], rows)
    numeric = bool(np.any(st.status != 0))
    passed = (not oracle) or bool(np.all(err <= tol))
    return {'max_abs_err': float(np.max(err)) if oracle else None,
            'tolerance': tol, 'nonconverged': int(np.sum(st.status != 0))
            }, passed, numeric


def _x_ring(cfg, exp, sink, seed, threads):
    nu = law_from_spec(exp['law'])
    ring = ring_law(nu, n_grid=int(exp.get('n_grid', 201)), threads=threads)
    sink.write(exp['name'], 'csv', ring_law_to_csv(ring))
    if exp.get('svg', True):
        sink.svg(exp['name'], line_svg(
            ring.r_grid, [ring.density], title='radial density',
            xlabel='r', ylabel='density', meta=sink.chash))
    tol = float(exp.get('tolerance', 0.02))
    return {'a': ring.a, 'b': ring.b,
            'normalization_defect': ring.normalization_defect,
            'min_density': float(np.min(ring.density))}, \
        ring.normalization_defect <= tol, False


def _x_spectrum(cfg, exp, sink, seed, threads):
    spec_law = exp['law']
    nu = law_from_spec(spec_law)
    a, b = annulus_bounds(nu)
    out = {'a': a, 'b': b, 'files': []}
    for N in _as_list(exp.get('N'), [500]):
        spec = ModelSpec(N, diagonal_values(spec_law, N), seed=seed)
        samples = int(exp.get('samples', 1))
        children = [seed] if samples == 1 else sample_seeds(seed, samples)
        for k, sd in enumerate(children):
            smp = sample_model(spec, np.random.default_rng(sd))
            stem = f"{exp['name']}-N{N}" + (f"-s{k}" if samples > 1 else '')
            sink.write(stem, 'csv', spectral_sample_to_csv(smp))
            if k == 0 and exp.get('svg', True):
                sink.svg(stem, scatter_svg(
                    smp.eigenvalues, circles=(a, b) if a > 0 else (b,),
                    title=f"eigenvalues, N = {N}", meta=sink.chash))
    return out, True, False


def _model(exp, N, seed):
    T = diagonal_values(exp['T'], N)
    B = diagonal_values(exp['B'], N) if 'B' in exp else None
    return ModelSpec(N, T, B, seed=seed)


def _x_subordination(cfg, exp, sink, seed, threads):
    z = _complex(exp.get('z'), 1j)
    rows, res = [], []
    Ns = _as_list(exp.get('N'), [100, 200])
    for N in Ns:
        est = estimate_subordination(_model(exp, N, seed), z,
                                     int(exp.get('samples', 100)),
                                     threads=threads)
        res.append(est.resolvent_residual_A)
        rows.append((N, est.resolvent_residual_A, est.resolvent_residual_B,
                     est.consistency_defect, est.S_A_emp.real,
                     est.S_A_emp.imag, est.S_B_emp.real, est.S_B_emp.imag,
                     float(est.standard_errors.get('S_A', math.nan))))
    sink.csv(exp['name'], ['N', 'residual_A', 'residual_B',
                           'consistency_defect', 're_S_A', 'im_S_A',
                           're_S_B', 'im_S_B', 'se_S_A'], rows)
    if exp.get('svg', True) and len(Ns) > 1:
        sink.svg(exp['name'], line_svg(
            Ns, [res], title='projected residual vs N', xlabel='N',
            ylabel='residual_A', logx=True, logy=True, meta=sink.chash,
            markers=True))
    tol = float(exp.get('tolerance', 1e-10))
    worst = max(r[3] for r in rows)
    return {'residual_A': res, 'max_defect': worst}, worst <= tol, False


def _x_sd(cfg, exp, sink, seed, threads):
    z = _complex(exp.get('z'), 1j)
    rows = []
    Ns = _as_list(exp.get('N'), [100, 200])
    for N in Ns:
        sd = schwinger_dyson_residual(_model(exp, N, seed), z,
                                      int(exp.get('samples', 100)),
                                      threads=threads)
        rows.append((N, sd.residual, sd.standard_error))
    sink.csv(exp['name'], ['N', 'residual', 'standard_error'], rows)
    if exp.get('svg', True) and len(Ns) > 1 and all(r[1] > 0 for r in rows):
        sink.svg(exp['name'], line_svg(
            Ns, [[r[1] for r in rows]], title='Schwinger-Dyson residual',
            xlabel='N', ylabel='residual', logx=True, logy=True,
            meta=sink.chash, markers=True))
    return {'residual': [r[1] for r in rows]}, True, False


def _report_rows(reports):
    return [r.row() for r in reports]


def _x_srt(cfg, exp, sink, seed, threads):
    law = exp['law']
    ring = ring_law(law_from_spec(law), threads=threads)
    z0 = _complex(exp.get('z0'), 1.9)
    eps = float(exp.get('eps', 0.5))
    tol = float(exp.get('tolerance', 0.25))
    reports = []
    for N in _as_list(exp.get('N'), [1000]):
        spec = ModelSpec(N, diagonal_values(law, N), seed=seed)
        for k, sd in enumerate(sample_seeds(seed, int(exp.get('samples',
                                                              10)))):
            smp = sample_model(spec, np.random.default_rng(sd))
            reports.append(local_srt_statistic(
                smp, ring, z0, eps, radial_bump(), tol=tol,
                seeds=(seed, k)))
    sink.csv(exp['name'], REPORT_COLUMNS, _report_rows(reports))
    return {'passed': sum(r.passed for r in reports),
            'total': len(reports)}, all(r.passed for r in reports), False


def _x_sv(cfg, exp, sink, seed, threads):
    nu_a, nu_b = law_from_spec(exp['a']), law_from_spec(exp['b'])
    E = float(exp.get('E', 1.0))
    eta = float(exp.get('eta', 0.05))
    reports = []
    for N in _as_list(exp.get('N'), [1000]):
        spec = ModelSpec(N, diagonal_values(exp['a'], N),
                         diagonal_values(exp['b'], N), seed=seed)
        for k, sd in enumerate(sample_seeds(seed, int(exp.get('samples',
                                                              10)))):
            smp = sample_model(spec, np.random.default_rng(sd))
            reports.append(local_sv_statistic(
                smp.singular_values, nu_a, nu_b, E, eta,
                tol=exp.get('tolerance'), seeds=(seed, k)))
    sink.csv(exp['name'], REPORT_COLUMNS, _report_rows(reports))
    return {'passed': sum(r.passed for r in reports),
            'total': len(reports)}, all(r.passed for r in reports), False


def _x_deloc(cfg, exp, sink, seed, threads):
    window = tuple(float(x) for x in exp.get('window', [0.8, 1.2]))
    rows = []
    for N in _as_list(exp.get('N'), [500]):
        spec = _model(exp, N, seed)
        for k, sd in enumerate(sample_seeds(seed, int(exp.get('samples',
                                                              1)))):
            smp = sample_model(spec, np.random.default_rng(sd),
                               vectors=True)
            u, v, c = delocalization_stats(smp, window)
            rows.append((N, k, u, v, c))
    sink.csv(exp['name'], ['N', 'sample', 'max_left', 'max_right',
                           'count'], rows)
    tol = float(exp.get('tolerance', 0.05))
    worst = max(max(r[2], r[3]) for r in rows)
    return {'max_component': worst}, worst <= tol, False


def _x_hadamard(cfg, exp, sink, seed, threads):
    a = float(exp.get('a', 1.0))
    sc = ms.semicircle(2.0)
    rows, ok = [], True
    for N in _as_list(exp.get('N'), [2000]):
        emp = ms.empirical_measure(wigner_eigenvalues(N, seed))
        res = hadamard_check(
            lambda z: ms.stieltjes(emp, z) - ms.stieltjes(sc, z), a, None,
            2.0)
        ok = ok and bool(res.holds)
        rows.append((N, a, res.delta, res.delta0,
                     res.r if res.r is not None else '',
                     res.inner_bound if res.inner_bound is not None else '',
                     res.inner_sup if res.inner_sup is not None else '',
                     bool(res.holds)))
    sink.csv(exp['name'], ['N', 'a', 'delta', 'delta0', 'r', 'bound',
                           'inner_sup', 'holds'], rows)
    return {'holds': ok}, ok, False


RUNNERS = {
    'freeconv-check': _x_freeconv, 'ring-law': _x_ring,
    'simulate-spectrum': _x_spectrum,
    'subordination-residual': _x_subordination, 'schwinger-dyson': _x_sd,
    'local-srt': _x_srt, 'local-sv': _x_sv, 'delocalization': _x_deloc,
    'hadamard': _x_hadamard,
}


def _write_record(sink, record):
    artifacts = sorted(sink.files)
    rec = sink.write('run_record', 'json',
                     json.dumps(asdict(record), indent=2,
                                default=_json_default) + '\n')
    manifest = {'config_hash': sink.chash, 'version': __version__,
                'record': os.path.basename(rec), 'artifacts': artifacts}
    with open(os.path.join(sink.out, 'manifest.json'), 'w') as fh:
        json.dump(manifest, fh, indent=2)
        fh.write('\n')


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = args.out or cfg.out
    threads = args.threads or cfg.threads
    sink = _Sink(out, cfg.hash)
    t0 = time.perf_counter()
    entries, seeds = [], {}
    code = EXIT_OK
    for exp in cfg.experiments:
        seed = _exp_seed(cfg, exp, args.seed)
        seeds[exp['name']] = seed
        n_before = len(sink.files)
        entry = {'name': exp['name'], 'kind': exp['kind'], 'seed': seed}
        try:
            summary, passed, numeric = RUNNERS[exp['kind']](
                cfg, exp, sink, seed, threads)
            entry.update(summary=summary, passed=bool(passed),
                         status='numeric-failure' if numeric else 'ok')
            if numeric:
                code = EXIT_NUMERIC
            elif not passed and code == EXIT_OK:
                code = EXIT_FAIL
        except ConfigError:
            raise
        except (ArithmeticError, SubordinationError, np.linalg.LinAlgError,
                ValueError) as exc:
            entry.update(status='numeric-failure', passed=False,
                         error=f"{type(exc).__name__}: {exc}")
            code = EXIT_NUMERIC
        entry['artifacts'] = sink.files[n_before:]
        entries.append(entry)
        if not args.quiet:
            print(f"{exp['name']} [{exp['kind']}]: {entry['status']}"
                  + ('' if entry.get('passed', True) else ' (check failed)'))
    record = RunRecord(cfg.hash, __version__, time.perf_counter() - t0,
                       threads, seeds, entries)
    _write_record(sink, record)
    return code


def cmd_verify(args) -> int:
    tolerances = dict(DEFAULT_TOLERANCES)
    bundle, criteria, seed, out = None, None, 0, args.out
    chash_src = {}
    threads = args.threads or 1
    if args.config:
        cfg = load_config(args.config, args.seed)
        ver = cfg.data.get('verify', {})
        bundle = ver.get('bundle')
        criteria = ver.get('criteria')
        tolerances.update(cfg.data.get('tolerances', {}))
        seed = cfg.seed
        out = out or cfg.out
        threads = args.threads or cfg.threads
        chash_src = cfg.data
    if args.seed is not None:
        seed = args.seed
    if args.bundle:
        bundle = args.bundle
    if bundle is None and criteria is None:
        raise ConfigError("verify needs --bundle or [verify] bundle/criteria")
    if bundle is not None and bundle not in BUNDLES:
        raise ConfigError(f"unknown bundle {bundle!r} (known: "
                          f"{', '.join(BUNDLES)})")
    keys = list(criteria) if criteria is not None else list(BUNDLES[bundle])
    for k in keys:
        if k not in CRITERIA:
            raise ConfigError(f"unknown criterion {k!r}")
    out = out or 'results'
    payload = json.dumps({'data': chash_src, 'bundle': bundle,
                          'criteria': keys, 'seed': seed,
                          'tolerances': tolerances}, sort_keys=True,
                         default=str)
    chash = config_hash(payload)
    sink = _Sink(out, chash)
    ctx = CheckContext(seed=seed, threads=threads, tolerances=tolerances,
                       out_dir=out)
    t0 = time.perf_counter()
    results = []
    for k in keys:
        res = run_criterion(k, ctx)
        results.append(res)
        if not args.quiet:
            print(res.line(), flush=True)
    sink.csv('verify', ['criterion', 'name', 'value', 'threshold', 'pass'],
             [(r.number, r.name, repr(float(r.value)),
               repr(float(r.threshold)), r.passed) for r in results])
    for r in results:
        for a in r.artifacts:
            sink.files.append(os.path.basename(a))
    n_pass = sum(r.passed for r in results)
    if not args.quiet:
        print(f"{n_pass}/{len(results)} criteria passed")
    record = RunRecord(chash, __version__, time.perf_counter() - t0, threads,
                       {'seed': seed},
                       [dict(asdict(r), seconds=round(r.seconds, 3))
                        for r in results])
    _write_record(sink, record)
    if any(r.name == 'error' for r in results):
        return EXIT_NUMERIC
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


def cmd_list_laws(args) -> int:
    for name, params in LAWS.items():
        desc = ', '.join(f"{k}={v}" if v is not None else f"{k}=<required>"
                         for k, v in params.items())
        print(f"{name}: {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog='freering', description=(
        'Free convolution, Single Ring law and local-law experiments.'))
    p.add_argument('--version', action='version',
                   version=f'freering {__version__}')
    sub = p.add_subparsers(dest='command', required=True)

    def common(sp):
        sp.add_argument('--config', metavar='PATH')
        sp.add_argument('--out', metavar='DIR')
        sp.add_argument('--threads', type=int, metavar='INT')
        sp.add_argument('--seed', type=int, metavar='INT',
                        help='override every seed in the config')
        sp.add_argument('--quiet', action='store_true')
    r = sub.add_parser('run', help='run the experiments of a config')
    common(r)
    v = sub.add_parser('verify', help='run acceptance checks')
    common(v)
    v.add_argument('--bundle', metavar='NAME',
                   help=f"one of {', '.join(BUNDLES)}")
    sub.add_parser('list-laws', help='list the available measure laws')
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == 'list-laws':
            return cmd_list_laws(args)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        if args.command == 'run':
            if not args.config:
                raise ConfigError("run needs --config PATH")
            return cmd_run(args)
        return cmd_verify(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
