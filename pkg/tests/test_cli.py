import csv
import json
import re
from pathlib import Path

import numpy as np
import pytest

from freering.cli import main, load_config, ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / 'configs'


def run(*argv):
    return main([str(a) for a in argv])


def only(directory, pattern):
    hits = sorted(Path(directory).glob(pattern))
    assert len(hits) == 1, hits
    return hits[0]


def write(tmp_path, text, name='c.toml'):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_list_laws(capsys):
    assert run('list-laws') == 0
    out = capsys.readouterr().out
    for law in ('semicircle', 'arcsine', 'uniform', 'bernoulli', 'delta',
                'atoms'):
        assert law in out


def test_annulus_config(tmp_path):
    assert run('run', '--config', CONFIGS / 'annulus.toml', '--out',
               tmp_path, '--quiet') == 0
    rows = list(csv.DictReader(only(tmp_path, 'annulus-N500-*.csv').open()))
    assert len(rows) == 500
    lam = np.array([complex(float(r['re_lambda']), float(r['im_lambda']))
                    for r in rows])
    a, b = 2 ** 0.5, 2.4664
    assert np.mean((np.abs(lam) > a - 0.1) & (np.abs(lam) < b + 0.1)) >= 0.98
    svg = only(tmp_path, 'annulus-N500-*.svg').read_text()
    radii = re.findall(r'<title>r = ([0-9.]+)</title>', svg)
    assert radii == ['1.4142', '2.4664']
    manifest = json.loads((tmp_path / 'manifest.json').read_text())
    assert len(manifest['artifacts']) == 2
    assert (tmp_path / manifest['record']).exists()


def test_freeconv_config(tmp_path):
    assert run('run', '--config', CONFIGS / 'freeconv.toml', '--out',
               tmp_path, '--quiet') == 0
    for name in ('bernoulli-pair', 'semicircle-pair'):
        rows = list(csv.DictReader(only(tmp_path, f'{name}-*.csv').open()))
        assert len(rows) == 39
        assert max(float(r['abs_err']) for r in rows) <= 1e-8


def test_empty_config(tmp_path):
    assert run('run', '--config', CONFIGS / 'empty.toml', '--out', tmp_path,
               '--quiet') == 0
    manifest = json.loads((tmp_path / 'manifest.json').read_text())
    assert manifest['artifacts'] == []


def test_rerun_is_byte_identical(tmp_path):
    for d in ('a', 'b'):
        assert run('run', '--config', CONFIGS / 'annulus.toml', '--out',
                   tmp_path / d, '--quiet') == 0
    # the run record carries wall-clock timings; everything else must match
    manifest = json.loads((tmp_path / 'a' / 'manifest.json').read_text())
    for name in manifest['artifacts'] + ['manifest.json']:
        a, b = tmp_path / 'a' / name, tmp_path / 'b' / name
        assert a.read_bytes() == b.read_bytes()


def test_seed_override_changes_hash(tmp_path):
    run('run', '--config', CONFIGS / 'annulus.toml', '--out', tmp_path / 'a',
        '--quiet')
    run('run', '--config', CONFIGS / 'annulus.toml', '--out', tmp_path / 'b',
        '--seed', 8, '--quiet')
    a = only(tmp_path / 'a', 'annulus-*.csv')
    b = only(tmp_path / 'b', 'annulus-*.csv')
    assert a.name != b.name
    assert a.read_bytes() != b.read_bytes()


def test_tampered_tolerance_fails(tmp_path):
    assert run('verify', '--config', CONFIGS / 'tampered.toml', '--out',
               tmp_path, '--quiet') == 1
    rows = list(csv.reader(only(tmp_path, 'verify-*.csv').open()))
    crit1 = [r for r in rows[1:] if r[0] == '1']
    assert crit1 and crit1[0][-1] == 'false'


def test_unknown_bundle(tmp_path):
    assert run('verify', '--bundle', 'nonsense', '--out', tmp_path) == 2


def test_unknown_key_reports_line(tmp_path, capsys):
    path = write(tmp_path, '[run]\nseed = 1\n\n[[experiment]]\n'
                 'kind = "freeconv-check"\nmu = { name = "delta", x = 0.0 }\n'
                 'nu = { name = "delta", x = 1.0 }\nE = [0.0]\neta = [1.0]\n'
                 'colour = "red"\n')
    assert run('run', '--config', path, '--out', tmp_path / 'o') == 2
    err = capsys.readouterr().err
    assert 'colour' in err and 'c.toml:10:' in err


def test_unknown_top_level_table(tmp_path):
    path = write(tmp_path, '[runn]\nseed = 1\n')
    with pytest.raises(ConfigError, match=r'c\.toml:1:'):
        load_config(path)


def test_malformed_toml(tmp_path):
    path = write(tmp_path, '[run\nseed = 1\n')
    assert run('run', '--config', path, '--out', tmp_path / 'o') == 2


def test_ci_requires_seed(tmp_path):
    path = write(tmp_path, '[run]\nci = true\n')
    with pytest.raises(ConfigError):
        load_config(path)


def test_size_cap(tmp_path):
    path = write(tmp_path, '[run]\nseed = 1\n[[experiment]]\n'
                 'kind = "simulate-spectrum"\n'
                 'law = { name = "uniform", lo = 0.5, hi = 4.0 }\n'
                 'N = [5000]\n')
    assert run('run', '--config', path, '--out', tmp_path / 'o') == 2


def test_bad_threads(tmp_path):
    assert run('run', '--config', CONFIGS / 'empty.toml', '--out', tmp_path,
               '--threads', 0) == 2


def test_missing_config_argument():
    assert run('run') == 2


def test_unknown_law(tmp_path):
    path = write(tmp_path, '[run]\nseed = 1\n[[experiment]]\n'
                 'kind = "freeconv-check"\nmu = { name = "cauchy" }\n'
                 'nu = { name = "delta", x = 1.0 }\nE = [0.0]\neta = [1.0]\n')
    assert run('run', '--config', path, '--out', tmp_path / 'o') == 2


def test_survey_runs_every_kind(tmp_path, capsys):
    from freering.cli import KINDS
    assert run('run', '--config', CONFIGS / 'survey.toml', '--out',
               tmp_path) == 0
    out = capsys.readouterr().out
    for kind in KINDS:
        assert f'[{kind}]: ok' in out
    manifest = json.loads((tmp_path / 'manifest.json').read_text())
    for name in manifest['artifacts']:
        assert (tmp_path / name).stat().st_size > 0
