"""Acceptance criteria 1-15, one test each.

Every test prints a ``criterion N name: PASS/FAIL value= threshold=`` line;
run with ``pytest -s tests/test_acceptance.py`` to see them, or
``freering verify --bundle all`` for the same checks with CSV output.
"""

import pytest

from freering.checks import CheckContext, CRITERIA, run_criterion


@pytest.fixture(scope='module')
def ctx(tmp_path_factory):
    return CheckContext(seed=0, threads=1,
                        out_dir=str(tmp_path_factory.mktemp('acceptance')))


SLOW = {5, 7, 8, 9, 12}


@pytest.mark.parametrize('number', [
    pytest.param(k, marks=pytest.mark.slow) if k in SLOW else k
    for k in CRITERIA if isinstance(k, int)])
def test_criterion(number, ctx, capsys):
    res = run_criterion(number, ctx)
    with capsys.disabled():
        print(f"\n{res.line()} [{res.seconds:.1f}s]")
    assert res.passed, res.line()
