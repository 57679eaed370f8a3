import json

import pytest

from jointail.__main__ import main

from .conftest import MINIMAL_SCENARIO

SCENARIO = MINIMAL_SCENARIO + '''
[[experiments]]
kind = "matuszewska"
band = [1.9, 2.1]
'''

@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for var in ('JOINTAIL_SEED', 'JOINTAIL_SAMPLES', 'JOINTAIL_THREADS', 'JOINTAIL_OUT'):
        monkeypatch.delenv(var, raising=False)
    (tmp_path / 'scenario.toml').write_text(SCENARIO)
    return tmp_path

def test_check(workdir, capsys):
    assert main(['check', 'scenario.toml']) == 0
    assert main(['check', 'scenario.toml', '--canonical']) == 0
    assert 'marginals_x' in capsys.readouterr().out

def test_check_reports_invalid_scenarios(workdir):
    (workdir / 'bad.toml').write_text(SCENARIO + 'copul = 1\n')
    assert main(['check', 'bad.toml']) == 1
    assert main(['check', 'missing.toml']) == 1

def test_run_and_report(workdir):
    assert main(['-q', 'run', 'scenario.toml', '--out', 'res', '--seed', '3', '--samples', '1000']) == 0
    doc = json.loads((workdir / 'res' / '00_matuszewska.json').read_text())
    assert doc['provenance']['seed'] == 3 and doc['provenance']['n_samples'] == 1000
    assert doc['outcome']['status'] == 'pass'
    assert main(['report', 'res']) == 0

def test_environment_supplies_defaults(workdir, monkeypatch):
    monkeypatch.setenv('JOINTAIL_OUT', 'from_env')
    assert main(['run', 'scenario.toml']) == 0
    assert (workdir / 'from_env' / 'summary.json').exists()

def test_report_on_empty_directory(workdir):
    (workdir / 'empty').mkdir()
    assert main(['report', 'empty']) == 1
