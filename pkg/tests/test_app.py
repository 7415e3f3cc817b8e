"""The command line: commands, exit codes, the run history and eta resolution"""

import json
import logging
from argparse import Namespace

import pytest

from app import App, parse_param, setup_logs, stop_logs
from carnot import CalibrationResult, abelian, heisenberg
from config import Config
from constants import EXIT_ERROR, EXIT_FAILED, EXIT_INVARIANT, EXIT_OK
from db import db
from errors import InvariantViolation
from main import main
from serialize import missing_keys, read_measure


def run(*argv, db_path=':memory:') -> int:
    return main(['--no-log-file', '--db', str(db_path), *argv])


@pytest.fixture
def memory_db():
    db.connect(':memory:')
    yield db
    db.close()


class TestParams:

    @pytest.mark.parametrize('text, expected', [
        ('n=10', ('n', 10)),
        ('radius=0.25', ('radius', 0.25)),
        ('weights=[0.7,0.1,0.1,0.1]', ('weights', [0.7, 0.1, 0.1, 0.1])),
        ('label=abc', ('label', 'abc')),
    ])
    def test_values(self, text, expected):
        assert parse_param(text) == expected

    @pytest.mark.parametrize('text', ['n', '=3'])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            parse_param(text)


class TestCommands:

    def test_gen_to_file(self, tmp_path):
        out = tmp_path / 'segment.json'
        assert run('--out', str(out), 'gen', 'segment', '--param', 'n=64') == EXIT_OK
        mu = read_measure(out)
        assert len(mu) == 64
        assert mu.spec == abelian(2)

    def test_gen_to_stdout(self, tmp_path, capsys):
        config = tmp_path / 'config.json'
        config.write_text(json.dumps({'norm': {'eta': 0.5}}))
        assert run('--config', str(config), '--group', 'h1', 'gen', 'vertical-segment-H1', '--param', 'n=16') == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert missing_keys(doc, 'measure') == []
        assert doc['group']['name'] == 'h1'

    def test_gen_csv(self, capsys):
        assert run('--format', 'csv', 'gen', 'segment', '--param', 'n=4') == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == 'x0,x1,weight'
        assert len(lines) == 5

    def test_global_depth_reaches_the_scenario(self, tmp_path):
        out = tmp_path / 'grid.json'
        assert run('--depth', '3', '--out', str(out), 'gen', 'lebesgue-grid') == EXIT_OK
        assert len(read_measure(out)) == 64

    def test_gen_then_classify(self, tmp_path):
        measure, decomposition = tmp_path / 'segment.json', tmp_path / 'decomposition.json'
        assert run('--out', str(measure), 'gen', 'segment', '--param', 'n=128') == EXIT_OK
        assert run('--depth', '5', '--out', str(decomposition), 'classify', '--input', str(measure)) == EXIT_OK
        doc = json.loads(decomposition.read_text())
        assert missing_keys(doc, 'decomposition') == []
        assert doc['rect_mass'] == pytest.approx(1.0)
        assert doc['pure_mass'] == 0.0

    def test_input_in_another_group(self, tmp_path):
        measure = tmp_path / 'segment.json'
        assert run('--out', str(measure), 'gen', 'segment', '--param', 'n=16') == EXIT_OK
        assert run('--group', 'abelian:3', 'beta', '--input', str(measure)) == EXIT_ERROR

    def test_gks(self, tmp_path):
        out = tmp_path / 'gks.json'
        status = run(
            '--group', 'abelian:1', '--depth', '8', '--out', str(out),
            'gks', '--delta', '0.25', '--skip', '1', '--n1', '2',
        )
        assert status == EXIT_OK
        doc = json.loads(out.read_text())
        assert missing_keys(doc, 'gks') == []
        assert doc['generations'] == 8
        assert doc['curve']['rounds'] == 2
        assert doc['doubling']['truncated'] == []

    def test_verify(self, capsys):
        assert run('verify', '--suite', 'gks', '--suite', 'arithmetic') == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc['passed']
        assert [suite['name'] for suite in doc['suites']] == ['gks', 'arithmetic']


class TestExitCodes:

    def test_unknown_group(self):
        assert run('--group', 'sl2', 'gen', 'segment') == EXIT_ERROR

    def test_unknown_parameter(self):
        assert run('gen', 'segment', '--param', 'radius=1') == EXIT_ERROR

    def test_bad_config(self, tmp_path):
        config = tmp_path / 'config.json'
        config.write_text(json.dumps({'gks': {'gamma': 1}}))
        assert run('--config', str(config), 'gen', 'segment') == EXIT_ERROR

    def test_invariant_violation(self, monkeypatch):
        def broken(app, args):
            raise InvariantViolation('mass went missing')

        monkeypatch.setattr('commands.gen.gen', broken)
        assert run('gen', 'segment') == EXIT_INVARIANT

    def test_failed_verification(self, monkeypatch):
        def failing(app, result, size):
            result.fail('planted failure')

        import commands.verify as verify
        monkeypatch.setitem(verify.SUITES, 'gks', (failing, 1))
        assert run('verify', '--suite', 'gks') == EXIT_FAILED

    def test_argparse_errors_exit(self):
        with pytest.raises(SystemExit):
            run('gen', '--param', 'nothing')


class TestHistory:

    def test_runs_are_recorded(self, tmp_path):
        path = tmp_path / 'db.sqlite'
        assert run('--seed', '4', '--out', str(tmp_path / 'mu.json'), 'gen', 'segment', '--param', 'n=32', db_path=path) == EXIT_OK
        assert run('gen', 'segment', '--param', 'radius=1', db_path=path) == EXIT_ERROR

        db.connect(path)
        try:
            runs = db.recent_runs()
            assert [row['command'] for row in runs] == ['gen', 'gen']
            assert runs[1]['status'] == EXIT_OK and runs[1]['seed'] == 4
            atoms = db.field("SELECT value FROM run_results WHERE run_id = ? AND key = 'atoms'", runs[1]['run_id'])
            assert atoms == 32
        finally:
            db.close()


class TestEta:

    def app_with(self, **norm) -> App:
        app = App()
        app.config = Config()
        for key, value in norm.items():
            setattr(app.config.norm, key, value)
        return app

    def test_abelian(self, memory_db):
        assert self.app_with(eta=0.1).resolve_eta(abelian(3)) == 1.0

    def test_configured(self, memory_db):
        assert self.app_with(eta=0.125).resolve_eta(heisenberg(1)) == 0.125

    def test_stored_calibration(self, memory_db):
        spec = heisenberg(1)
        app = self.app_with(calibration_trials=100)
        db.store_calibration(spec, app.config.norm.gauge_tol, CalibrationResult(0.25, 0.5, 1000, 0.01))
        assert app.resolve_eta(spec) == 0.25

    def test_calibrates_and_stores(self, memory_db):
        spec = heisenberg(1)
        app = self.app_with(calibration_trials=2000)
        app.args = Namespace(seed=1)
        eta = app.resolve_eta(spec)
        assert 0 < eta <= 0.5
        stored = db.cached_calibration(spec, app.config.norm.gauge_tol, 2000)
        assert stored.eta == eta and stored.trials == 2000
        assert db.cached_calibration(spec, app.config.norm.gauge_tol, 4000) is None


class TestLogs:

    def test_file_and_cleanup(self, tmp_path):
        name = setup_logs(logging.DEBUG, tmp_path)
        try:
            logging.getLogger('carnot').info('written to the file')
        finally:
            stop_logs()
        assert 'written to the file' in open(name, encoding='utf-8').read()
        assert len(list(tmp_path.glob('*.txt'))) == 1
