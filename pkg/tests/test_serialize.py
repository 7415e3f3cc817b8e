"""JSON and CSV output, reading measures back and the shipped schemas"""

import csv
import io
import json

import numpy as np
import numpy.testing as npt
import pytest

from beta import BetaReport
from carnot import CarnotGroup, heisenberg
from config import GksSettings
from cubes import build_cubes, lattice_nets
from errors import SpecError
from gks import build_measure
from scenarios import generate
from serialize import SCHEMAS, load_json, measure_csv, missing_keys, read_clouds, read_measure, schema, to_json, write


class TestMeasureRoundTrip:

    @pytest.mark.parametrize('name, params', [
        ('segment', {'n': 50}),
        ('self-similar-unbalanced', {'depth': 2}),
        ('polyline-curve', {'n': 30}),
    ])
    def test_json(self, h1, tmp_path, name, params):
        mu = generate(name, h1, 5, **params)
        path = tmp_path / 'mu.json'
        write(mu, path)
        back = read_measure(path)
        assert back.spec == mu.spec
        npt.assert_array_equal(back.points, mu.points)
        npt.assert_array_equal(back.weights, mu.weights)
        assert back.resolution == mu.resolution
        assert back.name == mu.name
        assert back.params == json.loads(json.dumps(mu.params))

    def test_stdout(self, plane, capsys):
        mu = generate('segment', plane, n=8)
        write(mu)
        doc = json.loads(capsys.readouterr().out)
        assert len(doc['atoms']) == 8
        assert missing_keys(doc, 'measure') == []

    def test_csv(self, plane):
        mu = generate('segment', plane, n=8)
        out = io.StringIO()
        measure_csv(mu, out)
        rows = list(csv.reader(io.StringIO(out.getvalue())))
        assert rows[0] == ['x0', 'x1', 'weight']
        assert len(rows) == 9
        assert float(rows[-1][0]) == pytest.approx(1.0)


class TestWrite:

    def test_numpy_values(self):
        doc = json.loads(to_json({'a': np.float64(0.5), 'b': np.arange(3), 'c': {2, 1}}))
        assert doc == {'a': 0.5, 'b': [0, 1, 2], 'c': [1, 2]}

    def test_unknown_format(self, plane):
        with pytest.raises(ValueError):
            write(generate('segment', plane, n=4), fmt='xml')

    def test_dict_has_no_csv(self):
        with pytest.raises(ValueError):
            write({'a': 1}, fmt='csv')

    def test_csv_through_to_csv(self, tmp_path):
        report = BetaReport('abelian:2', 1, (0.1,), ())
        path = tmp_path / 'beta.csv'
        write(report, path, 'csv')
        assert path.read_text() == ''


class TestSchemas:

    def test_every_schema_loads(self):
        for kind in SCHEMAS:
            doc = schema(kind)
            assert doc['type'] == 'object'
            assert doc['required']
        with pytest.raises(ValueError):
            schema('polyline')

    def test_beta_report(self):
        doc = BetaReport('abelian:2', 1, (0.1,), ()).to_dict()
        assert missing_keys(doc, 'beta') == []
        assert missing_keys({}, 'beta') == ['group', 'step', 'c_grid', 'cubes']

    def test_gks_measure(self, line1):
        mu = generate('dyadic-interval', line1, depth=5)
        system = build_cubes(line1, mu.points, lattice_nets(mu.points, 5))
        nu = build_measure(line1, mu, GksSettings(delta=0.5, n1=1, generation_skip=1), system=system)
        doc = json.loads(to_json(nu.to_dict()))
        assert missing_keys(doc, 'gks') == []
        assert doc['weights']['0:0'] == pytest.approx(1.0)


class TestClouds:

    def test_read(self, tmp_path):
        group = CarnotGroup(heisenberg(1))
        path = tmp_path / 'clouds.json'
        path.write_text(json.dumps({
            'group': 'h1', 'c_star': 2, 'r0': 1.0,
            'clouds': [[[0, 0, 0]], [[0, 0, 0], [0.5, 0, 0]]],
        }))
        seq = read_clouds(path, group)
        assert seq.m == 1
        assert seq.sizes() == [1, 2]

    def test_wrong_group(self, tmp_path, plane):
        path = tmp_path / 'clouds.json'
        path.write_text(json.dumps({'group': 'h1', 'c_star': 2, 'r0': 1.0, 'clouds': [[[0, 0]]]}))
        with pytest.raises(SpecError):
            read_clouds(path, plane)
        assert load_json(path)['group'] == 'h1'
