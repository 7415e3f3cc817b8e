"""Reading inputs and writing results as JSON or CSV

JSON is the interchange format and round-trips. CSV keeps coordinates and a
few columns for plotting only.
"""

import csv
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, TextIO

import numpy as np

from carnot import CarnotGroup
from constants import SCHEMA_DIR
from errors import SpecError
from trees import DiscreteMeasure
from tsp import CloudSequence


log = logging.getLogger(__name__)

FORMATS = ('json', 'csv')
SCHEMAS = {
    'measure': 'discrete_measure.json',
    'beta': 'beta_report.json',
    'decomposition': 'decomposition.json',
    'curve': 'curve_graph.json',
    'gks': 'gks_measure.json',
}


def _default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def to_json(doc: dict, indent: int|None=2) -> str:
    return json.dumps(doc, indent=indent, default=_default, allow_nan=True)


@contextmanager
def opened(path: str|Path|None, mode: str='r') -> Iterator[TextIO]:
    """The file at path, or stdin/stdout for None and '-'"""

    if path is None or str(path) == '-':
        yield sys.stdin if 'r' in mode else sys.stdout
        return

    with open(path, mode, encoding='utf-8', newline='' if 'w' in mode else None) as file:
        yield file


def load_json(path: str|Path|None) -> dict:
    with opened(path) as file:
        return json.load(file)


def read_measure(path: str|Path|None) -> DiscreteMeasure:
    """A DiscreteMeasure document from a file or stdin"""

    mu = DiscreteMeasure.from_dict(load_json(path))
    log.debug('Read %s atoms of %s from %s', len(mu), mu.name, path or 'stdin')
    return mu


def read_clouds(path: str|Path|None, group: CarnotGroup) -> CloudSequence:
    """A cloud sequence document: group name, c_star, r0 and the clouds

    Raises:
        SpecError: the document names another group
    """

    doc = load_json(path)
    if doc.get('group', group.spec.name) != group.spec.name:
        raise SpecError(f'clouds live in {doc["group"]}, not in {group.spec.name}')
    return CloudSequence(group, float(doc['c_star']), float(doc['r0']), tuple(doc['clouds']))


def measure_csv(mu: DiscreteMeasure, file: TextIO) -> None:
    """One atom per row: coordinates then weight"""

    writer = csv.writer(file)
    writer.writerow([*(f'x{j}' for j in range(mu.points.shape[1])), 'weight'])
    for point, weight in zip(mu.points, mu.weights):
        writer.writerow([*point.tolist(), float(weight)])


def write(result, path: str|Path|None=None, fmt: str='json') -> None:
    """Write anything with to_dict as JSON, or with to_csv as CSV

    Raises:
        ValueError: unknown format, or CSV asked of a result without a table
    """

    if fmt not in FORMATS:
        raise ValueError(f'unknown output format: {fmt}')

    if fmt == 'csv':
        if isinstance(result, DiscreteMeasure):
            writer = lambda file: measure_csv(result, file)
        elif hasattr(result, 'to_csv'):
            writer = result.to_csv
        else:
            raise ValueError(f'{type(result).__name__} has no CSV form')
    else:
        doc = result if isinstance(result, dict) else result.to_dict()
        writer = lambda file: file.write(to_json(doc) + '\n')

    with opened(path, 'w') as file:
        writer(file)
    if path not in (None, '-'):
        log.info('Wrote %s to %s', type(result).__name__, path)


def schema(kind: str) -> dict:
    """The JSON schema shipped for an output kind"""

    if kind not in SCHEMAS:
        raise ValueError(f'no schema for {kind}')
    return load_json(Path(SCHEMA_DIR) / SCHEMAS[kind])


def missing_keys(doc: dict, kind: str) -> list[str]:
    """Top level keys the schema requires that the document lacks"""

    return [key for key in schema(kind).get('required', ()) if key not in doc]
