"""The sqlite store: eta calibrations and the history of command runs"""

import json
import logging
from functools import wraps
from pathlib import Path
from sqlite3 import Connection, Cursor, Row, connect as sqlite_connect
from typing import Callable, Iterable

from carnot import CalibrationResult, StratificationSpec
from constants import BUILD_PATH, DB_PATH


log = logging.getLogger(__name__)

conn: Connection|None = None
cur: Cursor|None = None


def connect(path: str|Path=DB_PATH) -> None:
    """Open the store at path (':memory:' for a throwaway one) and build it"""

    global conn, cur

    if conn is not None:
        close()

    if str(path) != ':memory:':
        Path(path).parent.mkdir(parents=True, exist_ok=True)

    conn = sqlite_connect(str(path), check_same_thread=False)
    conn.row_factory = Row
    cur = conn.cursor()
    cur.execute("PRAGMA foreign_keys = ON;")
    log.debug("Database connection established at %s", path)
    build()


def connected() -> bool:
    return conn is not None


def _cursor() -> Cursor:
    if cur is None:
        raise RuntimeError('the database is not connected, call db.connect() first')
    return cur


def with_commit(func: Callable) -> Callable:
    """Commit after the wrapped call"""

    @wraps(func)
    def committed(*args, **kwargs):
        result = func(*args, **kwargs)
        commit()
        return result

    return committed


@with_commit
def build() -> None:
    """Run the build script, every statement of which is idempotent"""

    if not Path(BUILD_PATH).is_file():
        raise ValueError(f'Build script not found at {BUILD_PATH}')
    scriptexec(BUILD_PATH)


def commit() -> None:
    if conn is not None:
        conn.commit()


def close() -> None:
    global conn, cur

    if conn is None:
        return
    log.debug("Closing the store")
    conn.commit()
    conn.close()
    conn = cur = None


def field(sql: str, *params):
    """First column of the first row, None without rows"""

    row = record(sql, *params)
    return row[0] if row is not None else None


def record(sql: str, *params) -> Row|None:
    return execute(sql, *params).fetchone()


def records(sql: str, *params) -> list[Row]:
    return execute(sql, *params).fetchall()


def execute(sql: str, *params) -> Cursor:
    log.debug("SQL %s %s", sql, params)
    return _cursor().execute(sql, params)


def multiexec(sql: str, rows: Iterable[tuple]) -> None:
    rows = list(rows)
    log.debug("SQL %s over %s rows", sql, len(rows))
    _cursor().executemany(sql, rows)


def scriptexec(path: str|Path) -> None:
    log.debug("SQL script %s", path)
    _cursor().executescript(Path(path).read_text(encoding='utf-8'))


def spec_key(spec: StratificationSpec) -> str:
    """Canonical text of a stratification, so equal groups share calibrations"""
    return json.dumps(spec.to_dict(), sort_keys=True)


def cached_calibration(spec: StratificationSpec, gauge_tol: float, trials: int) -> CalibrationResult|None:
    """The stored calibration run with at least as many trials, if any"""

    row = record(
        "SELECT eta, passed, trials, worst_margin FROM calibrations "
        "WHERE spec = ? AND gauge_tol = ? AND trials >= ? ORDER BY trials DESC",
        spec_key(spec), gauge_tol, trials,
    )
    if row is None:
        return None
    return CalibrationResult(row['eta'], row['passed'], row['trials'], row['worst_margin'])


@with_commit
def store_calibration(spec: StratificationSpec, gauge_tol: float, result: CalibrationResult) -> None:
    execute(
        "INSERT OR REPLACE INTO calibrations (spec, name, gauge_tol, trials, eta, passed, worst_margin) "
        "VALUES (?, ?, ?, ?, ?, ?, ?)",
        spec_key(spec), spec.name, gauge_tol, result.trials, result.eta, result.passed, result.worst_margin,
    )


@with_commit
def start_run(command: str, args: dict, group_name: str|None, seed: int|None) -> int:
    """Insert a run without status and return its id"""

    cursor = execute(
        "INSERT INTO runs (command, args, group_name, seed) VALUES (?, ?, ?, ?)",
        command, json.dumps(args, sort_keys=True, default=str), group_name, seed,
    )
    return int(cursor.lastrowid)


@with_commit
def finish_run(run_id: int, status: int, runtime: float, results: dict[str, float]|None=None) -> None:
    execute("UPDATE runs SET status = ?, runtime = ? WHERE run_id = ?", status, runtime, run_id)
    if results:
        multiexec(
            "INSERT OR REPLACE INTO run_results (run_id, key, value) VALUES (?, ?, ?)",
            [(run_id, key, float(value)) for key, value in results.items()],
        )


def recent_runs(limit: int=20) -> list[Row]:
    return records(
        "SELECT run_id, command, group_name, seed, status, started, runtime FROM runs "
        "ORDER BY run_id DESC LIMIT ?",
        limit,
    )
