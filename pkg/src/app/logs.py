"""
Queue based logging for the command line runs
"""

import sys
import queue
import logging
from logging.handlers import QueueHandler, QueueListener
from datetime import datetime, timedelta
from itertools import count
from typing import TextIO
from pathlib import Path

from constants import (
    LOGS,
    LOG_FILENAME_FORMAT_PREFIX,
    LOUD_LOGGERS,
    MAX_LOGFILE_AGE_DAYS
)


log = logging.getLogger(__name__)

LOG_FORMAT = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"

_handler: QueueHandler|None = None
_listener: QueueListener|None = None
_file: TextIO|None = None


def _open_file(log_dir: str|Path) -> TextIO:
    """
    Returns a new file object in log_dir named after the current time.
    """

    Path(log_dir).mkdir(parents=True, exist_ok=True)

    timestamp = datetime.now().strftime(LOG_FILENAME_FORMAT_PREFIX)
    filenames = (
        f'{timestamp}.txt' if i == 0 else f'{timestamp}_({i}).txt' \
            for i in count()
    )

    for filename in filenames:
        try:
            return (Path(log_dir) / filename).open('x', encoding='utf-8')
        except FileExistsError:
            continue


def _delete_old_logs(log_dir: str|Path):
    """
    Delete log files older than MAX_LOGFILE_AGE_DAYS.
    """

    for path in Path(log_dir).glob('*.txt'):
        prefix = path.stem.split('_')[0]
        try:
            log_date = datetime.strptime(prefix, LOG_FILENAME_FORMAT_PREFIX)
        except ValueError:
            log.warning('%s contains a problematic filename: %s', path.parent, path.name)
            continue

        if datetime.now() - log_date >= timedelta(days=MAX_LOGFILE_AGE_DAYS):
            log.info('Removing expired log file: %s', path.name)
            path.unlink()


def update_log_levels(logger_names: tuple[str, ...], level: int):
    """
    Set the level of several loggers at once.
    """
    for name in logger_names:
        logging.getLogger(name).setLevel(level)


def setup_logs(log_level: int=logging.INFO, log_dir: str|Path|None=LOGS) -> str|None:
    """
    Route every record through a queue to stderr and a fresh log file.

    Stdout stays free for results. A log_dir of None skips the file.
    Returns the log file name, if any.
    """

    global _handler, _listener, _file

    stop_logs()
    log_queue = queue.Queue()

    _handler = QueueHandler(log_queue)
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.setLevel(log_level)
    root.addHandler(_handler)

    # records reach the listener already formatted by the QueueHandler
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_dir is not None:
        _file = _open_file(log_dir)
        handlers.append(logging.StreamHandler(_file))

    _listener = QueueListener(log_queue, *handlers)
    _listener.start()

    update_log_levels(LOUD_LOGGERS, logging.WARNING)

    if log_dir is not None:
        _delete_old_logs(log_dir)
        return _file.name
    return None


def stop_logs():
    """
    Detach the queue, flush it and close the log file of the last setup_logs call.
    """

    global _handler, _listener, _file

    if _handler is not None:
        logging.getLogger().removeHandler(_handler)
        _handler = None
    if _listener is not None:
        _listener.stop()
        _listener = None
    if _file is not None:
        _file.close()
        _file = None
