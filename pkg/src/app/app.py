"""The command line application"""

import json
import logging
from argparse import ArgumentParser, Namespace
from datetime import datetime, timedelta
from functools import cached_property
from importlib import import_module
from typing import Callable

from carnot import CarnotGroup, HomogeneousNorm, StratificationSpec, calibrate_eta, resolve_group
from config import Config, load_config
from constants import (
    COMMANDS_DIR,
    DB_PATH,
    EXIT_ERROR,
    EXIT_INVARIANT,
    LOGS,
)
from db import db
from errors import CarnotRectError, InvariantViolation, SpecError
from scenarios import GENERATORS, generate, parameters
from serialize import FORMATS, read_measure, write
from trees import DiscreteMeasure
from .logs import setup_logs, stop_logs

log = logging.getLogger(__name__)

Handler = Callable[['App', Namespace], int]


def parse_param(text: str) -> tuple[str, object]:
    """key=value, the value read as JSON when it parses and kept as text otherwise"""

    key, sep, value = text.partition('=')
    if not sep or not key:
        raise ValueError(f'parameters are key=value, got {text!r}')
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


class App:
    """Parses the command line, runs one command and records the run"""

    def __init__(self):
        self.start_time = datetime.now()
        self.parser = ArgumentParser(
            prog='carnot-rect',
            description='Rectifiability of discrete measures on Carnot groups',
        )
        self._global_flags()
        self.commands = self.parser.add_subparsers(dest='command', metavar='command', required=True)
        self.handlers: dict[str, Handler] = {}
        self.args: Namespace|None = None
        self.config = Config()
        self.results: dict[str, float] = {}

    def _global_flags(self) -> None:
        parser = self.parser
        parser.add_argument('--group', help='abelian:n, hN (Heisenberg, e.g. h1), engel or file:PATH')
        parser.add_argument('--depth', type=int, help='resolution K of the run')
        parser.add_argument('--seed', type=int, help='seed of the PCG64 generator')
        parser.add_argument('--config', help='JSON config overlaid on the defaults')
        parser.add_argument('--out', help='output file, stdout by default')
        parser.add_argument('--format', choices=FORMATS, default='json')
        parser.add_argument('--db', default=DB_PATH, help="sqlite store, ':memory:' for none")
        parser.add_argument('--log-dir', default=LOGS, help='directory of the log files')
        parser.add_argument('--no-log-file', action='store_true', help='log to stderr only')
        verbosity = parser.add_mutually_exclusive_group()
        verbosity.add_argument('-v', '--verbose', action='store_true')
        verbosity.add_argument('-q', '--quiet', action='store_true')

    @property
    def runtime(self) -> timedelta:
        return datetime.now() - self.start_time

    def add_command(self, name: str, handler: Handler, help: str) -> ArgumentParser:
        """Register a subcommand and return its parser for the command's own flags"""

        if name in self.handlers:
            raise ValueError(f'command {name} is registered twice')
        self.handlers[name] = handler
        return self.commands.add_parser(name, help=help, description=help)

    @staticmethod
    def add_measure_args(parser: ArgumentParser, default: str|None='segment') -> None:
        """--input, or a scenario name with --param key=value pairs"""

        parser.add_argument('scenario', nargs='?', default=default, choices=sorted(GENERATORS),
                            metavar='scenario', help='generator used when --input is not given')
        parser.add_argument('--input', help="DiscreteMeasure JSON, '-' for stdin")
        parser.add_argument('--param', action='append', default=[], type=parse_param,
                            metavar='KEY=VALUE', help='scenario parameter, repeatable')

    def load_commands(self) -> None:
        """Import every module of the commands folder and let it register itself"""

        for path in sorted(COMMANDS_DIR.glob('*.py')):
            if path.stem.startswith('_'):
                continue
            import_module(f'commands.{path.stem}').setup(self)
            log.debug('Loaded command module %s', path.stem)

    @property
    def seed(self) -> int:
        return self.config.run.seed if self.args.seed is None else self.args.seed

    @property
    def depth(self) -> int|None:
        return self.config.run.depth if self.args.depth is None else self.args.depth

    @cached_property
    def spec(self) -> StratificationSpec:
        return resolve_group(self.args.group or self.config.run.group)

    @cached_property
    def group(self) -> CarnotGroup:
        norm = self.config.norm
        return CarnotGroup(self.spec, HomogeneousNorm(self.resolve_eta(self.spec), norm.gauge_tol))

    def resolve_eta(self, spec: StratificationSpec) -> float:
        """Configured eta, then the stored calibration, then a fresh one that gets stored"""

        norm = self.config.norm
        if spec.is_abelian:
            return 1.0
        if norm.eta is not None:
            return norm.eta

        cached = db.cached_calibration(spec, norm.gauge_tol, norm.calibration_trials)
        if cached is not None:
            log.debug('Using the stored eta %s of %s', cached.eta, spec.name)
            return cached.eta

        log.info('Calibrating eta for %s over %s trials', spec.name, norm.calibration_trials)
        result = calibrate_eta(spec, norm.calibration_trials, self.seed, gauge_tol=norm.gauge_tol)
        db.store_calibration(spec, norm.gauge_tol, result)
        return result.eta

    def measure(self, args: Namespace) -> DiscreteMeasure:
        """The measure a command works on, read from --input or generated

        Without --group an input measure sets the group of the run.

        Raises:
            SpecError: the input measure lives in another group than --group
        """

        if args.input is not None:
            mu = read_measure(args.input)
            if self.args.group is None and 'group' not in self.__dict__:
                self.__dict__['spec'] = mu.spec
            if mu.spec != self.spec:
                raise SpecError(f'the input measure lives in {mu.spec.name}, the run in {self.spec.name}')
            return mu

        if args.scenario is None:
            raise ValueError('give a scenario or --input')
        params = dict(args.param)
        if self.depth is not None and 'depth' in parameters(args.scenario):
            params.setdefault('depth', self.depth)
        return generate(args.scenario, self.group, self.seed, **params)

    def emit(self, result) -> None:
        write(result, self.args.out, self.args.format)

    def record(self, **results: float) -> None:
        """Scalars stored with the run in the history"""

        self.results.update({key: float(value) for key, value in results.items()})

    def _log_level(self) -> int:
        if self.args.verbose:
            return logging.DEBUG
        if self.args.quiet:
            return logging.WARNING
        return logging.INFO

    def run(self, argv: list[str]|None=None) -> int:
        """Parse argv, run the command and return the exit status"""

        self.load_commands()
        self.args = args = self.parser.parse_args(argv)
        setup_logs(self._log_level(), None if args.no_log_file else args.log_dir)
        run_id, status = None, EXIT_ERROR
        try:
            self.config = load_config(args.config)
            db.connect(args.db)
            run_id = db.start_run(args.command, vars(args), args.group or self.config.run.group, self.seed)
            status = self.handlers[args.command](self, args)
        except InvariantViolation as exc:
            log.error('Invariant violated: %s', exc)
            status = EXIT_INVARIANT
        except (CarnotRectError, ValueError, OSError) as exc:
            log.error('%s: %s', type(exc).__name__, exc)
            status = EXIT_ERROR
        finally:
            self.close(run_id, status)

        return status

    def close(self, run_id: int|None, status: int) -> None:
        runtime = self.runtime.total_seconds()
        if run_id is not None and db.connected():
            db.finish_run(run_id, status, runtime, self.results)
        db.close()
        log.info('%s finished with status %s after %.2fs', self.args.command, status, runtime)
        stop_logs()

