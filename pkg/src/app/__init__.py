"""The application object, its logging and the command loader"""

from .app import App, parse_param
from .logs import setup_logs, stop_logs
