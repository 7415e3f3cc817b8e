"""The sqlite store, connected by the application at startup"""

from . import db
