"""Constants for the project"""

from enum import Enum, auto
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

DB_PATH = "data/db/db.sqlite"
BUILD_PATH = ROOT / "data/db/build.sql"
SCHEMA_DIR = ROOT / "docs/schemas"
COMMANDS_DIR = Path(__file__).resolve().parent / "commands"

LOGS = 'logs/'
LOG_FILENAME_FORMAT_PREFIX = '%Y-%m-%d %H-%M-%S'
MAX_LOGFILE_AGE_DAYS = 7
LOUD_LOGGERS = ('asyncio', 'concurrent.futures')

# Exit codes of the command line
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2
EXIT_INVARIANT = 3

# Random number generation: numpy's PCG64 through default_rng(seed)
DEFAULT_SEED = 0

# Homogeneous norm
DEFAULT_GAUGE_TOL = 1e-6
ETA_CANDIDATES = tuple(2.0 ** -i for i in range(7))
CALIBRATION_TRIALS = 10 ** 6
CALIBRATION_BATCH = 50_000
CALIBRATION_MARGIN = -1e-12
NEWTON_POLISH_STEPS = 4

# One dimensional profile searches along horizontal lines
LINE_GRID_SAMPLES = 512
PROFILE_SAMPLES = 33
PROFILE_RTOL = 1e-6

# Dyadic cubes (scaling parameter 1/2)
INNER_RADIUS = 1 / 6
OUTER_RADIUS = 8 / 3
DOUBLE_BALL_RADIUS = 16 / 3
DOUBLE_BALL_DIAM = 32 / 3
NEAR_FACTOR = 588
NEAR_CONTAINMENT = 597
WHITNEY_FACTOR = 128

# Beta engine
MAX_PAIR_ATOMS = 6
REFINE_MAXITER = 200

# Traveling salesman construction
FLATNESS_EPS = 0.1
WINDOW_FACTOR = 65
GAP_FACTOR = 30
PHANTOM_FACTOR = 3
LEDGER_BRIDGE_SHARE = 5 / 6
BILIPSCHITZ_LIMIT = 2.5
NETS_C_STAR = 2
WITNESS_C_STAR = 24

# Classifier
MIN_CLASSIFY_DEPTH = 4
DENSITY_MIN = 0.01
SLOPE_FRACTION = 0.05
SLOPE_FLOOR = 1e-9
DOUBLING_MAX = 64.0
C_GRID = tuple(2.0 ** -i for i in range(1, 9))

# Witness curves
WITNESS_C = 0.1
WITNESS_EPS_LOC = 0.5
WITNESS_N_CAP = 1.0
CAPTURE_FACTOR = OUTER_RADIUS + DOUBLE_BALL_RADIUS + 1

# Garnett-Killip-Schul measure
GKS_DELTA = 0.05
GKS_N1 = 10
GKS_SKIP = 7
GKS_SEPARATION = 1 / 8
GKS_NEIGHBOR_FACTOR = 2048
GKS_GROWTH_LIMIT = 64.0
GKS_DOUBLING_SAMPLES = 64
GKS_NEIGHBOR_SCAN_LIMIT = 4096


class Variant(Enum):
    """Jones function variants"""

    STAR = auto()
    STAR_C = auto()
    STAR_STAR = auto()
    TILDE = auto()


class Label(Enum):
    """Atom labels of a decomposition"""

    RECT = auto()
    PURE = auto()
