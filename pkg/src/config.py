"""Run configuration, grouped in sections and read from JSON

Every default lives in constants.py. Randomness always comes from numpy's
PCG64 generator seeded with RunConfig.seed, so a run is reproducible from
its configuration alone.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from constants import (
    BILIPSCHITZ_LIMIT,
    C_GRID,
    CALIBRATION_TRIALS,
    DEFAULT_GAUGE_TOL,
    DEFAULT_SEED,
    DENSITY_MIN,
    DOUBLING_MAX,
    FLATNESS_EPS,
    GKS_DELTA,
    GKS_DOUBLING_SAMPLES,
    GKS_N1,
    GKS_SKIP,
    MAX_PAIR_ATOMS,
    NEAR_FACTOR,
    NETS_C_STAR,
    PROFILE_SAMPLES,
    REFINE_MAXITER,
    SLOPE_FLOOR,
    SLOPE_FRACTION,
    WITNESS_C,
    WITNESS_EPS_LOC,
    WITNESS_N_CAP,
)


log = logging.getLogger(__name__)


@dataclass
class NormConfig:
    """eta=None defers to the calibration store, then to a fresh calibration"""

    eta: float|None = None
    gauge_tol: float = DEFAULT_GAUGE_TOL
    calibration_trials: int = CALIBRATION_TRIALS


@dataclass
class BetaConfig:
    near_factor: float = NEAR_FACTOR
    max_atoms: int|None = MAX_PAIR_ATOMS
    refine: bool = False
    refine_maxiter: int = REFINE_MAXITER
    samples: int = PROFILE_SAMPLES
    workers: int = 1
    c_grid: tuple[float, ...] = C_GRID


@dataclass
class TspConfig:
    eps: float = FLATNESS_EPS
    c_star: float = NETS_C_STAR
    bilipschitz_limit: float = BILIPSCHITZ_LIMIT


@dataclass
class ClassifyConfig:
    """criterion is one of density, all-cubes or doubling"""

    criterion: str = 'density'
    density_min: float = DENSITY_MIN
    slope_fraction: float = SLOPE_FRACTION
    slope_floor: float = SLOPE_FLOOR
    doubling_max: float = DOUBLING_MAX


@dataclass
class WitnessConfig:
    c: float = WITNESS_C
    eps_loc: float = WITNESS_EPS_LOC
    n_cap: float = WITNESS_N_CAP


@dataclass
class GksSettings:
    """infinite_product picks the capture target: truncated product when False"""

    delta: float = GKS_DELTA
    n1: int = GKS_N1
    generation_skip: int = GKS_SKIP
    doubling_samples: int = GKS_DOUBLING_SAMPLES
    rounds: int = 2
    infinite_product: bool = False


@dataclass
class RunConfig:
    seed: int = DEFAULT_SEED
    depth: int|None = None
    group: str = 'abelian:2'


@dataclass
class Config:
    norm: NormConfig = field(default_factory=NormConfig)
    beta: BetaConfig = field(default_factory=BetaConfig)
    tsp: TspConfig = field(default_factory=TspConfig)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    witness: WitnessConfig = field(default_factory=WitnessConfig)
    gks: GksSettings = field(default_factory=GksSettings)
    run: RunConfig = field(default_factory=RunConfig)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc['beta']['c_grid'] = list(self.beta.c_grid)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> 'Config':
        """Overlay a (possibly partial) document on the defaults

        Raises:
            ValueError: unknown sections or keys
        """

        config = cls()
        sections = {f.name for f in fields(cls)}
        for name, values in doc.items():
            if name not in sections:
                raise ValueError(f'unknown config section: {name}')

            section = getattr(config, name)
            known = {f.name for f in fields(section)}
            for key, value in values.items():
                if key not in known:
                    raise ValueError(f'unknown key {key} in config section {name}')
                if key == 'c_grid':
                    value = tuple(float(c) for c in value)
                setattr(section, key, value)

        if config.classify.criterion not in ('density', 'all-cubes', 'doubling'):
            raise ValueError(f'unknown classification criterion: {config.classify.criterion}')

        return config


def load_config(path: str|Path|None=None) -> Config:
    """Defaults, overlaid with the JSON document at path when given"""

    if path is None:
        return Config()

    log.debug('Loading config from %s', path)
    with open(path, 'r', encoding='utf-8') as file:
        return Config.from_dict(json.load(file))
