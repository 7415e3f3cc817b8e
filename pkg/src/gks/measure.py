"""A doubling measure built by pushing mass towards central descendant cubes

Generation n of the construction uses the cubes D_n of level k_min + skip * n.
Every Q in D_n picks a descendant R_Q in D_{n+1} well inside Q and its mass
is redistributed by the factor a_Q on R_Q and delta on the rest of Q. The
factor of stage n is constant on the cubes of D_{n+1}, so the mass of a cube
of D_n never changes after stage n and finite depth needs no limit.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from math import e

import numpy as np

from carnot import CarnotGroup
from config import GksSettings
from constants import GKS_GROWTH_LIMIT, GKS_SEPARATION, GKS_SKIP
from cubes import Cube, CubeSystem, build_cubes, build_nets
from errors import ConstructionError, GeometryError, InvariantViolation, SpecError
from trees import DiscreteMeasure


log = logging.getLogger(__name__)

MASS_TOL = 1e-12
STABLE_TOL = 1e-10


@dataclass(frozen=True)
class CenterChoice:
    """R_Q and how it was found

    Attributes:
        cube: the chosen descendant R_Q
        separation: d(R_Q, Q^c), capped at the radius of B_Q
        fallback: the descendant sharing the centre of Q was not separated enough
    """

    cube: Cube
    separation: float
    fallback: bool = False


def separation(system: CubeSystem, cube: Cube, descendant: Cube) -> float:
    """d(R, Q^c) over the sample, capped at the radius of B_Q"""

    index = system.point_index
    outside = system.assignment(cube.level)
    best = cube.radius
    for x in system.members(descendant):
        near = index.within(system.points[x], best)
        near = near[outside[near] != cube.index]
        if near.size:
            best = min(best, float(index.distances(system.points[x], near).min()))
    return best


def select_center(system: CubeSystem, cube: Cube, skip: int=GKS_SKIP,
                  threshold: float=GKS_SEPARATION) -> CenterChoice:
    """The descendant R_Q, skip levels below Q, that mass is pushed into

    Centres keep their position in finer nets, so the cube of level
    Q.level + skip with the index of Q is the descendant centred at x_Q. It is
    taken when d(R, Q^c) > threshold * side(Q); otherwise the descendant
    farthest from Q^c is used.

    Raises:
        ConstructionError: Q has no descendants skip levels down
    """

    level = cube.level + skip
    if level > system.k_max:
        raise ConstructionError(f'{cube.id} has no descendants at level {level} (deepest is {system.k_max})')

    needed = threshold * cube.side
    central = system.cube(level, cube.index)
    distance = separation(system, cube, central)
    if distance > needed:
        return CenterChoice(central, distance)

    candidates = system.descendants(cube, level)
    distances = np.array([separation(system, cube, system.cube(level, j)) for j in candidates])
    best = int(np.argmax(distances))
    log.debug(
        'Centre descendant of %s is %.3g from the complement, below %.3g; using %s:%s at %.3g',
        cube.id, distance, needed, level, candidates[best], distances[best],
    )
    return CenterChoice(system.cube(level, candidates[best]), float(distances[best]), fallback=True)


def redistribute(system: CubeSystem, weights, cube: Cube, center: Cube, delta: float) -> tuple[float, np.ndarray]:
    """a_Q = delta + (1 - delta) mu(Q) / mu(R_Q) and the factor f_Q on the members of Q

    Args:
        system (CubeSystem): cubes over the atoms
        weights (array-like): the base weights mu
        cube (Cube): Q
        center (Cube): R_Q, a descendant of Q
        delta (float): weight left on Q minus R_Q, in [0, 1]

    Raises:
        ConstructionError: mu(R_Q) = 0
        InvariantViolation: f_Q mu does not conserve mu(Q) or leaves R_Q short

    Returns:
        tuple: a_Q and the factors, aligned with system.members(cube)
    """

    if not 0 <= delta <= 1:
        raise ValueError(f'delta must lie in [0, 1], got {delta}')

    members = system.members(cube)
    local = np.asarray(weights, dtype=float)[members]
    inside = system.assignment(center.level)[members] == center.index
    mass = float(local.sum())
    center_mass = float(local[inside].sum())
    if center_mass <= 0:
        raise ConstructionError(f'centre cube {center.level}:{center.index} of {cube.id} carries no mass')

    a = delta + (1 - delta) * mass / center_mass
    factors = np.where(inside, a, delta)

    moved = local * factors
    if abs(float(moved.sum()) - mass) > MASS_TOL * mass:
        raise InvariantViolation(f'redistribution on {cube.id} moved the mass from {mass} to {moved.sum()}')
    if float(moved[inside].sum()) < (1 - delta) * mass * (1 - MASS_TOL):
        raise InvariantViolation(f'the centre of {cube.id} keeps less than 1 - delta of its mass')
    return a, factors


@dataclass(frozen=True, eq=False)
class GksMeasure:
    """nu_0 = mu, nu_{n+1} = f_n nu_n over the generations of a cube system

    Attributes:
        base: the measure mu
        system: cubes over the atoms of mu
        delta: weight factor off the centre cubes
        skip: levels per generation
        stages: atom weights of every nu_n, stages[0] being mu
        centers: R_Q of every redistributed cube, by cube key
        coefficients: a_Q by cube key
        ratios: mu(Q) / mu(R_Q) by cube key
    """

    base: DiscreteMeasure
    system: CubeSystem
    delta: float
    skip: int
    stages: tuple[np.ndarray, ...]
    centers: dict[tuple[int, int], CenterChoice] = field(default_factory=dict)
    coefficients: dict[tuple[int, int], float] = field(default_factory=dict)
    ratios: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def generations(self) -> int:
        return len(self.stages) - 1

    @property
    def weights(self) -> np.ndarray:
        return self.stages[-1]

    def level(self, n: int) -> int:
        """Level of the cubes D_n"""
        return self.system.k_min + self.skip * n

    def generation(self, cube: Cube) -> int:
        """n with cube in D_n

        Raises:
            GeometryError: the level of the cube is not a generation level
        """

        n, rest = divmod(cube.level - self.system.k_min, self.skip)
        if rest or not 0 <= n <= self.generations:
            raise GeometryError(f'{cube.id} is not a cube of any generation D_n')
        return n

    def cubes(self, n: int) -> list[Cube]:
        return self.system.cubes(self.level(n))

    def mass(self, cube: Cube, stage: int|None=None) -> float:
        return self.system.mass(cube, self.weights if stage is None else self.stages[stage])

    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(
            self.base.spec, self.base.points, self.weights, self.base.resolution,
            name=f'gks({self.base.name})',
            params={'delta': self.delta, 'skip': self.skip, 'generations': self.generations},
        )

    def central_index(self, n: int) -> np.ndarray:
        """Index of R_T in D_{n+1} for every cube T of D_n"""

        level = self.level(n)
        return np.array([self.centers[(level, i)].cube.index for i in range(self.system.count(level))], dtype=int)

    @cached_property
    def _central_atoms(self) -> list[np.ndarray]:
        flags = [np.zeros(len(self.base), dtype=bool)]
        for n in range(self.generations):
            level = self.level(n)
            owner = self.system.assignment(level)
            flags.append(self.system.assignment(level + self.skip) == self.central_index(n)[owner])
        return flags

    def central_atoms(self, n: int) -> np.ndarray:
        """Mask of the atoms in R_T for their cube T of D_{n-1}, n >= 1"""

        if not 1 <= n <= self.generations:
            raise GeometryError(f'generation {n} outside 1..{self.generations}')
        return self._central_atoms[n]

    @property
    def c2(self) -> float:
        """Largest a_Q, 1 when nothing was redistributed"""
        return max(self.coefficients.values(), default=1.0)

    @property
    def ratio_max(self) -> float:
        return max(self.ratios.values(), default=1.0)

    @cached_property
    def max_children(self) -> int:
        """Largest number of D_{n+1} cubes below a cube of D_n"""

        best = 1
        for n in range(self.generations):
            level = self.level(n)
            owner = np.arange(self.system.count(level + self.skip))
            for k in range(level + self.skip, level, -1):
                owner = self.system.parents(k)[owner]
            best = max(best, int(np.bincount(owner).max()))
        return best

    @property
    def growth_constant(self) -> float:
        """C_5 = M e for M the measured child bound of the generations"""
        return self.max_children * e

    @property
    def delta_condition(self) -> bool:
        """(C_5 / 2 delta)^(2 delta) <= 64"""
        return (self.growth_constant / (2 * self.delta)) ** (2 * self.delta) <= GKS_GROWTH_LIMIT

    @property
    def fallbacks(self) -> int:
        return sum(choice.fallback for choice in self.centers.values())

    def to_dict(self) -> dict:
        system = self.system
        return {
            'measure': self.base.name,
            'spec': self.base.spec.name,
            'delta': self.delta,
            'skip': self.skip,
            'generations': self.generations,
            'c2': self.c2,
            'growth_constant': self.growth_constant,
            'delta_condition': self.delta_condition,
            'weights': {
                cube.id: float(mass)
                for n in range(self.generations + 1)
                for cube, mass in zip(self.cubes(n), system.masses(self.level(n), self.weights))
            },
            'centers': {
                f'{key[0]}:{key[1]}': {
                    'center': choice.cube.id,
                    'separation': choice.separation,
                    'fallback': choice.fallback,
                    'coefficient': self.coefficients[key],
                }
                for key, choice in self.centers.items()
            },
            'atoms': {
                'coords': self.base.points.tolist(),
                'weights': self.weights.tolist(),
            },
        }


def _stage_check(system: CubeSystem, level: int, before: np.ndarray, after: np.ndarray, tol: float) -> None:
    old, new = system.masses(level, before), system.masses(level, after)
    worst = int(np.argmax(np.abs(new - old) - tol * old))
    if abs(new[worst] - old[worst]) > tol * old[worst]:
        raise InvariantViolation(f'cube {level}:{worst} changed mass from {old[worst]} to {new[worst]}')


def build_measure(group: CarnotGroup, mu: DiscreteMeasure, settings: GksSettings|None=None,
                  depth: int|None=None, system: CubeSystem|None=None) -> GksMeasure:
    """Run every generation of the redistribution over mu

    Args:
        group (CarnotGroup): the group of mu
        mu (DiscreteMeasure): the base measure
        settings (GksSettings): delta and the generation skip
        depth (int, optional): N, the resolution of mu by default; truncated
            to a multiple of the skip
        system (CubeSystem, optional): prebuilt cubes reaching level N

    Raises:
        SpecError: mu lives in another group
        ValueError: delta outside (0, 1] or a skip below 1
        ConstructionError: the cube system is too shallow

    Returns:
        GksMeasure: every stage, the centre cubes and the coefficients
    """

    settings = settings or GksSettings()
    delta, skip = settings.delta, settings.generation_skip
    if not 0 < delta <= 1:
        raise ValueError(f'delta must lie in (0, 1], got {delta}')
    if skip < 1:
        raise ValueError(f'the generation skip must be positive, got {skip}')
    if group.spec != mu.spec:
        raise SpecError(f'measure lives in {mu.spec.name}, not in {group.spec.name}')

    depth = mu.resolution if depth is None else depth
    generations, rest = divmod(depth, skip)
    if rest:
        log.warning('Depth %s is not a multiple of %s, truncating to %s', depth, skip, generations * skip)

    if system is None:
        system = build_cubes(group, mu.points, build_nets(group, mu.points, 0, generations * skip))
    if system.k_min + generations * skip > system.k_max:
        raise ConstructionError(f'{generations} generations of {skip} levels need level {system.k_min + generations * skip}, '
                                f'the cubes stop at {system.k_max}')
    if skip != GKS_SKIP:
        log.info('Generation skip %s instead of %s, centre separation is checked on every cube', skip, GKS_SKIP)

    weights = mu.weights.copy()
    stages = [weights]
    centers, coefficients, ratios = {}, {}, {}
    for n in range(generations):
        level = system.k_min + skip * n
        following = weights.copy()
        for cube in system.cubes(level):
            choice = select_center(system, cube, skip)
            a, factors = redistribute(system, mu.weights, cube, choice.cube, delta)
            members = system.members(cube)
            following[members] = weights[members] * factors
            centers[cube.key], coefficients[cube.key] = choice, a
            ratios[cube.key] = system.mass(cube, mu.weights) / system.mass(choice.cube, mu.weights)

        _stage_check(system, level, weights, following, MASS_TOL)
        weights = following
        stages.append(weights)
        log.debug('Generation %s: %s cubes redistributed', n, system.count(level))

    for n, stage in enumerate(stages):
        _stage_check(system, system.k_min + skip * n, stage, weights, STABLE_TOL)

    for stage in stages:
        stage.setflags(write=False)

    nu = GksMeasure(mu, system, delta, skip, tuple(stages), centers, coefficients, ratios)
    if generations and not nu.delta_condition:
        log.warning(
            'delta = %s fails (C5 / 2 delta)^(2 delta) <= %s with measured C5 = %.3g',
            delta, GKS_GROWTH_LIMIT, nu.growth_constant,
        )
    log.info(
        'Built the redistributed measure of %s: %s generations of %s levels, delta %s, largest a_Q %.4g, %s fallbacks',
        mu.name, generations, skip, delta, nu.c2, nu.fallbacks,
    )
    return nu


@dataclass(frozen=True)
class NonCentralMass:
    """Mass left on Q after deleting k generations of centre cubes

    Attributes:
        cube: Q in D_n
        k: generations deleted
        value: nu_{n+k}(F) for F the atoms of Q outside every deleted centre
        expected: delta^k nu_n(Q) mu(F) / mu(Q)
        bound: delta^k nu_n(Q)
    """

    cube: Cube
    k: int
    value: float
    expected: float
    bound: float

    def to_dict(self) -> dict:
        return {'cube': self.cube.id, 'k': self.k, 'value': self.value, 'expected': self.expected, 'bound': self.bound}


def non_central_mass(measure: GksMeasure, cube: Cube, k: int) -> NonCentralMass:
    """Delete R_S for every S in D_j(Q), j < k, and weigh what remains

    Raises:
        ConstructionError: fewer than k generations below Q
        InvariantViolation: the remaining mass is not delta^k times its base share
    """

    n = measure.generation(cube)
    if k < 0 or n + k > measure.generations:
        raise ConstructionError(f'{k} generations below {cube.id} exceed the {measure.generations} built')

    members = measure.system.members(cube)
    keep = np.ones(members.size, dtype=bool)
    for j in range(n + 1, n + k + 1):
        keep &= ~measure.central_atoms(j)[members]

    rest = members[keep]
    before = measure.mass(cube, n)
    share = float(measure.base.weights[rest].sum()) / float(measure.base.weights[members].sum())
    value = float(measure.stages[n + k][rest].sum())
    report = NonCentralMass(cube, k, value, measure.delta ** k * before * share, measure.delta ** k * before)

    if abs(report.value - report.expected) > STABLE_TOL * max(report.bound, 1e-300):
        raise InvariantViolation(f'non-central mass {value} of {cube.id} differs from {report.expected}')
    if report.value > report.bound * (1 + MASS_TOL):
        raise InvariantViolation(f'non-central mass {value} of {cube.id} exceeds delta^k nu(Q) = {report.bound}')
    return report
