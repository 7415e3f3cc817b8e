"""Pruning a tree to the cubes where a bounded sum function lives"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import InvariantViolation, LocalizationError
from .measure import DiscreteMeasure
from .tree import CubeKey, CubeTree, cube_values, leaves, sum_function_all


log = logging.getLogger(__name__)

MASS_SLACK = 1e-12


@dataclass(frozen=True)
class LocalizationResult:
    """Good subtree and the quantities its guarantees are stated in

    Attributes:
        tree: the good subtree, same top as the input
        good_set: atoms of A = {x in Leaves(T) : S(x) <= N}
        mass_a: mu(A)
        bad: maximal bad cubes that were cut off
        leaf_mass: mu(A intersected with Leaves of the good tree)
        total_b: sum of b over the good tree
        bound: (N / eps) mu(Top)
    """

    tree: CubeTree
    good_set: np.ndarray
    mass_a: float
    bad: tuple[CubeKey, ...]
    leaf_mass: float
    total_b: float
    bound: float

    def to_dict(self) -> dict:
        return {
            'tree': self.tree.to_dict(),
            'mass_a': self.mass_a,
            'bad': [f'{k}:{i}' for k, i in self.bad],
            'leaf_mass': self.leaf_mass,
            'total_b': self.total_b,
            'bound': self.bound,
        }


def localize(tree: CubeTree, b, mu: DiscreteMeasure, N: float, eps: float) -> LocalizationResult:
    """Drop every cube lying inside a cube R with mu(A cap R) <= (eps mu(A) / mu(Top)) mu(R)

    Args:
        tree (CubeTree): the tree T
        b: nonnegative cube weights, mapping from keys or callable on cubes
        mu (DiscreteMeasure): measure aligned with the system sample
        N (float): threshold on the sum function
        eps (float): in (0, 1)

    Raises:
        ValueError: N or eps out of range
        LocalizationError: A has zero mass
        InvariantViolation: a guarantee fails on the pruned tree

    Returns:
        LocalizationResult: the good subtree with its certificates
    """

    if not N > 0:
        raise ValueError(f'N must be positive, got {N}')
    if not 0 < eps < 1:
        raise ValueError(f'eps must lie in (0, 1), got {eps}')

    system = tree.system
    weights = mu.weights
    sums = sum_function_all(tree, b, mu)
    in_a = np.zeros(len(system.points), dtype=bool)
    tree_leaves = leaves(tree)
    in_a[tree_leaves] = sums[tree_leaves] <= N
    mass_a = float(weights[in_a].sum())
    if mass_a <= 0:
        raise LocalizationError(
            f'no leaf mass has S <= {N} (leaves carry {weights[tree_leaves].sum():.6g})'
        )

    top_level, top_index = tree.top
    mass_top = float(system.masses(top_level, weights)[top_index])
    ratio = eps * mass_a / mass_top

    a_weights = np.where(in_a, weights, 0.0)
    masks, bad = {}, []
    for level, idx in tree.by_level.items():
        alive = np.zeros(system.count(level), dtype=bool)
        alive[idx] = True
        if level > top_level:
            alive &= masks[level - 1][system.parents(level)]

        mass = system.masses(level, weights)
        mass_in_a = system.masses(level, a_weights)
        is_bad = alive & (mass_in_a <= ratio * mass)
        bad.extend((level, int(i)) for i in np.flatnonzero(is_bad))
        masks[level] = alive & ~is_bad

    if not masks[top_level][top_index]:
        raise InvariantViolation('the top cube came out bad although mu(A) > 0')

    good = CubeTree.from_masks(system, tree.top_cube, masks)

    leaf_mass = float(a_weights[leaves(good)].sum())
    total_b = float(sum(values.sum() for values in cube_values(good, b).values()))
    bound = N / eps * mass_top

    if leaf_mass < (1 - eps) * mass_a - MASS_SLACK * mass_a:
        raise InvariantViolation(
            f'good leaves keep {leaf_mass:.6g} of A, below (1 - eps) mu(A) = {(1 - eps) * mass_a:.6g}'
        )
    if total_b > 0 and not total_b < bound * (1 + MASS_SLACK):
        raise InvariantViolation(f'sum of b over the good tree {total_b:.6g} reaches {bound:.6g}')

    log.debug(
        'Localized %s cubes to %s, %s bad roots, leaf mass %.4g of %.4g',
        len(tree), len(good), len(bad), leaf_mass, mass_a,
    )
    return LocalizationResult(good, np.flatnonzero(in_a), mass_a, tuple(bad), leaf_mass, total_b, bound)
