"""Discrete measures, trees of cubes and the localization of sum functions"""

from .measure import DiscreteMeasure, resolution_for
from .tree import (
    CubeTree,
    cube_terms,
    cube_values,
    density_tree,
    double_ball_densities,
    leaves,
    leaves_by_levels,
    sum_function,
    sum_function_all,
)
from .localize import LocalizationResult, localize
