"""Rectifiable and purely unrectifiable parts of discrete measures"""

from .classify import CRITERIA, Decomposition, classify, grid_constants, measure_cubes, slope_threshold
from .witness import (
    WitnessCurve,
    WitnessReport,
    attach_witnesses,
    build_witness_curves,
    clouds_from_tree,
    density_trees,
    fit_line,
    qualifying_atoms,
    select_points,
)
from .necessity import NecessityReport, necessity_check
