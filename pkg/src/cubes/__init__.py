"""Dyadic cubes over finite samples of Carnot groups"""

from .nets import Nets, build_nets, check_nets, lattice_nets
from .system import Cube, CubeReport, CubeSystem, build_cubes, check_cubes, near, near_containment, parse_cube_id
from .whitney import WhitneyFamily, effective_diam, unresolved, whitney
