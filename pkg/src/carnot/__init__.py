"""Carnot group arithmetic, homogeneous norms and horizontal lines"""

from .spec import StratificationSpec, abelian, heisenberg, engel, load_spec, resolve_group
from .norm import HomogeneousNorm
from .group import CarnotGroup, GroupPoint, heisenberg_product, engel_product
from .calibrate import CalibrationResult, calibrate_eta
from .lines import (
    HorizontalLine,
    beta_tilde_to_line,
    dist_to_line,
    dists_to_line,
    stratified_dist,
    tube_alpha,
    tube_membership,
)
from .index import GroupIndex
