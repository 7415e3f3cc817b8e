"""A doubling measure carried by curves: iterated redistribution towards central cubes"""

from .measure import (
    CenterChoice,
    GksMeasure,
    NonCentralMass,
    build_measure,
    non_central_mass,
    redistribute,
    select_center,
    separation,
)
from .doubling import DoublingReport, ball_ratio, neighbor_ratios, verify_doubling
from .curve import (
    CoverReport,
    FamilyReport,
    GksCurve,
    build_curve,
    capture_product,
    central_hits,
    check_families,
    count_bound,
    cover,
    family,
    first_round_size,
    mass_bound,
    straight_connector,
)
