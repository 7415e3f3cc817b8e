"""Beta numbers, Jones functions and densities of discrete measures"""

from .candidates import LineCandidateSet, farthest_atoms, line_candidates, pair_lines, pca_line, refine_line
from .report import BetaRecord, BetaReport, jones, jones_all, jones_partials
from .engine import BetaEngine, beta_integral
from .density import dyadic_radii, lower_densities, lower_density, upper_doubling, upper_doublings
