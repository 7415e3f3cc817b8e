"""Curves through sequences of point clouds"""

from .clouds import CloudReport, CloudSequence, ConditionResult, clouds_from_nets, fit_cloud_lines, validate_clouds
from .graph import (
    BilipschitzReport,
    Bridge,
    CurveGraph,
    LedgerReport,
    LedgerRow,
    LevelGraph,
    VertexCase,
    build_graphs,
    check_bilipschitz,
    check_graph,
    edge,
    first_level,
    ledger_check,
    projected_length,
)
from .curve import Polyline, realize_curve, tree_walk
