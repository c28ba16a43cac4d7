"""Cascading line failures under the DC power-flow model."""

from .cascade import CascadeTrace, run_cfe, run_cfe_pb
from .dcflow import FlowState, change_ratios, flow_change_bounds, flow_change_single_failure, solve_flows
from .errors import *  # noqa: F403
from .generators import EnsembleSpec, assign_operating_point, fixture, generate
from .grid import Bus, Grid, Line, admittance_matrix, build_grid, components, load_instance, save_instance, shed_load
from .metrics import CascadeMetrics, cascade_metrics, edge_distance, yield_of
from .spectral import (
    PseudoInverse,
    components_from_pinv,
    is_cut_edge,
    kirchhoff_index,
    pseudo_inverse,
    rank1_remove,
    resistance_distance,
)
from .vulnerability import AttackResult, brute_force_min_yield, evaluate_attack, mves_rb, random_attack

__version__ = "0.1.0"
