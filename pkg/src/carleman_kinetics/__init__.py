"""Carleman linearization of polynomial ODEs and isothermal mass-action kinetics."""
from .carleman import CarlemanSystem, assemble, consistency_defect, lift, readout, rescale_system, transfer_block
from .experiments import RunConfig, cost_estimate, error_metrics, sweep
from .integrators import IntegrationConfig, Trajectory, reference_integrate, simulate
from .kinetics import Mechanism, initial_concentrations, to_polynomial
from .mech_parser import load_mechanism, parse_mechanism
from .poly_ode import PolynomialSystem, eval_rhs, jacobian, kron_power
from .sparse_core import BlockMatrix, SparseMatrix, kron, solve_block_upper_triangular, solve_sparse_lu

__all__ = [
    "BlockMatrix",
    "CarlemanSystem",
    "IntegrationConfig",
    "Mechanism",
    "PolynomialSystem",
    "RunConfig",
    "SparseMatrix",
    "Trajectory",
    "assemble",
    "consistency_defect",
    "cost_estimate",
    "error_metrics",
    "eval_rhs",
    "initial_concentrations",
    "jacobian",
    "kron",
    "kron_power",
    "lift",
    "load_mechanism",
    "parse_mechanism",
    "readout",
    "reference_integrate",
    "rescale_system",
    "simulate",
    "solve_block_upper_triangular",
    "solve_sparse_lu",
    "sweep",
    "to_polynomial",
    "transfer_block",
]
