"""Simulation and verification lab for type-I planar stochastic hyperbolic
triangulations, their peeling processes, and the continuum perimeter/volume
processes they converge to."""

from hyperplane.combinatorics import (
    LambdaParams,
    BoltzmannTables,
    lambda_critical,
    h_from_lambda,
    count_triangulations,
    partition_function,
    markov_constant,
    generating_functions,
)
from hyperplane.peeling import HullTrace, PeelEngine, near_critical_run, peel_to_radius, step_distribution
from hyperplane.mapbuild import build_pshit_ball, fill_boltzmann, hull_of_radius, check_geodesic_containment
from hyperplane.continuum import joint_transform, joint_transform_critical, marginal_transform_X, phi, sample_nu, sigma_tail
from hyperplane.levypaths import CadlagPath, martingale_check, simulate_PV, simulate_backward_levy
from hyperplane.rngstreams import RunStreams

__all__ = [
    "LambdaParams",
    "BoltzmannTables",
    "lambda_critical",
    "h_from_lambda",
    "count_triangulations",
    "partition_function",
    "markov_constant",
    "generating_functions",
    "HullTrace",
    "PeelEngine",
    "near_critical_run",
    "peel_to_radius",
    "step_distribution",
    "build_pshit_ball",
    "fill_boltzmann",
    "hull_of_radius",
    "check_geodesic_containment",
    "joint_transform",
    "joint_transform_critical",
    "marginal_transform_X",
    "phi",
    "sample_nu",
    "sigma_tail",
    "CadlagPath",
    "martingale_check",
    "simulate_PV",
    "simulate_backward_levy",
    "RunStreams",
]

__version__ = "0.1.0"
