"""Ant colony optimization for the TSP, accelerated by special local clustering."""
from .aco import AcoParams, Tour, run_aco
from .clustering import ClusterConfig, slc, slc_mixture
from .instance_io import EdgeWeightType, Instance, load_instance, parse_tsplib
from .pipeline import Algorithm, SolverConfig, solve

__all__ = ["AcoParams", "Algorithm", "ClusterConfig", "EdgeWeightType", "Instance", "SolverConfig",
           "Tour", "load_instance", "parse_tsplib", "run_aco", "slc", "slc_mixture", "solve"]
__version__ = "0.1.0"
